"""Experiment harness: configuration, content generation, pipelines, metrics, CLI."""
