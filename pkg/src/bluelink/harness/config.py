"""Experiment configuration: YAML schema, defaults, validation.

One human-readable YAML file drives every pipeline.  Top-level sections
(all optional, defaults mirror the standard setup: 10x10 grid, 50%
parity, mixed-amplitude modulation, 60 Hz display, 120 FPS camera):

  seed: 1234
  output_dir: runs/demo          # resolved under $BLUELINK_OUT if relative
  content:    {source: builtin|directory, path, size: [w, h], count}
  layout:     {rows, cols, parity_bits}
  modulation: {mode: mix|fixed, delta}
  channel:    {display_rate, camera_rate, distance, angle_deg,
               scene_size: [w, h], fill_frac, noise_sigma, blur_radius,
               gain, transition_blend, background: generated|flat}
  extractor:  {mode: truth|pipeline, kernel, threshold, every, side}
  decoder:    {kind: classical|cnn, model_path}
  train:      {grid: [rows, cols], side, samples, val_samples, epochs,
               batch_size, learning_rate, augment_per_pair, distances}
  experiment: {pairs_per_condition, conditions: [{name, distance,
               angle_deg, noise_sigma, delta, parity_bits,
               perturbation: {kind, magnitude}}, ...]}
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Optional

import yaml

from ..channelsim import ChannelConfig, Perturbation
from ..frameproto import FrameLayout
from ..pixelcodec import ModulationPlan

OUTPUT_ROOT_ENV = "BLUELINK_OUT"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ContentConfig:
    source: str = "builtin"
    path: Optional[str] = None
    size: tuple[int, int] = (320, 180)
    count: int = 20

    def validate(self) -> None:
        if self.source not in ("builtin", "directory"):
            raise ConfigError(f"content.source must be builtin|directory, got {self.source!r}")
        if self.source == "directory":
            if not self.path or not Path(self.path).is_dir():
                raise ConfigError(f"content.path {self.path!r} is not a directory")


@dataclass(frozen=True)
class ExtractorConfig:
    mode: str = "truth"
    kernel: int = 2
    threshold: float = 0.5
    every: int = 1
    side: int = 96

    def validate(self) -> None:
        if self.mode not in ("truth", "pipeline"):
            raise ConfigError(f"extractor.mode must be truth|pipeline, got {self.mode!r}")
        if self.kernel not in (1, 2, 3):
            raise ConfigError("extractor.kernel must be 1, 2 or 3")
        if self.every < 1:
            raise ConfigError("extractor.every must be >= 1")


@dataclass(frozen=True)
class DecoderConfig:
    kind: str = "classical"
    model_path: Optional[str] = None

    def validate(self) -> None:
        if self.kind not in ("classical", "cnn"):
            raise ConfigError(f"decoder.kind must be classical|cnn, got {self.kind!r}")
        if self.kind == "cnn":
            if not self.model_path or not Path(self.model_path).is_file():
                raise ConfigError(f"decoder.model_path {self.model_path!r} is not a file")


@dataclass(frozen=True)
class TrainSettings:
    grid: tuple[int, int] = (4, 4)
    side: int = 96
    samples: int = 3000
    val_samples: int = 500
    epochs: int = 12
    batch_size: int = 32
    learning_rate: float = 2e-3
    augment_per_pair: int = 2
    distances: tuple[float, ...] = (1.5, 1.8, 2.1)


@dataclass(frozen=True)
class Condition:
    """One experiment row: overrides applied to the base configuration."""

    name: str
    distance: Optional[float] = None
    angle_deg: Optional[float] = None
    noise_sigma: Optional[float] = None
    delta: Optional[int] = None
    parity_bits: Optional[int] = None
    perturbation: Optional[Perturbation] = None


@dataclass(frozen=True)
class ExperimentSettings:
    pairs_per_condition: int = 60
    conditions: tuple[Condition, ...] = (Condition(name="base"),)


@dataclass(frozen=True)
class HarnessConfig:
    seed: int = 1234
    output_dir: str = "runs/out"
    content: ContentConfig = field(default_factory=ContentConfig)
    layout: FrameLayout = field(default_factory=lambda: FrameLayout(10, 10, 50))
    modulation: ModulationPlan = field(default_factory=ModulationPlan)
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    extractor: ExtractorConfig = field(default_factory=ExtractorConfig)
    decoder: DecoderConfig = field(default_factory=DecoderConfig)
    train: TrainSettings = field(default_factory=TrainSettings)
    experiment: ExperimentSettings = field(default_factory=ExperimentSettings)

    def validate(self) -> None:
        self.content.validate()
        self.extractor.validate()
        self.decoder.validate()
        if self.experiment.pairs_per_condition < 1:
            raise ConfigError("experiment.pairs_per_condition must be >= 1")

    def resolved_output_dir(self) -> Path:
        root = os.environ.get(OUTPUT_ROOT_ENV, "")
        path = Path(self.output_dir)
        if root and not path.is_absolute():
            return Path(root) / path
        return path

    def to_dict(self) -> dict[str, Any]:
        def plain(obj):
            if hasattr(obj, "__dataclass_fields__"):
                return {k: plain(v) for k, v in asdict(obj).items()}
            if isinstance(obj, (list, tuple)):
                return [plain(v) for v in obj]
            if isinstance(obj, Path):
                return str(obj)
            return obj

        out = {
            "seed": self.seed,
            "output_dir": self.output_dir,
            "content": plain(self.content),
            "layout": {
                "rows": self.layout.rows,
                "cols": self.layout.cols,
                "parity_bits": self.layout.parity_bits,
            },
            "modulation": plain(self.modulation),
            "channel": {
                k: v
                for k, v in plain(self.channel).items()
                if k != "background"
            },
            "extractor": plain(self.extractor),
            "decoder": plain(self.decoder),
            "train": plain(self.train),
            "experiment": plain(self.experiment),
        }
        return out

    def digest(self) -> str:
        return hashlib.sha256(
            json.dumps(self.to_dict(), sort_keys=True).encode()
        ).hexdigest()[:16]


def _take(section: dict, cls, mapping: Optional[dict] = None):
    mapping = mapping or {}
    fields = {f for f in cls.__dataclass_fields__}
    unknown = set(section) - fields - set(mapping)
    if unknown:
        raise ConfigError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    kwargs = dict(section)
    for src, fn in mapping.items():
        if src in kwargs:
            kwargs[src] = fn(kwargs[src])
    return cls(**kwargs)


def _tuple2(v) -> tuple:
    if not isinstance(v, (list, tuple)) or len(v) != 2:
        raise ConfigError(f"expected a 2-element list, got {v!r}")
    return tuple(v)


def load_config(path: str | Path) -> HarnessConfig:
    try:
        raw = yaml.safe_load(Path(path).read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML ({exc})") from exc
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return config_from_dict(raw)


def config_from_dict(raw: dict) -> HarnessConfig:
    known = {
        "seed", "output_dir", "content", "layout", "modulation", "channel",
        "extractor", "decoder", "train", "experiment",
    }
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown top-level config keys: {sorted(unknown)}")

    kwargs: dict[str, Any] = {}
    if "seed" in raw:
        kwargs["seed"] = int(raw["seed"])
    if "output_dir" in raw:
        kwargs["output_dir"] = str(raw["output_dir"])
    if "content" in raw:
        kwargs["content"] = _take(raw["content"], ContentConfig, {"size": _tuple2})
    if "layout" in raw:
        sec = raw["layout"]
        try:
            kwargs["layout"] = FrameLayout(
                rows=int(sec.get("rows", 10)),
                cols=int(sec.get("cols", 10)),
                parity_bits=int(sec.get("parity_bits", 50)),
            )
        except ValueError as exc:
            raise ConfigError(f"layout: {exc}") from exc
    if "modulation" in raw:
        try:
            kwargs["modulation"] = _take(raw["modulation"], ModulationPlan)
        except ValueError as exc:
            raise ConfigError(f"modulation: {exc}") from exc
    if "channel" in raw:
        sec = dict(raw["channel"])
        bg = sec.pop("background", None)
        if bg not in (None, "generated", "flat"):
            raise ConfigError("channel.background must be generated|flat")
        try:
            kwargs["channel"] = _take(sec, ChannelConfig, {"scene_size": _tuple2})
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"channel: {exc}") from exc
    if "extractor" in raw:
        kwargs["extractor"] = _take(raw["extractor"], ExtractorConfig)
    if "decoder" in raw:
        kwargs["decoder"] = _take(raw["decoder"], DecoderConfig)
    if "train" in raw:
        kwargs["train"] = _take(
            raw["train"], TrainSettings,
            {"grid": _tuple2, "distances": lambda v: tuple(float(x) for x in v)},
        )
    if "experiment" in raw:
        sec = dict(raw["experiment"])
        conds = []
        for c in sec.pop("conditions", [{"name": "base"}]):
            c = dict(c)
            pert = c.pop("perturbation", None)
            if pert is not None:
                pert = Perturbation(kind=pert["kind"], magnitude=float(pert["magnitude"]))
            conds.append(_take({**c, "perturbation": pert}, Condition))
        kwargs["experiment"] = ExperimentSettings(
            pairs_per_condition=int(sec.pop("pairs_per_condition", 60)),
            conditions=tuple(conds),
        )
        if sec:
            raise ConfigError(f"unknown experiment keys: {sorted(sec)}")

    config = HarnessConfig(**kwargs)
    config.validate()
    return config


def dump_config(config: HarnessConfig) -> str:
    return yaml.safe_dump(config.to_dict(), sort_keys=False)
