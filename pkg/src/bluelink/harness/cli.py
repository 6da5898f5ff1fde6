"""Command-line entry point.

Subcommands map onto the pipelines: encode, simulate, extract, decode,
train, evaluate, report.  Every command takes a YAML config (--config)
plus a few overrides, validates it before touching the filesystem, and
writes a manifest beside its outputs.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .. import __version__, frameio
from .. import micronn as mn
from ..channelsim import ScreenQuad
from ..frameproto import separation
from ..micronn.train import history_to_csv
from ..screenextract import extract, segment_default
from . import pipelines as pl
from .config import ConfigError, HarnessConfig, dump_config, load_config
from .metrics import rows_to_csv
from .report import write_report


def _load_config(args) -> HarnessConfig:
    if args.config:
        return load_config(args.config)
    return HarnessConfig()


def _out_dir(config: HarnessConfig, override: str | None) -> Path:
    out = Path(override) if override else config.resolved_output_dir()
    return out


def _frame_paths(directory: Path) -> list[Path]:
    return sorted(
        p for p in directory.iterdir() if p.suffix.lower() in (".png", ".raw")
    )


def cmd_encode(args) -> int:
    config = _load_config(args)
    payload = Path(args.payload).read_bytes()
    corpus = pl.load_content(config)
    frames, meta = pl.encode_payload(payload, config.layout, corpus, config.modulation)
    out = _out_dir(config, args.out)
    out.mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(frames):
        frameio.save_frame(out / f"frame_{i:06d}.png", frame)
    manifest = {
        "tool": "bluelink",
        "version": __version__,
        "kind": "encoded",
        "seed": config.seed,
        "config_digest": config.digest(),
        "layout": {
            "rows": config.layout.rows,
            "cols": config.layout.cols,
            "parity_bits": config.layout.parity_bits,
        },
        "payload_bytes": len(payload),
        "pairs": meta,
    }
    pl.write_manifest(out / "manifest.json", manifest)
    print(f"encoded {len(payload)} bytes into {len(frames)} display frames at {out}")
    return 0


def cmd_simulate(args) -> int:
    config = _load_config(args)
    frames_dir = Path(args.frames)
    paths = _frame_paths(frames_dir)
    if not paths:
        print(f"no frames found in {frames_dir}", file=sys.stderr)
        return 2
    display = [frameio.load_frame(p) for p in paths]
    rng = np.random.default_rng(config.seed)
    channel = config.channel
    if channel.background is None:
        from .content import make_background

        channel = channel.with_(background=make_background(channel.scene_size, rng))
    cams, quads = pl.simulate_stream(display, channel, rng)
    out = _out_dir(config, args.out)
    out.mkdir(parents=True, exist_ok=True)
    for i, cam in enumerate(cams):
        frameio.save_frame(out / f"cam_{i:06d}.png", cam)
    manifest = {
        "tool": "bluelink",
        "version": __version__,
        "kind": "simulated",
        "seed": config.seed,
        "config_digest": config.digest(),
        "display_frames": len(display),
        "camera_frames": len(cams),
        "truth_quads": [q.array().tolist() for q in quads],
    }
    pl.write_manifest(out / "manifest.json", manifest)
    print(f"simulated {len(cams)} camera frames at {out}")
    return 0


def cmd_extract(args) -> int:
    config = _load_config(args)
    paths = _frame_paths(Path(args.frames))
    if not paths:
        print(f"no frames found in {args.frames}", file=sys.stderr)
        return 2
    out = _out_dir(config, args.out)
    out.mkdir(parents=True, exist_ok=True)
    quads = []
    for i, p in enumerate(paths):
        frame = frameio.load_frame(p)
        res = extract(
            frame, segment_default, config.extractor.kernel,
            config.extractor.threshold, config.extractor.side,
        )
        quads.append(res.quad.array().tolist() if res else None)
        if res and args.debug_views:
            frameio.save_frame(out / f"view_{i:06d}.png", res.normalized)
    pl.write_manifest(
        out / "quads.json",
        {"tool": "bluelink", "kind": "quads", "frames": [str(p) for p in paths],
         "quads": quads},
    )
    found = sum(q is not None for q in quads)
    print(f"extracted screens in {found}/{len(paths)} frames -> {out}/quads.json")
    return 0


def cmd_decode(args) -> int:
    config = _load_config(args)
    cam_dir = Path(args.frames)
    paths = _frame_paths(cam_dir)
    if not paths:
        print(f"no camera frames found in {cam_dir}", file=sys.stderr)
        return 2
    frames = [frameio.load_frame(p) for p in paths]
    truth = None
    sim_manifest = cam_dir / "manifest.json"
    if sim_manifest.is_file():
        data = json.loads(sim_manifest.read_text())
        if "truth_quads" in data:
            truth = [ScreenQuad.from_array(np.array(q)) for q in data["truth_quads"]]
    quads = pl.quads_for_stream(frames, config, truth)

    layout = config.layout
    side = config.extractor.side
    if config.decoder.kind == "cnn":
        network = mn.load_model(config.decoder.model_path)
        decoder = pl.CnnTripleDecoder(network, layout.rows, layout.cols)
    else:
        decoder = pl.ClassicalTripleDecoder(layout.rows, layout.cols, side)
    sep = separation(config.channel.camera_rate, config.channel.display_rate)
    records, deliveries = pl.decode_stream(
        frames, quads, layout, decoder, sep, side
    )
    out = _out_dir(config, args.out)
    out.mkdir(parents=True, exist_ok=True)
    bits: list[int] = []
    for _, _, payload in deliveries:
        bits.extend(payload)
    (out / "payload.bin").write_bytes(pl.bits_to_bytes(bits))
    (out / "frames.csv").write_text(pl.records_to_csv(records))
    pl.write_manifest(
        out / "manifest.json",
        {
            "tool": "bluelink",
            "version": __version__,
            "kind": "decoded",
            "decoder": decoder.name,
            "camera_frames": len(frames),
            "candidates": len(records),
            "delivered_frames": len(deliveries),
            "delivered_bytes": len(bits) // 8,
        },
    )
    print(
        f"decoded {len(deliveries)} data frames "
        f"({len(bits) // 8} payload bytes) -> {out}"
    )
    return 0


def cmd_train(args) -> int:
    config = _load_config(args)
    out = _out_dir(config, args.out)
    out.mkdir(parents=True, exist_ok=True)
    network, history = pl.train_decoder(config)
    model_path = out / "decoder.blnn"
    mn.save_model(network, model_path)
    (out / "history.csv").write_text(history_to_csv(history))
    last = history[-1]
    pl.write_manifest(
        out / "manifest.json",
        {
            "tool": "bluelink",
            "version": __version__,
            "kind": "trained",
            "seed": config.seed,
            "config_digest": config.digest(),
            "epochs": len(history),
            "final_bit_accuracy": last.bit_accuracy,
            "final_val_accuracy": last.val_accuracy,
        },
    )
    print(
        f"trained decoder to bit accuracy {last.bit_accuracy:.4f} "
        f"(val {last.val_accuracy if last.val_accuracy is not None else float('nan'):.4f}) -> {model_path}"
    )
    return 0


def cmd_evaluate(args) -> int:
    config = _load_config(args)
    rows, manifest = pl.run_experiment(config)
    out = _out_dir(config, args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "metrics.csv").write_text(rows_to_csv(rows))
    manifest["version"] = __version__
    pl.write_manifest(out / "manifest.json", manifest)
    failures = [r for r in rows if r.error]
    print(f"evaluated {len(rows)} conditions ({len(failures)} errors) -> {out}/metrics.csv")
    for r in rows:
        tag = f" ERROR {r.error}" if r.error else ""
        print(f"  {r.condition}: FER={r.fer:.3f} BER={r.ber:.4f} GP={r.goodput:.0f} b/s{tag}")
    return 0


def cmd_report(args) -> int:
    metrics = Path(args.metrics)
    if not metrics.is_file():
        print(f"metrics file {metrics} not found", file=sys.stderr)
        return 2
    written = write_report(metrics, Path(args.out) if args.out else metrics.parent)
    for p in written:
        print(f"wrote {p}")
    return 0


def cmd_show_config(args) -> int:
    print(dump_config(_load_config(args)), end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bluelink",
        description="Blue-channel screen-camera communication toolkit",
    )
    parser.add_argument("--version", action="version", version=f"bluelink {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_help="output directory"):
        p.add_argument("--config", help="YAML config file")
        p.add_argument("--out", help=out_help)

    p = sub.add_parser("encode", help="embed a payload file into display frame pairs")
    p.add_argument("payload", help="payload file (raw bytes)")
    common(p)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("simulate", help="run display frames through the camera channel")
    p.add_argument("frames", help="directory of display frames")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("extract", help="locate screens in camera frames")
    p.add_argument("frames", help="directory of camera frames")
    p.add_argument("--debug-views", action="store_true", help="write normalized views")
    common(p)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("decode", help="decode a simulated camera stream")
    p.add_argument("frames", help="directory of camera frames (+ manifest.json)")
    common(p)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("train", help="train the collective decoder")
    common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="run the configured experiment sweep")
    common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="emit plot-data series from a metrics CSV")
    p.add_argument("metrics", help="metrics.csv produced by evaluate")
    p.add_argument("--out", help="series output directory")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("show-config", help="print the resolved configuration")
    common(p)
    p.set_defaults(func=cmd_show_config)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
