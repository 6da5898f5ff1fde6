"""End-to-end pipelines: encode, simulate, extract, decode, train, evaluate.

All pipelines are deterministic given the configuration seed; every run
writes a manifest carrying the seed, a config digest and a content
digest, so identical configurations reproduce identical outputs.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .. import frameio
from .. import micronn as mn
from ..channelsim import (
    ChannelConfig,
    Perturbation,
    ScreenQuad,
    compose_scene,
    perturb_quad,
    rate_ratio,
    sample_camera_stream,
    screen_homography,
)
from ..collective import (
    FrameTriple,
    assemble_triples,
    build_decoder_spec,
    cnn_decode,
    decode_tiled,
    gen_training_set,
    samples_to_arrays,
    select_candidates,
)
from ..frameproto import (
    DedupState,
    FrameLayout,
    ParseResult,
    assemble_frame,
    dedup_accept,
    parse_frame,
    separation,
)
from ..pixelcodec import BLUE, GridGeometry, ModulationPlan, classical_decode, embed_pair, psnr
from ..screenextract import extract, iou_ioc, segment_default, unwarp_channel
from . import content as content_mod
from .config import HarnessConfig, Condition
from .metrics import (
    MetricsRow,
    compute_goodput,
    compute_raw_throughput,
    compute_throughput,
)


def bytes_to_bits(data: bytes) -> list[int]:
    out = []
    for byte in data:
        out.extend((byte >> k) & 1 for k in range(7, -1, -1))
    return out


def bits_to_bytes(bits: Sequence[int]) -> bytes:
    usable = len(bits) - len(bits) % 8
    out = bytearray()
    for i in range(0, usable, 8):
        byte = 0
        for b in bits[i : i + 8]:
            byte = (byte << 1) | (int(b) & 1)
        out.append(byte)
    return bytes(out)


def load_content(config: HarnessConfig) -> list[np.ndarray]:
    c = config.content
    if c.source == "directory":
        return content_mod.load_corpus_dir(c.path)
    return content_mod.default_corpus(size=c.size, count=c.count, seed=config.seed)


def content_digest(frames: Sequence[np.ndarray]) -> str:
    h = hashlib.sha256()
    for f in frames:
        h.update(f.tobytes())
    return h.hexdigest()[:16]


# ---------------------------------------------------------------------------
# Encode

def encode_payload(
    payload: bytes,
    layout: FrameLayout,
    corpus: Sequence[np.ndarray],
    plan: ModulationPlan,
    start_seq: int = 0,
) -> tuple[list[np.ndarray], list[dict]]:
    """Pack payload bytes into data frames and embed them over the corpus.

    Returns the display frame sequence (F+, F- per data frame) and a
    per-pair metadata list (seq, payload bits as hex).  The final chunk is
    zero-padded to the layout's payload size.
    """
    bits = bytes_to_bits(payload)
    chunk = layout.data_bits
    frames: list[np.ndarray] = []
    meta: list[dict] = []
    geom = GridGeometry.for_frame(layout.rows, layout.cols, corpus[0])
    for i in range(0, max(len(bits), 1), chunk):
        piece = bits[i : i + chunk]
        piece += [0] * (chunk - len(piece))
        seq = (start_seq + len(meta)) % 32
        grid_bits = assemble_frame(piece, seq, layout)
        base = corpus[len(meta) % len(corpus)]
        f_plus, f_minus = embed_pair(base, np.array(grid_bits), geom, plan)
        frames += [f_plus, f_minus]
        meta.append(
            {
                "pair": len(meta),
                "seq": seq,
                "payload_hex": bits_to_bytes(piece + [0] * ((-len(piece)) % 8)).hex(),
            }
        )
    return frames, meta


# ---------------------------------------------------------------------------
# Simulate

def simulate_stream(
    display_frames: Sequence[np.ndarray],
    channel: ChannelConfig,
    rng: np.random.Generator,
) -> tuple[list[np.ndarray], list[ScreenQuad]]:
    """Temporal sampling plus per-frame scene composition."""
    sampled = sample_camera_stream(display_frames, channel)
    cams = []
    quads = []
    for f in sampled:
        cam, quad = compose_scene(f, channel, rng)
        cams.append(cam)
        quads.append(quad)
    return cams, quads


# ---------------------------------------------------------------------------
# Extraction policy

def quads_for_stream(
    frames: Sequence[np.ndarray],
    config: HarnessConfig,
    truth: Optional[Sequence[ScreenQuad]] = None,
) -> list[Optional[ScreenQuad]]:
    """Per-frame quads: ground truth, or the extractor run every J frames."""
    ex = config.extractor
    if ex.mode == "truth":
        if truth is None:
            raise ValueError("truth quads requested but not available")
        return list(truth)
    quads: list[Optional[ScreenQuad]] = []
    last: Optional[ScreenQuad] = None
    for i, frame in enumerate(frames):
        if i % ex.every == 0 or last is None:
            res = extract(frame, segment_default, ex.kernel, ex.threshold, ex.side)
            if res is not None:
                last = res.quad
        quads.append(last)
    return quads


# ---------------------------------------------------------------------------
# Decoders over triples

class ClassicalTripleDecoder:
    """Grid-splitting baseline: per-cell mean difference of F+ and F-."""

    name = "classical"

    def __init__(self, rows: int, cols: int, side: int):
        self.geom = GridGeometry(rows, cols, side, side)

    def __call__(self, triple: FrameTriple) -> np.ndarray:
        return classical_decode(triple.channels[0], triple.channels[2], self.geom)


class CnnTripleDecoder:
    """Collective decoder; tiles the canonical model over larger grids."""

    name = "cnn"

    def __init__(self, network: mn.Network, rows: int, cols: int):
        self.network = network
        self.rows = rows
        self.cols = cols

    def __call__(self, triple: FrameTriple) -> np.ndarray:
        if (self.rows, self.cols) == self.network.spec.grid:
            return cnn_decode(triple, self.network)
        return decode_tiled(triple, self.network, self.rows, self.cols)


@dataclass(frozen=True)
class DecodeRecord:
    frame_index: int
    score: float
    parsed_ok: bool
    seq: int
    corrected: int
    accepted: bool
    reason: str


def decode_stream(
    frames: Sequence[np.ndarray],
    quads: Sequence[Optional[ScreenQuad]],
    layout: FrameLayout,
    decoder: Callable[[FrameTriple], np.ndarray],
    sep: int,
    side: int = 96,
    gate_radius: Optional[int] = 2,
) -> tuple[list[DecodeRecord], list[tuple[int, int, tuple[int, ...]]]]:
    """Decode every candidate triple of a camera stream through the protocol.

    Candidates are ranked by phase score and (optionally) gated to local
    maxima; surviving bit vectors pass RS + checksum parsing and Sep-based
    duplicate elimination.  Returns per-candidate records and accepted
    (frame_index, seq, payload bits) deliveries.
    """
    known = [(f, q) for f, q in zip(frames, quads) if q is not None]
    if len(known) < 3:
        return [], []
    fr, qs = zip(*known)
    triples = assemble_triples(fr, qs, side)
    candidates = select_candidates(triples, gate_radius) if gate_radius else triples
    state = DedupState(sep=sep)
    records: list[DecodeRecord] = []
    deliveries: list[tuple[int, int, tuple[int, ...]]] = []
    for triple in candidates:
        bits = decoder(triple)
        parsed = parse_frame(bits.tolist(), layout)
        idx = triple.frame_indices[0]
        if not parsed.ok:
            records.append(
                DecodeRecord(idx, triple.score, False, -1, 0, False, parsed.reason)
            )
            continue
        ok = dedup_accept(state, parsed.seq, idx)
        records.append(
            DecodeRecord(
                idx,
                triple.score,
                True,
                parsed.seq,
                parsed.corrected,
                ok,
                "" if ok else "duplicate",
            )
        )
        if ok:
            deliveries.append((idx, parsed.seq, parsed.payload))
    return records, deliveries


def records_to_csv(records: Sequence[DecodeRecord]) -> str:
    lines = ["# schema=bluelink-frames-v1",
             "frame_index,score,parsed_ok,seq,corrected,accepted,reason"]
    for r in records:
        lines.append(
            f"{r.frame_index},{r.score:.4f},{int(r.parsed_ok)},{r.seq},"
            f"{r.corrected},{int(r.accepted)},{r.reason}"
        )
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Experiment sweeps

def _condition_channel(base: ChannelConfig, cond: Condition) -> ChannelConfig:
    overrides = {}
    if cond.distance is not None:
        overrides["distance"] = cond.distance
    if cond.angle_deg is not None:
        overrides["angle_deg"] = cond.angle_deg
    if cond.noise_sigma is not None:
        overrides["noise_sigma"] = cond.noise_sigma
    return base.with_(**overrides) if overrides else base


def _condition_layout(base: FrameLayout, cond: Condition) -> FrameLayout:
    if cond.parity_bits is None:
        return base
    return FrameLayout(base.rows, base.cols, cond.parity_bits)


def _condition_plan(base: ModulationPlan, cond: Condition) -> ModulationPlan:
    if cond.delta is None:
        return base
    return ModulationPlan(mode="fixed", delta=cond.delta)


def run_condition(
    config: HarnessConfig,
    cond: Condition,
    corpus: Sequence[np.ndarray],
    decoder_factory: Callable[[int, int, int], Callable[[FrameTriple], np.ndarray]],
    rng: np.random.Generator,
) -> MetricsRow:
    """Measure one condition over pairs_per_condition simulated pairs."""
    channel = _condition_channel(config.channel, cond)
    layout = _condition_layout(config.layout, cond)
    plan = _condition_plan(config.modulation, cond)
    side = config.extractor.side
    geom_side = GridGeometry(layout.rows, layout.cols, side, side)
    decoder = decoder_factory(layout.rows, layout.cols, side)

    n = config.experiment.pairs_per_condition
    bit_errors = 0
    bits_total = 0
    frame_failures = 0
    corrected = 0
    psnrs = []
    ious = []
    iocs = []
    if channel.background is None and config.channel.background is None:
        channel = channel.with_(background=content_mod.make_background(channel.scene_size, rng))
    for p in range(n):
        base = corpus[p % len(corpus)]
        geom = GridGeometry.for_frame(layout.rows, layout.cols, base)
        payload = rng.integers(0, 2, layout.data_bits).tolist()
        seq = p % 32
        grid_bits = np.array(assemble_frame(payload, seq, layout), dtype=np.uint8)
        f_plus, f_minus = embed_pair(base, grid_bits, geom, plan)
        psnrs.append(psnr(base, f_plus))

        cams, truths = simulate_stream([f_plus, f_minus], channel, rng)
        if config.extractor.mode == "pipeline":
            res = extract(cams[0], segment_default, config.extractor.kernel,
                          config.extractor.threshold, side)
            if res is None:
                frame_failures += 1
                bits_total += layout.total_bits
                bit_errors += layout.total_bits // 2
                continue
            quad = res.quad
            iou, ioc = iou_ioc(quad, truths[0])
            ious.append(iou)
            iocs.append(ioc)
        else:
            quad = truths[0]
        if cond.perturbation is not None and cond.perturbation.magnitude > 0:
            quad = perturb_quad(quad, cond.perturbation, layout.rows, layout.cols)

        blues = [unwarp_channel(c[:, :, BLUE], quad, side) for c in cams[:3]]
        triple = FrameTriple(np.stack(blues).astype(np.float32), (0, 1, 2))
        decoded = decoder(triple)
        bit_errors += int((decoded != grid_bits).sum())
        bits_total += layout.total_bits
        parsed = parse_frame(decoded.tolist(), layout)
        if parsed.ok and list(parsed.payload) == payload and parsed.seq == seq:
            corrected += parsed.corrected
        else:
            frame_failures += 1

    fer = frame_failures / n
    ber = bit_errors / bits_total
    display = channel.display_rate
    row = MetricsRow(
        condition=cond.name,
        distance=channel.distance,
        angle_deg=channel.angle_deg,
        noise_sigma=channel.noise_sigma,
        mode=plan.mode,
        delta=plan.delta if plan.mode == "fixed" else 0,
        parity_rate=layout.parity_bits / layout.total_bits,
        perturbation=cond.perturbation.kind if cond.perturbation else "",
        magnitude=cond.perturbation.magnitude if cond.perturbation else 0.0,
        pairs=n,
        fer=fer,
        ber=ber,
        goodput=compute_goodput(layout, display, fer),
        throughput=compute_throughput(layout, display, fer),
        raw_throughput=compute_raw_throughput(layout, display, ber),
        psnr_db=float(np.mean([p for p in psnrs if np.isfinite(p)] or [np.inf])),
        iou=float(np.mean(ious)) if ious else 1.0,
        ioc=float(np.mean(iocs)) if iocs else 1.0,
        corrected_symbols=corrected,
    )
    row.validate()
    return row


def run_experiment(
    config: HarnessConfig, corpus: Optional[Sequence[np.ndarray]] = None
) -> tuple[list[MetricsRow], dict]:
    """Run every configured condition; partial failures become error rows."""
    config.validate()
    if corpus is None:
        corpus = load_content(config)

    if config.decoder.kind == "cnn":
        network = mn.load_model(config.decoder.model_path)

        def decoder_factory(rows, cols, side):
            return CnnTripleDecoder(network, rows, cols)

    else:

        def decoder_factory(rows, cols, side):
            return ClassicalTripleDecoder(rows, cols, side)

    rows: list[MetricsRow] = []
    for i, cond in enumerate(config.experiment.conditions):
        rng = np.random.default_rng([config.seed, i])
        try:
            rows.append(run_condition(config, cond, corpus, decoder_factory, rng))
        except Exception as exc:  # keep sweeping; the row records the failure
            rows.append(
                MetricsRow(
                    condition=cond.name, distance=0, angle_deg=0, noise_sigma=0,
                    mode="", delta=0, parity_rate=0, perturbation="", magnitude=0,
                    pairs=0, fer=1.0, ber=1.0, goodput=0, throughput=0,
                    raw_throughput=0, psnr_db=0, iou=0, ioc=0,
                    corrected_symbols=0, error=f"{type(exc).__name__}: {exc}",
                )
            )
    manifest = {
        "tool": "bluelink",
        "kind": "experiment",
        "seed": config.seed,
        "config_digest": config.digest(),
        "content_digest": content_digest(corpus),
        "conditions": [c.name for c in config.experiment.conditions],
    }
    return rows, manifest


# ---------------------------------------------------------------------------
# Training entry point

def train_decoder(
    config: HarnessConfig,
    corpus: Optional[Sequence[np.ndarray]] = None,
    progress: Optional[Callable[[mn.EpochStats], None]] = None,
) -> tuple[mn.Network, list[mn.EpochStats]]:
    """Generate jitter-augmented data over the configured distances and train
    the canonical collective decoder."""
    t = config.train
    if corpus is None:
        corpus = load_content(config)
    rows, cols = t.grid
    per = -(-t.samples // len(t.distances))
    train_samples = []
    for i, d in enumerate(t.distances):
        train_samples += gen_training_set(
            corpus, config.channel.with_(distance=d), per, seed=config.seed + 17 * i,
            rows=rows, cols=cols, side=t.side, plan=config.modulation,
            augment_per_pair=t.augment_per_pair,
        )
    val_samples = []
    per_val = -(-t.val_samples // len(t.distances))
    for i, d in enumerate(t.distances):
        val_samples += gen_training_set(
            corpus, config.channel.with_(distance=d), per_val,
            seed=config.seed + 8191 + 31 * i,
            rows=rows, cols=cols, side=t.side, plan=config.modulation,
            augment_per_pair=t.augment_per_pair,
        )
    xt, tt = samples_to_arrays(train_samples[: t.samples])
    xv, tv = samples_to_arrays(val_samples[: t.val_samples])
    spec = build_decoder_spec(side=t.side, rows=rows, cols=cols)
    network = mn.build_network(spec, seed=config.seed)
    history = mn.train(
        network, xt, tt,
        mn.TrainConfig(
            epochs=t.epochs, batch_size=t.batch_size,
            learning_rate=t.learning_rate, seed=config.seed,
        ),
        xv, tv,
    )
    if progress:
        for h in history:
            progress(h)
    return network, history


def write_manifest(path: Path, manifest: dict) -> None:
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
