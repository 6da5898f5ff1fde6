"""Collective bit decoder.

Assembles 3-frame Blue-channel inputs from the camera stream, runs a CNN
jointly over the whole extracted screen view, thresholds sigmoid outputs
to bits, tiles the canonical model over larger grids, and generates its
own jitter-augmented training data from the channel simulator.

One decoder input is the triple (F+, F+t, F-): the aligned positive
frame, the transition frame, and the aligned negative frame of one
Manchester pair, each unwarped to a side x side single-channel view.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import micronn as mn
from .channelsim import ChannelConfig, ScreenQuad, compose_scene, rate_ratio, sample_camera_stream, screen_homography
from .pixelcodec import BLUE, GridGeometry, MIX_PLAN, ModulationPlan, embed_pair
from .screenextract import detect_landmark, unwarp, unwarp_channel

DESK_SIDE = 96
DESK_GRID = (4, 4)
PAPER_SIDE = 299
PAPER_GRID = (10, 10)
DEFAULT_WIDTHS = (16, 32, 32, 64, 64)
LANDMARK_INTERVAL = 10


@dataclass(frozen=True)
class FrameTriple:
    """Blue-channel views of (F+, F+t, F-) plus provenance and phase score."""

    channels: np.ndarray  # (3, side, side) float32, 0..255 scale
    frame_indices: tuple[int, int, int]
    score: float = 0.0

    def __post_init__(self):
        if self.channels.shape[0] != 3:
            raise ValueError("a triple carries exactly 3 channels")
        i0, i1, i2 = self.frame_indices
        if not i0 < i1 < i2:
            raise ValueError("frame indices must be strictly increasing")


@dataclass(frozen=True)
class TrainSample:
    """One training example: stacked triple, target bits, applied jitter."""

    inputs: np.ndarray  # (3, side, side) uint8
    targets: np.ndarray  # (rows*cols,) uint8
    jitter: tuple[float, float]  # quad offset in cells, within +/-0.5


def build_decoder_spec(
    side: int = DESK_SIDE,
    rows: int = DESK_GRID[0],
    cols: int = DESK_GRID[1],
    in_channels: int = 3,
    widths: Sequence[int] = DEFAULT_WIDTHS,
) -> mn.ModelSpec:
    """Canonical decoder: 1x1 conv front, strided 3x3 conv stack with batch
    normalization, sigmoid dense head regressing all rows*cols bits."""
    layers = [
        mn.LayerSpec.conv(1, in_channels, widths[0]),
        mn.LayerSpec.batchnorm(widths[0]),
        mn.LayerSpec.relu(),
    ]
    s = side
    prev = widths[0]
    for width in widths[1:]:
        layers += [
            mn.LayerSpec.conv(3, prev, width, stride=2),
            mn.LayerSpec.batchnorm(width),
            mn.LayerSpec.relu(),
        ]
        prev = width
        s = (s + 2 - 3) // 2 + 1
    layers += [mn.LayerSpec.dense(prev * s * s, rows * cols), mn.LayerSpec.sigmoid()]
    return mn.ModelSpec(
        layers=tuple(layers),
        input_shape=(in_channels, side, side),
        output_len=rows * cols,
        grid=(rows, cols),
    )


def assemble_triples(
    frames: Sequence[np.ndarray],
    quads: Sequence[ScreenQuad],
    side: int = DESK_SIDE,
) -> list[FrameTriple]:
    """Unwarp each frame's Blue channel and emit every consecutive triple.

    All candidates are returned; wrong-phase candidates are meant to be
    discarded downstream by the protocol checks.  The score (mean absolute
    difference between the first and third channel) ranks candidates so a
    caller can decode only local phase-score maxima.
    """
    if len(frames) != len(quads):
        raise ValueError("need one quad per frame")
    blues = [
        unwarp_channel(f[:, :, BLUE] if f.ndim == 3 else f, q, side).astype(np.float32)
        for f, q in zip(frames, quads)
    ]
    triples = []
    for i in range(len(blues) - 2):
        stack = np.stack([blues[i], blues[i + 1], blues[i + 2]])
        score = float(np.mean(np.abs(stack[0] - stack[2])))
        triples.append(FrameTriple(stack, (i, i + 1, i + 2), score))
    return triples


def select_candidates(triples: Sequence[FrameTriple], radius: int = 2) -> list[FrameTriple]:
    """Keep triples whose phase score is a local maximum within +/-radius."""
    scores = np.array([t.score for t in triples])
    out = []
    for i, t in enumerate(triples):
        lo = max(0, i - radius)
        window = scores[lo : i + radius + 1]
        if scores[i] >= window.max() and scores[i] > 0:
            out.append(t)
    return out


def cnn_decode(triple: FrameTriple, network: mn.Network) -> np.ndarray:
    """Run the decoder on one triple; sigmoid outputs threshold at 0.5."""
    side = network.spec.input_shape[1]
    if triple.channels.shape[1:] != (side, side):
        raise ValueError(
            f"triple is {triple.channels.shape[1:]}, model wants {side}x{side}"
        )
    x = triple.channels[None].astype(np.float32) / 255.0
    probs = network.predict(x)[0]
    return (probs > 0.5).astype(np.uint8)


def decode_tiled(
    triple: FrameTriple, network: mn.Network, rows: int, cols: int
) -> np.ndarray:
    """Decode an (rows x cols) grid by tiling the canonical model.

    rows/cols must be integer multiples of the model grid; the normalized
    view is split into equal sub-rectangles (row-major tile order), each
    decoded independently, and tile bits are placed back into the full
    grid so the output matches the embedder's row-major bit order.
    """
    c_rows, c_cols = network.spec.grid
    if c_rows == 0 or rows % c_rows or cols % c_cols:
        raise ValueError(
            f"grid {rows}x{cols} is not a multiple of the canonical "
            f"{c_rows}x{c_cols} model"
        )
    t_rows = rows // c_rows
    t_cols = cols // c_cols
    if t_rows == 1 and t_cols == 1:
        return cnn_decode(triple, network)
    side = network.spec.input_shape[1]
    full = triple.channels
    grid = np.zeros((rows, cols), dtype=np.uint8)
    tile_h = full.shape[1] / t_rows
    tile_w = full.shape[2] / t_cols
    for tr in range(t_rows):
        for tc in range(t_cols):
            y0, y1 = int(round(tr * tile_h)), int(round((tr + 1) * tile_h))
            x0, x1 = int(round(tc * tile_w)), int(round((tc + 1) * tile_w))
            tile = _resize_stack(full[:, y0:y1, x0:x1], side)
            sub = cnn_decode(
                FrameTriple(tile, triple.frame_indices, triple.score), network
            )
            grid[
                tr * c_rows : (tr + 1) * c_rows, tc * c_cols : (tc + 1) * c_cols
            ] = sub.reshape(c_rows, c_cols)
    return grid.ravel()


def _resize_stack(stack: np.ndarray, side: int) -> np.ndarray:
    """Bilinear resize of a (3, h, w) stack to (3, side, side)."""
    _, h, w = stack.shape
    if (h, w) == (side, side):
        return stack
    ys = np.linspace(0, h - 1, side)
    xs = np.linspace(0, w - 1, side)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0)[None, :, None]
    fx = (xs - x0)[None, None, :]
    top = stack[:, y0][:, :, x0] * (1 - fx) + stack[:, y0][:, :, x1] * fx
    bot = stack[:, y1][:, :, x0] * (1 - fx) + stack[:, y1][:, :, x1] * fx
    return (top * (1 - fy) + bot * fy).astype(stack.dtype)


def jitter_offsets(rng: np.random.Generator, count: int) -> np.ndarray:
    """Uniform quad-jitter offsets in cells, within +/-0.5 on each axis."""
    return rng.uniform(-0.5, 0.5, size=(count, 2))


def _jittered_quad(quad: ScreenQuad, jitter_cells: np.ndarray, rows: int, cols: int) -> ScreenQuad:
    cell_w, cell_h = quad.cell_size(rows, cols)
    offset = np.array([jitter_cells[0] * cell_w, jitter_cells[1] * cell_h])
    return ScreenQuad.from_array(quad.array() + offset)


def _find_phase(
    blues_small: list[np.ndarray], landmark_flags: list[bool], k: int
) -> list[int]:
    """Indices of aligned F+ frames, located from the landmark run.

    After the last landmark-flagged frame the first Manchester pair starts
    within the next few frames; the exact offset is resolved by maximizing
    the F+/F- difference energy over the hypothesized triples.
    """
    n = len(blues_small)
    last_red = max((i for i, f in enumerate(landmark_flags) if f), default=-1)
    period = 2 * k
    best_offset, best_energy = 0, -1.0
    for offset in range(period):
        start = last_red + 1 + offset
        energies = []
        i = start
        while i + k < n:
            energies.append(float(np.mean(np.abs(blues_small[i] - blues_small[i + k]))))
            i += period
        if energies and np.mean(energies) > best_energy:
            best_energy = float(np.mean(energies))
            best_offset = offset
    starts = []
    i = last_red + 1 + best_offset
    while i + k < n:
        starts.append(i)
        i += period
    return starts


def gen_training_set(
    content_frames: Sequence[np.ndarray],
    config: ChannelConfig,
    count: int,
    seed: int,
    rows: int = DESK_GRID[0],
    cols: int = DESK_GRID[1],
    side: int = DESK_SIDE,
    plan: ModulationPlan = MIX_PLAN,
    augment_per_pair: int = 3,
    landmark_every: int = LANDMARK_INTERVAL,
) -> list[TrainSample]:
    """Simulate landmark-delimited transmissions and emit training samples.

    Content frames are embedded with random bits, passed through the
    camera channel, phase-aligned via the all-red landmark frames, and
    each detected pair is unwarped ``augment_per_pair`` times with
    independent uniform quad jitter within +/-0.5 cell per axis.
    Deterministic for a given seed.
    """
    if not content_frames:
        raise ValueError("need at least one content frame")
    rng = np.random.default_rng(seed)
    k = rate_ratio(config)
    geom = GridGeometry.for_frame(rows, cols, content_frames[0])
    samples: list[TrainSample] = []
    content_idx = 0
    from .harness.content import landmark_frame  # local import to avoid a cycle

    red = landmark_frame((content_frames[0].shape[1], content_frames[0].shape[0]))
    while len(samples) < count:
        display: list[np.ndarray] = [red]
        pair_bits: list[np.ndarray] = []
        for _ in range(landmark_every):
            frame = content_frames[content_idx % len(content_frames)]
            content_idx += 1
            bits = rng.integers(0, 2, rows * cols).astype(np.uint8)
            f_plus, f_minus = embed_pair(frame, bits, geom, plan)
            display += [f_plus, f_minus]
            pair_bits.append(bits)

        stream = sample_camera_stream(display, config)
        cam_frames = [compose_scene(f, config, rng)[0] for f in stream]
        _, truth = screen_homography(display[0].shape, config)

        small = [unwarp(f, truth, 32) for f in cam_frames]
        flags = [detect_landmark(s) for s in small]
        blues_small = [s[:, :, BLUE].astype(np.float32) for s in small]
        starts = _find_phase(blues_small, flags, k)

        for pair_i, start in enumerate(starts[: len(pair_bits)]):
            if start + 2 >= len(cam_frames):
                break
            for jitter in jitter_offsets(rng, augment_per_pair):
                quad_j = _jittered_quad(truth, jitter, rows, cols)
                chans = np.stack(
                    [
                        unwarp_channel(cam_frames[start + d][:, :, BLUE], quad_j, side)
                        for d in range(3)
                    ]
                )
                samples.append(
                    TrainSample(
                        inputs=np.clip(np.rint(chans), 0, 255).astype(np.uint8),
                        targets=pair_bits[pair_i],
                        jitter=(float(jitter[0]), float(jitter[1])),
                    )
                )
                if len(samples) >= count:
                    return samples
    return samples


def samples_to_arrays(samples: Sequence[TrainSample]) -> tuple[np.ndarray, np.ndarray]:
    """Stack samples into normalized training arrays (inputs in [0, 1])."""
    x = np.stack([s.inputs for s in samples]).astype(np.float32) / 255.0
    t = np.stack([s.targets for s in samples]).astype(np.uint8)
    return x, t
