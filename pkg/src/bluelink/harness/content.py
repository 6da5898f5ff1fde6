"""Procedural display content and scene backgrounds.

The default corpus stands in for benchmark video stills: multi-scale
smooth textures, gradients and soft shapes.  Most frames are low-blue
("warm"/dark-scene) content so the mixed-amplitude encoder mostly runs at
its larger step; a few bright frames exercise the smaller step.  Frames
are deterministic per seed.  A user-supplied image directory can replace
the corpus at the CLI level.
"""

from __future__ import annotations

from pathlib import Path
from typing import Optional

import numpy as np
from scipy.ndimage import gaussian_filter

from .. import frameio

LANDMARK_COLOR = (255, 0, 0)


def _multiscale_noise(rng: np.random.Generator, h: int, w: int) -> np.ndarray:
    """Smooth random field in [0, 1] built from stacked blurred octaves."""
    out = np.zeros((h, w))
    for sigma, weight in ((24, 0.5), (9, 0.3), (3, 0.2)):
        out += weight * gaussian_filter(rng.standard_normal((h, w)), sigma)
    out -= out.min()
    peak = out.max()
    return out / peak if peak > 0 else out


def make_content_frame(
    size: tuple[int, int],
    rng: np.random.Generator,
    tone: str = "dark",
) -> np.ndarray:
    """One procedurally generated display frame.

    tone "dark": low-blue scene, Blue kept within [4, 29] (every cell mean
    falls below the mixed-plan threshold and no pixel can clamp at step 3).
    tone "bright": Blue within [40, 230].  tone "mixed": free-range.
    """
    w, h = size
    base = _multiscale_noise(rng, h, w)
    detail = _multiscale_noise(rng, h, w)
    field = 0.75 * base + 0.25 * detail

    if tone == "dark":
        r = 20 + 150 * field
        g = 12 + 90 * _multiscale_noise(rng, h, w)
        b = 4 + 25 * field
    elif tone == "bright":
        r = 60 + 170 * field
        g = 50 + 170 * detail
        b = 40 + 190 * field
    elif tone == "mixed":
        r = 255 * field
        g = 255 * detail
        b = 255 * _multiscale_noise(rng, h, w)
    else:
        raise ValueError(f"unknown tone {tone!r}")
    frame = np.stack([r, g, b], axis=-1)
    return np.clip(np.rint(frame), 0, 255).astype(np.uint8)


def default_corpus(
    size: tuple[int, int] = (320, 180),
    count: int = 20,
    seed: int = 7,
    dark_fraction: float = 0.95,
) -> list[np.ndarray]:
    """Deterministic content corpus; ``dark_fraction`` of frames are low-blue."""
    rng = np.random.default_rng(seed)
    n_dark = int(round(count * dark_fraction))
    frames = [make_content_frame(size, rng, "dark") for _ in range(n_dark)]
    frames += [make_content_frame(size, rng, "bright") for _ in range(count - n_dark)]
    return frames


def load_corpus_dir(path: str | Path) -> list[np.ndarray]:
    files = sorted(
        p for p in Path(path).iterdir() if p.suffix.lower() in (".png", ".jpg", ".jpeg", ".bmp", ".raw")
    )
    if not files:
        raise ValueError(f"no image files found in {path}")
    return [frameio.load_frame(p) for p in files]


def landmark_frame(size: tuple[int, int]) -> np.ndarray:
    w, h = size
    frame = np.zeros((h, w, 3), dtype=np.uint8)
    frame[:, :, 0] = LANDMARK_COLOR[0]
    return frame


def make_background(
    scene_size: tuple[int, int],
    rng: np.random.Generator,
    clutter: int = 2,
) -> np.ndarray:
    """Indoor-style wall: gray gradient, mild texture, a few dim furnishings."""
    w, h = scene_size
    base = rng.uniform(78, 118)
    gx = rng.uniform(-16, 16)
    gy = rng.uniform(-16, 16)
    yy, xx = np.mgrid[0:h, 0:w]
    wall = base + gx * (xx / w - 0.5) + gy * (yy / h - 0.5)
    wall = wall + 3.0 * gaussian_filter(rng.standard_normal((h, w)), 6)
    bg = np.stack([wall, wall, wall], axis=-1)
    bg += rng.uniform(-6, 6, size=3)[None, None, :]

    for _ in range(clutter):
        bw = int(rng.uniform(0.05, 0.14) * w)
        bh = int(rng.uniform(0.15, 0.5) * h)
        x0 = rng.integers(0, max(1, w - bw))
        y0 = rng.integers(0, max(1, h - bh))
        shade = rng.uniform(-20, 20)
        bg[y0 : y0 + bh, x0 : x0 + bw] += shade
    return np.clip(np.rint(bg), 0, 255).astype(np.uint8)
