"""Spatial embedding and extraction of frame bits.

Maps an M x N bit grid onto an image and applies opposing Blue-channel
intensity modulation across a Manchester frame pair (F+, F-): bit 1 adds
+delta to Blue in F+ and -delta in F-, bit 0 flips the signs.  The
classical decoder inverts this per cell from the mean Blue difference.

Frames are numpy uint8 arrays of shape (H, W, 3) in RGB channel order;
the Blue channel is index 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

BLUE = 2


@dataclass(frozen=True)
class GridGeometry:
    """Partition of a width x height image into an M x N cell grid.

    Cell size is width // cols by height // rows; remainder pixels from
    non-divisible dimensions join the last row/column of cells.
    """

    rows: int
    cols: int
    width: int
    height: int

    def __post_init__(self) -> None:
        if self.rows < 1 or self.cols < 1:
            raise ValueError("grid dimensions must be positive")
        if self.cell_height < 1 or self.cell_width < 1:
            raise ValueError(
                f"image {self.width}x{self.height} too small for a "
                f"{self.rows}x{self.cols} grid"
            )

    @property
    def cell_height(self) -> int:
        return self.height // self.rows

    @property
    def cell_width(self) -> int:
        return self.width // self.cols

    @classmethod
    def for_frame(cls, rows: int, cols: int, frame: np.ndarray) -> "GridGeometry":
        h, w = frame.shape[:2]
        return cls(rows=rows, cols=cols, width=w, height=h)

    def row_of(self) -> np.ndarray:
        """Cell row index for every pixel row."""
        return np.minimum(np.arange(self.height) // self.cell_height, self.rows - 1)

    def col_of(self) -> np.ndarray:
        return np.minimum(np.arange(self.width) // self.cell_width, self.cols - 1)

    def row_edges(self) -> np.ndarray:
        return np.arange(self.rows) * self.cell_height

    def col_edges(self) -> np.ndarray:
        return np.arange(self.cols) * self.cell_width


@dataclass(frozen=True)
class ModulationPlan:
    """Per-cell Blue modulation amplitude rule.

    mode "fixed" always uses ``delta``.  mode "mix" uses ``bright_delta``
    for cells whose mean input Blue exceeds ``threshold`` and
    ``dark_delta`` otherwise (brighter content masks flicker better, so
    it gets the smaller step).
    """

    mode: str = "mix"
    delta: int = 2
    dark_delta: int = 3
    bright_delta: int = 2
    threshold: float = 30.0

    def __post_init__(self) -> None:
        if self.mode not in ("fixed", "mix"):
            raise ValueError(f"unknown modulation mode {self.mode!r}")
        for d in (self.delta, self.dark_delta, self.bright_delta):
            if d not in (1, 2, 3):
                raise ValueError("delta must be 1, 2 or 3")

    def cell_deltas(self, blue_means: np.ndarray) -> np.ndarray:
        if self.mode == "fixed":
            return np.full_like(blue_means, float(self.delta))
        return np.where(blue_means > self.threshold, self.bright_delta, self.dark_delta)


def fixed_plan(delta: int) -> ModulationPlan:
    return ModulationPlan(mode="fixed", delta=delta)


MIX_PLAN = ModulationPlan(mode="mix")


def cell_means(channel: np.ndarray, geom: GridGeometry) -> np.ndarray:
    """Mean of a single channel over every grid cell, shape (rows, cols)."""
    if channel.shape != (geom.height, geom.width):
        raise ValueError("channel dimensions do not match geometry")
    sums = np.add.reduceat(
        np.add.reduceat(channel.astype(np.float64), geom.row_edges(), axis=0),
        geom.col_edges(),
        axis=1,
    )
    rows = np.diff(np.append(geom.row_edges(), geom.height))
    cols = np.diff(np.append(geom.col_edges(), geom.width))
    return sums / (rows[:, None] * cols[None, :])


def embed_pair(
    image: np.ndarray,
    bits,
    geom: GridGeometry,
    plan: ModulationPlan = MIX_PLAN,
) -> tuple[np.ndarray, np.ndarray]:
    """Embed M*N bits into an image, returning the (F+, F-) frame pair.

    Only the Blue channel changes; outputs are clamped to [0, 255].  Bits
    map to cells in row-major order from the top-left.
    """
    bits = np.asarray(bits, dtype=np.int64).ravel()
    if bits.size != geom.rows * geom.cols:
        raise ValueError(
            f"got {bits.size} bits for a {geom.rows}x{geom.cols} grid"
        )
    if image.shape[:2] != (geom.height, geom.width):
        raise ValueError("image dimensions do not match geometry")
    signs = np.where(bits.reshape(geom.rows, geom.cols) == 1, 1, -1)
    blue = image[:, :, BLUE]
    deltas = plan.cell_deltas(cell_means(blue, geom))
    step = (signs * deltas)[np.ix_(geom.row_of(), geom.col_of())]

    f_plus = image.copy()
    f_minus = image.copy()
    b = blue.astype(np.int16)
    f_plus[:, :, BLUE] = np.clip(b + step, 0, 255).astype(np.uint8)
    f_minus[:, :, BLUE] = np.clip(b - step, 0, 255).astype(np.uint8)
    return f_plus, f_minus


def classical_decode(f_plus: np.ndarray, f_minus: np.ndarray, geom: GridGeometry) -> np.ndarray:
    """Per-cell baseline decoder: bit = 1 iff mean Blue(F+) - mean Blue(F-) > 0.

    Accepts uint8 frames or float arrays (e.g. sub-pixel unwarped views);
    ties resolve to 0.  Returns a flat uint8 bit vector of length M*N.
    """
    bp = f_plus[:, :, BLUE] if f_plus.ndim == 3 else f_plus
    bm = f_minus[:, :, BLUE] if f_minus.ndim == 3 else f_minus
    if bp.shape != bm.shape:
        raise ValueError("frame dimensions differ")
    diff = cell_means(bp.astype(np.float64) - bm.astype(np.float64), geom)
    return (diff > 0).astype(np.uint8).ravel()


def psnr(original: np.ndarray, modified: np.ndarray) -> float:
    """Peak signal-to-noise ratio in dB for 8-bit frames.

    MSE is averaged over all pixels and all channels; identical frames
    return +inf.
    """
    if original.shape != modified.shape:
        raise ValueError("frame dimensions differ")
    diff = original.astype(np.float64) - modified.astype(np.float64)
    mse = float(np.mean(diff * diff))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(255.0**2 / mse)
