"""Planar homography estimation and bilinear perspective warping.

Coordinates are pixel centers: pixel (row i, col j) samples at (x=j, y=i).
Homographies are 3x3 float64 matrices acting on homogeneous (x, y, 1).
"""

from __future__ import annotations

import numpy as np


def homography_from_points(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Exact homography mapping 4 source points onto 4 destination points."""
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    if src.shape != (4, 2) or dst.shape != (4, 2):
        raise ValueError("need exactly four 2-D points on each side")
    a = np.zeros((8, 8))
    b = np.zeros(8)
    for i, ((x, y), (u, v)) in enumerate(zip(src, dst)):
        a[2 * i] = [x, y, 1, 0, 0, 0, -u * x, -u * y]
        a[2 * i + 1] = [0, 0, 0, x, y, 1, -v * x, -v * y]
        b[2 * i] = u
        b[2 * i + 1] = v
    try:
        h = np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise ValueError("degenerate point configuration") from exc
    return np.append(h, 1.0).reshape(3, 3)


def apply_homography(h: np.ndarray, points: np.ndarray) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    ones = np.ones((*pts.shape[:-1], 1))
    proj = np.concatenate([pts, ones], axis=-1) @ h.T
    return proj[..., :2] / proj[..., 2:3]


def rect_corners(width: int, height: int) -> np.ndarray:
    """Pixel-center corners of a width x height image: TL, TR, BR, BL."""
    return np.array(
        [[0, 0], [width - 1, 0], [width - 1, height - 1], [0, height - 1]],
        dtype=np.float64,
    )


def bilinear_sample(channel: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sample a 2-D array at float positions; returns (values, validity mask).

    Positions outside the pixel-center bounds are invalid and sample as 0.
    """
    h, w = channel.shape
    valid = (xs >= 0) & (xs <= w - 1) & (ys >= 0) & (ys <= h - 1)
    x = np.clip(xs, 0, w - 1)
    y = np.clip(ys, 0, h - 1)
    x0 = np.floor(x).astype(np.intp)
    y0 = np.floor(y).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = x - x0
    fy = y - y0
    c = channel.astype(np.float64)
    top = c[y0, x0] * (1 - fx) + c[y0, x1] * fx
    bot = c[y1, x0] * (1 - fx) + c[y1, x1] * fx
    out = top * (1 - fy) + bot * fy
    out[~valid] = 0.0
    return out, valid


def warp_image(
    image: np.ndarray,
    h_inv: np.ndarray,
    out_width: int,
    out_height: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Inverse-map warp: output pixel p samples image at h_inv @ p.

    Returns float64 output of shape (out_height, out_width[, C]) and the
    per-pixel validity mask.
    """
    ys, xs = np.mgrid[0:out_height, 0:out_width]
    src = apply_homography(h_inv, np.stack([xs, ys], axis=-1).reshape(-1, 2))
    sx = src[:, 0].reshape(out_height, out_width)
    sy = src[:, 1].reshape(out_height, out_width)
    if image.ndim == 2:
        out, valid = bilinear_sample(image, sx, sy)
        return out, valid
    chans = []
    valid = None
    for k in range(image.shape[2]):
        v, valid = bilinear_sample(image[:, :, k], sx, sy)
        chans.append(v)
    return np.stack(chans, axis=-1), valid
