"""Screen localization and normalization.

Pipeline: a pluggable per-pixel segmenter produces a screen-probability
map; the map is dilated by a uniform kernel and thresholded; the largest
plausible connected component is simplified to a quadrilateral; the quad
is warped to a square frontal view by a bilinear perspective transform.

The default segmenter targets synthetic scenes from the channel
simulator: it scores pixels by color distance to a border-estimated
background model combined with local luminance activity.  A learned
segmenter can be slotted in through the same callable interface.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import cv2
import numpy as np
from scipy.ndimage import maximum_filter, minimum_filter, uniform_filter
from shapely.geometry import Polygon

from .channelsim import ScreenQuad
from .warp import homography_from_points, rect_corners, warp_image

NORMALIZED_SIDE = 299
MIN_AREA_FRAC = 0.01

# A segmenter maps an (H, W, 3) frame to an (H, W) probability map in [0, 1].
Segmenter = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ExtractionResult:
    quad: ScreenQuad
    normalized: np.ndarray  # (side, side, 3) uint8


class ContrastSegmenter:
    """Background-model segmenter for composited scenes.

    The background color is estimated from the frame border band; a color
    term ramps with each pixel's distance from that model, and an activity
    term fires on local luminance texture (screen content is textured,
    walls are flat).  The activity term is eroded by its own analysis
    window so texture cannot leak past the screen border, then re-dilated
    one pixel; thin activity ridges (object edges in the background) are
    wiped out by the erosion.
    """

    def __init__(
        self,
        low: float = 0.05,
        high: float = 0.15,
        act_low: float = 2.0,
        act_high: float = 5.0,
        act_window: int = 7,
        border_frac: float = 0.02,
    ) -> None:
        self.low = low
        self.high = high
        self.act_low = act_low
        self.act_high = act_high
        self.act_window = act_window
        self.border_frac = border_frac

    def __call__(self, frame: np.ndarray) -> np.ndarray:
        img = frame.astype(np.float64)
        h, w = img.shape[:2]
        band = max(2, int(round(self.border_frac * min(h, w))))
        border = np.concatenate(
            [
                img[:band].reshape(-1, 3),
                img[-band:].reshape(-1, 3),
                img[:, :band].reshape(-1, 3),
                img[:, -band:].reshape(-1, 3),
            ]
        )
        bg = np.median(border, axis=0)
        dist = np.linalg.norm(img - bg, axis=2) / (255.0 * np.sqrt(3.0))
        color_term = np.clip((dist - self.low) / (self.high - self.low), 0.0, 1.0)

        luma = img.mean(axis=2)
        local_mean = uniform_filter(luma, size=self.act_window)
        local_sq = uniform_filter(luma * luma, size=self.act_window)
        act = np.sqrt(np.maximum(local_sq - local_mean**2, 0.0))
        act_term = np.clip((act - self.act_low) / (self.act_high - self.act_low), 0.0, 1.0)
        act_term = minimum_filter(act_term, size=self.act_window)
        act_term = maximum_filter(act_term, size=3)

        return np.maximum(color_term, act_term)


class ChromaKeySegmenter:
    """Segmenter keyed to a known composited background image or color."""

    def __init__(self, background: np.ndarray, low: float = 0.03, high: float = 0.20):
        self.background = background.astype(np.float64)
        self.low = low
        self.high = high

    def __call__(self, frame: np.ndarray) -> np.ndarray:
        dist = np.linalg.norm(frame.astype(np.float64) - self.background, axis=2)
        dist /= 255.0 * np.sqrt(3.0)
        return np.clip((dist - self.low) / (self.high - self.low), 0.0, 1.0)


def segment_default(frame: np.ndarray) -> np.ndarray:
    """Default deterministic segmenter for synthetic scenes."""
    return ContrastSegmenter()(frame)


def smooth_threshold(
    prob_map: np.ndarray, kernel: int = 2, threshold: float = 0.5
) -> np.ndarray:
    """Dilate a probability map by a uniform K x K kernel, then binarize."""
    if kernel not in (1, 2, 3):
        raise ValueError("kernel size must be 1, 2 or 3")
    if kernel > 1:
        prob_map = maximum_filter(prob_map, size=kernel)
    return prob_map >= threshold


def localize_quad(
    mask: np.ndarray, min_area_frac: float = MIN_AREA_FRAC
) -> Optional[ScreenQuad]:
    """Fit a quadrilateral to the largest connected mask component.

    The component contour is convex-hulled and simplified with decreasing
    tolerance until exactly four vertices remain; components smaller than
    ``min_area_frac`` of the frame are rejected.  Returns None when no
    screen-like component exists.
    """
    mask_u8 = mask.astype(np.uint8)
    contours, _ = cv2.findContours(mask_u8, cv2.RETR_EXTERNAL, cv2.CHAIN_APPROX_SIMPLE)
    if not contours:
        return None
    contour = max(contours, key=cv2.contourArea)
    if cv2.contourArea(contour) < min_area_frac * mask.size:
        return None
    hull = cv2.convexHull(contour)
    peri = cv2.arcLength(hull, True)
    corners = None
    eps = 0.20
    while eps > 0.002:
        approx = cv2.approxPolyDP(hull, eps * peri, True)
        if len(approx) == 4:
            corners = approx.reshape(4, 2).astype(np.float64)
            break
        if len(approx) > 4:
            break
        eps *= 0.75
    if corners is None:
        corners = cv2.boxPoints(cv2.minAreaRect(contour)).astype(np.float64)
    corners = order_corners(corners)
    corners = _refine_corners(corners, hull.reshape(-1, 2).astype(np.float64))
    return ScreenQuad.from_array(corners)


def _refine_corners(corners: np.ndarray, hull_pts: np.ndarray) -> np.ndarray:
    """Sub-pixel corner refinement: fit a line to the hull points backing
    each quad edge (corner neighborhoods excluded) and intersect adjacent
    fits.  Falls back to the polygonal corners for under-supported edges."""
    lines = []
    for i in range(4):
        a, c = corners[i], corners[(i + 1) % 4]
        edge = c - a
        length = np.linalg.norm(edge)
        if length < 8:
            lines.append(None)
            continue
        direction = edge / length
        rel = hull_pts - a
        along = rel @ direction
        dist = np.abs(rel @ np.array([-direction[1], direction[0]]))
        sel = (along > 0.15 * length) & (along < 0.85 * length) & (dist < 3.0)
        pts = hull_pts[sel]
        if len(pts) < 2:
            lines.append(None)
            continue
        mean = pts.mean(axis=0)
        # principal direction of the supporting points (total least squares)
        _, _, vt = np.linalg.svd(pts - mean)
        lines.append((mean, vt[0]))
    refined = corners.copy()
    for i in range(4):
        l1 = lines[(i - 1) % 4]
        l2 = lines[i]
        if l1 is None or l2 is None:
            continue
        (p1, d1), (p2, d2) = l1, l2
        denom = d1[0] * d2[1] - d1[1] * d2[0]
        if abs(denom) < 1e-9:
            continue
        t = ((p2[0] - p1[0]) * d2[1] - (p2[1] - p1[1]) * d2[0]) / denom
        cand = p1 + t * d1
        if np.linalg.norm(cand - corners[i]) < 5.0:
            refined[i] = cand
    return refined


def order_corners(points: np.ndarray) -> np.ndarray:
    """Canonicalize four corners to TL, TR, BR, BL order."""
    pts = np.asarray(points, dtype=np.float64)
    center = pts.mean(axis=0)
    angles = np.arctan2(pts[:, 1] - center[1], pts[:, 0] - center[0])
    # sort counter... clockwise in image coords starting from the upper-left
    order = np.argsort(angles)
    pts = pts[order]
    sums = pts.sum(axis=1)
    start = int(np.argmin(sums))
    return np.roll(pts, -start, axis=0)


def quad_to_square_homography(quad: ScreenQuad, side: int) -> np.ndarray:
    return homography_from_points(quad.array(), rect_corners(side, side))


def unwarp(frame: np.ndarray, quad: ScreenQuad, side: int = NORMALIZED_SIDE) -> np.ndarray:
    """Warp the quad region to a side x side frontal view (8-bit frame)."""
    out = unwarp_channel(frame, quad, side)
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def unwarp_channel(
    frame: np.ndarray, quad: ScreenQuad, side: int = NORMALIZED_SIDE
) -> np.ndarray:
    """Float-precision unwarp of a frame or single channel."""
    if not quad.is_convex() or quad.area() <= 0:
        raise ValueError("cannot unwarp a degenerate quad")
    h = quad_to_square_homography(quad, side)
    out, _ = warp_image(np.asarray(frame, dtype=np.float64), np.linalg.inv(h), side, side)
    return out


def extract(
    frame: np.ndarray,
    segmenter: Segmenter = segment_default,
    kernel: int = 2,
    threshold: float = 0.5,
    side: int = NORMALIZED_SIDE,
) -> Optional[ExtractionResult]:
    """Full pipeline: segment, smooth + threshold, localize, unwarp."""
    mask = smooth_threshold(segmenter(frame), kernel, threshold)
    quad = localize_quad(mask)
    if quad is None:
        return None
    return ExtractionResult(quad=quad, normalized=unwarp(frame, quad, side))


def iou_ioc(pred: ScreenQuad, truth: ScreenQuad) -> tuple[float, float]:
    """Intersection-over-union and intersection-over-correct-area."""
    p = Polygon(pred.array()).buffer(0)
    t = Polygon(truth.array()).buffer(0)
    if not p.is_valid or not t.is_valid or t.area == 0:
        raise ValueError("invalid quad")
    inter = p.intersection(t).area
    union = p.union(t).area
    return inter / union if union > 0 else 0.0, inter / t.area


def detect_landmark(
    frame: np.ndarray, red_min: float = 180.0, other_max: float = 60.0
) -> bool:
    """True iff the frame is an all-red landmark (training phase marker)."""
    mean = frame.reshape(-1, frame.shape[-1]).mean(axis=0)
    return bool(mean[0] > red_min and mean[1] < other_max and mean[2] < other_max)
