"""Simulated screen-to-camera optical channel.

Places an encoded screen frame into a larger camera scene through a
pinhole-model homography (viewing distance and yaw angle), composites it
over a background, applies photometric distortion (gain, blur, additive
Gaussian noise, 8-bit quantization, in that order), generates the
camera's temporal sampling including transition frames, and injects
controlled screen-coordinate perturbations for robustness studies.

The geometric calibration is a single constant: at distance 1.0 the
screen spans ``fill_frac`` of the scene width.  Distances scale inversely
(pinhole), the yaw angle tilts the screen plane about its vertical axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy.ndimage import gaussian_filter

from .warp import apply_homography, homography_from_points, rect_corners, warp_image

SHIFT = "SHIFT"
EXPAND = "EXPAND"
SHRINK = "SHRINK"
ROTATE = "ROTATE"
PERTURBATION_KINDS = (SHIFT, EXPAND, SHRINK, ROTATE)


@dataclass(frozen=True)
class ScreenQuad:
    """Four sub-pixel screen corners in camera coordinates: TL, TR, BR, BL."""

    corners: tuple[tuple[float, float], ...]

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "ScreenQuad":
        arr = np.asarray(arr, dtype=np.float64)
        if arr.shape != (4, 2):
            raise ValueError("a quad needs exactly four 2-D corners")
        return cls(corners=tuple((float(x), float(y)) for x, y in arr))

    def array(self) -> np.ndarray:
        return np.asarray(self.corners, dtype=np.float64)

    def centroid(self) -> np.ndarray:
        return self.array().mean(axis=0)

    def area(self) -> float:
        pts = self.array()
        x, y = pts[:, 0], pts[:, 1]
        return 0.5 * abs(
            float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))
        )

    def is_convex(self) -> bool:
        pts = self.array()
        cross = []
        for i in range(4):
            a = pts[(i + 1) % 4] - pts[i]
            b = pts[(i + 2) % 4] - pts[(i + 1) % 4]
            cross.append(a[0] * b[1] - a[1] * b[0])
        cross = np.asarray(cross)
        return bool(np.all(cross > 0) or np.all(cross < 0))

    def cell_size(self, rows: int, cols: int) -> tuple[float, float]:
        """Approximate (width, height) of one grid cell in camera pixels."""
        tl, tr, br, bl = self.array()
        width = 0.5 * (np.linalg.norm(tr - tl) + np.linalg.norm(br - bl))
        height = 0.5 * (np.linalg.norm(bl - tl) + np.linalg.norm(br - tr))
        return width / cols, height / rows


@dataclass(frozen=True)
class ChannelConfig:
    """Full parameterization of the simulated screen-camera channel."""

    display_rate: float = 60.0
    camera_rate: float = 120.0
    distance: float = 1.0
    angle_deg: float = 0.0
    scene_size: tuple[int, int] = (320, 240)  # (width, height)
    fill_frac: float = 0.60  # screen width / scene width at distance 1.0
    noise_sigma: float = 1.0
    blur_radius: float = 1.0
    gain: float = 1.0
    transition_blend: float = 0.5
    background: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    def with_(self, **kwargs) -> "ChannelConfig":
        return replace(self, **kwargs)


def screen_homography(
    screen_shape: tuple[int, int], config: ChannelConfig
) -> tuple[np.ndarray, ScreenQuad]:
    """Homography from screen pixel coords to scene coords, plus truth quad."""
    theta = math.radians(config.angle_deg)
    if abs(config.angle_deg) >= 90.0:
        raise ValueError("viewing angle must satisfy |theta| < 90 degrees")
    if config.distance <= 0:
        raise ValueError("distance must be positive")
    h_s, w_s = screen_shape[:2]
    scene_w, scene_h = config.scene_size
    focal = config.fill_frac * (scene_w - 1)

    src = rect_corners(w_s, h_s)
    # screen plane in physical units, width 1.0, centered at the origin
    aspect = (h_s - 1) / (w_s - 1)
    px = (src[:, 0] / (w_s - 1)) - 0.5
    py = ((src[:, 1] / (h_s - 1)) - 0.5) * aspect
    # yaw about the vertical axis, camera on +z at the configured distance
    xs = px * math.cos(theta)
    zs = config.distance + px * math.sin(theta)
    if np.any(zs <= 0):
        raise ValueError("screen crosses the camera plane at this geometry")
    us = focal * xs / zs + (scene_w - 1) / 2.0
    vs = focal * py / zs + (scene_h - 1) / 2.0
    dst = np.stack([us, vs], axis=1)
    quad = ScreenQuad.from_array(dst)
    return homography_from_points(src, dst), quad


def compose_scene(
    screen_frame: np.ndarray,
    config: ChannelConfig,
    rng: Optional[np.random.Generator] = None,
) -> tuple[np.ndarray, ScreenQuad]:
    """Project a screen frame into the scene and apply photometric distortion.

    Returns the quantized 8-bit camera frame and the ground-truth quad.
    """
    if screen_frame.size == 0:
        raise ValueError("screen frame is empty")
    scene_w, scene_h = config.scene_size
    h, quad = screen_homography(screen_frame.shape, config)

    if config.background is not None:
        bg = config.background
        if bg.shape[:2] != (scene_h, scene_w):
            raise ValueError("background does not match the scene size")
        scene = bg.astype(np.float64).copy()
    else:
        scene = np.full((scene_h, scene_w, 3), 96.0)

    # warp only the quad's bounding box; the rest of the scene is background
    pts = quad.array()
    x0 = max(0, int(np.floor(pts[:, 0].min())) - 1)
    y0 = max(0, int(np.floor(pts[:, 1].min())) - 1)
    x1 = min(scene_w, int(np.ceil(pts[:, 0].max())) + 2)
    y1 = min(scene_h, int(np.ceil(pts[:, 1].max())) + 2)
    if x1 > x0 and y1 > y0:
        shift = np.array([[1.0, 0.0, x0], [0.0, 1.0, y0], [0.0, 0.0, 1.0]])
        warped, valid = warp_image(
            screen_frame, np.linalg.inv(h) @ shift, x1 - x0, y1 - y0
        )
        region = scene[y0:y1, x0:x1]
        region[valid] = warped[valid]

    out = scene.astype(np.float32)
    if config.gain != 1.0:
        out *= np.float32(config.gain)
    if config.blur_radius > 0:
        out = gaussian_filter(out, sigma=(config.blur_radius, config.blur_radius, 0))
    if config.noise_sigma > 0:
        if rng is None:
            rng = np.random.default_rng()
        out += config.noise_sigma * rng.standard_normal(out.shape, dtype=np.float32)
    return np.clip(np.rint(out), 0, 255).astype(np.uint8), quad


def rate_ratio(config: ChannelConfig) -> int:
    """Camera samples per display frame; must be an integer >= 2."""
    k = config.camera_rate / config.display_rate
    if abs(k - round(k)) > 1e-9 or round(k) < 2:
        raise ValueError(
            f"camera rate must be an integer multiple (>= 2) of the display "
            f"rate, got ratio {k}"
        )
    return int(round(k))


def sample_camera_stream(
    display_frames: Sequence[np.ndarray], config: ChannelConfig
) -> list[np.ndarray]:
    """Temporal sampling of the display by the camera, before photometrics.

    For a rate ratio k each display frame yields k samples: k-1 aligned
    copies followed by one transition sample blending into the next
    display frame (exposure straddling the refresh).  The blend weight is
    ``transition_blend`` (0.5 models a mid-refresh exposure).
    """
    k = rate_ratio(config)
    w = config.transition_blend
    out: list[np.ndarray] = []
    n = len(display_frames)
    for i, frame in enumerate(display_frames):
        for _ in range(k - 1):
            out.append(frame)
        nxt = display_frames[i + 1] if i + 1 < n else frame
        blend = (1.0 - w) * frame.astype(np.float64) + w * nxt.astype(np.float64)
        out.append(np.clip(np.rint(blend), 0, 255).astype(np.uint8))
    return out


@dataclass(frozen=True)
class Perturbation:
    """Controlled screen-coordinate error, magnitude in fractions of a cell.

    direction fixes the sign of SHIFT per axis (and the turn direction of
    ROTATE through its first component), making perturbations
    deterministic.
    """

    kind: str
    magnitude: float
    direction: tuple[float, float] = (1.0, 1.0)

    def __post_init__(self) -> None:
        if self.kind not in PERTURBATION_KINDS:
            raise ValueError(f"unknown perturbation kind {self.kind!r}")
        if self.magnitude < 0:
            raise ValueError("magnitude must be non-negative")


def _offset_edges(pts: np.ndarray, dx: float, dy: float) -> np.ndarray:
    """Move each quad edge along its outward normal; dx for the vertical
    edges, dy for the horizontal ones.  New corners are intersections of
    adjacent offset lines, so equal inward/outward offsets cancel exactly."""
    center = pts.mean(axis=0)
    lines = []
    for i in range(4):
        a, b = pts[i], pts[(i + 1) % 4]
        t = b - a
        normal = np.array([t[1], -t[0]])
        normal /= np.linalg.norm(normal)
        if np.dot(normal, a - center) < 0:
            normal = -normal
        # horizontal-ish edges move by dy, vertical-ish by dx
        amount = dy if abs(normal[1]) >= abs(normal[0]) else dx
        lines.append((a + normal * amount, b + normal * amount))
    out = np.zeros((4, 2))
    for i in range(4):
        (a1, b1) = lines[(i - 1) % 4]
        (a2, b2) = lines[i]
        out[i] = _line_intersection(a1, b1, a2, b2)
    return out


def _line_intersection(a1, b1, a2, b2) -> np.ndarray:
    d1 = b1 - a1
    d2 = b2 - a2
    denom = d1[0] * d2[1] - d1[1] * d2[0]
    if abs(denom) < 1e-12:
        raise ValueError("degenerate quad: parallel adjacent edges")
    t = ((a2[0] - a1[0]) * d2[1] - (a2[1] - a1[1]) * d2[0]) / denom
    return a1 + t * d1


def perturb_quad(
    truth: ScreenQuad, p: Perturbation, rows: int, cols: int
) -> ScreenQuad:
    """Apply a SHIFT / EXPAND / SHRINK / ROTATE error to a truth quad."""
    if p.magnitude >= 1.0:
        raise ValueError("perturbation magnitude must be below one cell")
    pts = truth.array()
    cell_w, cell_h = truth.cell_size(rows, cols)
    if p.kind == SHIFT:
        dx = p.magnitude * cell_w * math.copysign(1.0, p.direction[0])
        dy = p.magnitude * cell_h * math.copysign(1.0, p.direction[1])
        return ScreenQuad.from_array(pts + np.array([dx, dy]))
    if p.kind in (EXPAND, SHRINK):
        sign = 1.0 if p.kind == EXPAND else -1.0
        return ScreenQuad.from_array(
            _offset_edges(pts, sign * p.magnitude * cell_w, sign * p.magnitude * cell_h)
        )
    # ROTATE about the centroid; the farthest corner moves by magnitude*cell
    center = truth.centroid()
    radii = np.linalg.norm(pts - center, axis=1)
    r_max = float(radii.max())
    cell = 0.5 * (cell_w + cell_h)
    ratio = min(1.0, p.magnitude * cell / (2.0 * r_max))
    angle = 2.0 * math.asin(ratio) * math.copysign(1.0, p.direction[0])
    c, s = math.cos(angle), math.sin(angle)
    rot = np.array([[c, -s], [s, c]])
    return ScreenQuad.from_array((pts - center) @ rot.T + center)
