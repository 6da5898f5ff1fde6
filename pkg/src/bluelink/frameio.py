"""Frame file I/O.

Frames travel as lossless 8-bit RGB PNGs (via Pillow) or as raw planar
byte files for toolchain-free exchange.  Raw layout: 12-byte header
(magic b"BLRW", uint32 LE width, uint32 LE height) followed by the three
channel planes R, G, B, each height*width bytes row-major.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
from PIL import Image

RAW_MAGIC = b"BLRW"


def load_frame(path: str | Path) -> np.ndarray:
    path = Path(path)
    if path.suffix == ".raw":
        return load_frame_raw(path)
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8)


def save_frame(path: str | Path, frame: np.ndarray) -> None:
    path = Path(path)
    frame = np.asarray(frame, dtype=np.uint8)
    if frame.ndim != 3 or frame.shape[2] != 3:
        raise ValueError("expected an (H, W, 3) RGB frame")
    if path.suffix == ".raw":
        save_frame_raw(path, frame)
    else:
        Image.fromarray(frame, mode="RGB").save(path)


def load_frame_raw(path: str | Path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < 12 or data[:4] != RAW_MAGIC:
        raise ValueError(f"{path}: not a raw planar frame file")
    w, h = struct.unpack("<II", data[4:12])
    expected = 12 + 3 * w * h
    if len(data) != expected:
        raise ValueError(f"{path}: expected {expected} bytes, got {len(data)}")
    planes = np.frombuffer(data, dtype=np.uint8, offset=12).reshape(3, h, w)
    return np.ascontiguousarray(planes.transpose(1, 2, 0))


def save_frame_raw(path: str | Path, frame: np.ndarray) -> None:
    h, w = frame.shape[:2]
    with open(path, "wb") as fh:
        fh.write(RAW_MAGIC)
        fh.write(struct.pack("<II", w, h))
        fh.write(np.ascontiguousarray(frame.transpose(2, 0, 1)).tobytes())
