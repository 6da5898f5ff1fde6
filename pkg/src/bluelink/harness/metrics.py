"""Decoding metrics and the experiment CSV schema.

FER is the fraction of transmitted data frames NOT correctly recovered;
BER is the raw (pre-correction) bit error rate.  Goodput counts only
payload bits; throughput counts every grid bit of recovered frames; raw
throughput scales the transmitted bit rate by the fraction of correct
raw bits.  Data frames ride on every second display frame (Manchester
pairs), so the data frame rate is half the display rate.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Optional, Sequence

from ..frameproto import FrameLayout

CSV_SCHEMA = "bluelink-metrics-v1"


def data_frame_rate(display_rate: float) -> float:
    return 0.5 * display_rate


def compute_goodput(layout: FrameLayout, display_rate: float, fer: float) -> float:
    """Correctly delivered payload bits per second, excluding all overhead."""
    if not 0.0 <= fer <= 1.0:
        raise ValueError("FER must be within [0, 1]")
    return layout.data_bits * data_frame_rate(display_rate) * (1.0 - fer)


def compute_throughput(layout: FrameLayout, display_rate: float, fer: float) -> float:
    """Grid bits per second carried by correctly recovered frames."""
    if not 0.0 <= fer <= 1.0:
        raise ValueError("FER must be within [0, 1]")
    return layout.total_bits * data_frame_rate(display_rate) * (1.0 - fer)


def compute_raw_throughput(layout: FrameLayout, display_rate: float, ber: float) -> float:
    """Transmitted bits per second scaled by the fraction decoded correctly
    before error correction."""
    if not 0.0 <= ber <= 1.0:
        raise ValueError("BER must be within [0, 1]")
    return layout.total_bits * data_frame_rate(display_rate) * (1.0 - ber)


@dataclass(frozen=True)
class MetricsRow:
    """One experiment condition's labels and measurements."""

    condition: str
    distance: float
    angle_deg: float
    noise_sigma: float
    mode: str
    delta: int
    parity_rate: float
    perturbation: str
    magnitude: float
    pairs: int
    fer: float
    ber: float
    goodput: float
    throughput: float
    raw_throughput: float
    psnr_db: float
    iou: float
    ioc: float
    corrected_symbols: int
    error: str = ""

    def validate(self) -> None:
        if not (0.0 <= self.fer <= 1.0 and 0.0 <= self.ber <= 1.0):
            raise ValueError("rates must be within [0, 1]")
        if self.goodput > self.throughput + 1e-9:
            raise ValueError("goodput cannot exceed throughput")


def rows_to_csv(rows: Sequence[MetricsRow]) -> str:
    names = [f.name for f in fields(MetricsRow)]
    lines = [f"# schema={CSV_SCHEMA}", ",".join(names)]
    for row in rows:
        vals = []
        for name in names:
            v = getattr(row, name)
            if isinstance(v, float):
                vals.append(f"{v:.6g}")
            else:
                vals.append(str(v))
        lines.append(",".join(vals))
    return "\n".join(lines) + "\n"


def rows_from_csv(text: str) -> list[dict]:
    lines = [l for l in text.strip().splitlines() if l and not l.startswith("#")]
    header = lines[0].split(",")
    out = []
    for line in lines[1:]:
        parts = line.split(",")
        row: dict = {}
        for key, val in zip(header, parts):
            try:
                row[key] = float(val) if val and key not in (
                    "condition", "mode", "perturbation", "error"
                ) else val
            except ValueError:
                row[key] = val
        out.append(row)
    return out
