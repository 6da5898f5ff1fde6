"""Turn metric CSVs into plain x/y plot-data series (rendering is external)."""

from __future__ import annotations

from collections import defaultdict
from pathlib import Path
from typing import Sequence

from .metrics import rows_from_csv


def make_series(
    rows: Sequence[dict], x_key: str, y_key: str, group_key: str = ""
) -> dict[str, list[tuple[float, float]]]:
    """Group rows and sort each group's (x, y) points by x."""
    series: dict[str, list[tuple[float, float]]] = defaultdict(list)
    for row in rows:
        if row.get("error"):
            continue
        label = str(row.get(group_key, "")) if group_key else "all"
        try:
            x = float(row[x_key])
            y = float(row[y_key])
        except (KeyError, TypeError, ValueError):
            continue
        series[label or "all"].append((x, y))
    return {k: sorted(v) for k, v in series.items()}


def series_to_csv(series: dict[str, list[tuple[float, float]]], x_key: str, y_key: str) -> str:
    lines = ["# schema=bluelink-series-v1", f"series,{x_key},{y_key}"]
    for label in sorted(series):
        for x, y in series[label]:
            lines.append(f"{label},{x:.6g},{y:.6g}")
    return "\n".join(lines) + "\n"


DEFAULT_SERIES = (
    ("distance", "fer", "condition"),
    ("distance", "goodput", "condition"),
    ("magnitude", "fer", "perturbation"),
    ("magnitude", "ber", "perturbation"),
    ("angle_deg", "fer", "condition"),
)


def write_report(metrics_csv: Path, out_dir: Path) -> list[Path]:
    """Emit the default plot-data bundle next to the metrics file."""
    rows = rows_from_csv(metrics_csv.read_text())
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for x_key, y_key, group in DEFAULT_SERIES:
        series = make_series(rows, x_key, y_key, group)
        series = {k: v for k, v in series.items() if len(v) > 1 or (k not in ("", "all"))}
        if not any(series.values()):
            continue
        path = out_dir / f"series_{y_key}_vs_{x_key}.csv"
        path.write_text(series_to_csv(series, x_key, y_key))
        written.append(path)
    return written
