"""Frame, CSV and config file helpers."""
from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .control import ControlEvent
from .front import FrontMetrics

METRIC_COLUMNS = ("t", "mean_z", "planarity", "coverage", "mean_c_y", "cbar", "total_current")
EVENT_COLUMNS = ("t_j", "line_index", "d_j", "d_set", "cbar", "current_per_cell")


def frame_pixels(V: np.ndarray) -> np.ndarray:
    """8-bit grey levels; V mapped linearly from [min(0, Vmin), max(1, Vmax)] to [0, 255].

    The result has shape ``(Nx, Ny)`` so that y runs along image rows.
    """
    lo = min(0.0, float(V.min()))
    hi = max(1.0, float(V.max()))
    return np.rint((V - lo) / (hi - lo) * 255.0).astype(np.uint8)


def emit_frame(V: np.ndarray, path) -> Path:
    """Write V as a binary PGM (P5) image, Ny pixels wide and Nx pixels high."""
    pix = frame_pixels(np.asarray(V, dtype=float))
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (pix.shape[1], pix.shape[0]))
        fh.write(pix.tobytes())
    return path


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    parts = data.split(maxsplit=4)
    if parts[0] != b"P5":
        raise ValueError("not a binary PGM file")
    w, h = int(parts[1]), int(parts[2])
    return np.frombuffer(parts[4][:w * h], dtype=np.uint8).reshape(h, w)


def _fmt(v) -> str:
    if v is None or (isinstance(v, float) and not math.isfinite(v)):
        return ""
    return repr(float(v)) if isinstance(v, float) else str(v)


def emit_metrics(rows: Iterable[tuple[FrontMetrics, float, float]], path) -> Path:
    """CSV of front metrics; each row is ``(metrics, cbar, total_current)``.

    Missing values (no front) are written as empty fields.
    """
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRIC_COLUMNS)
        for m, cbar, total in rows:
            w.writerow([_fmt(m.t), _fmt(m.mean_z), _fmt(m.planarity), _fmt(m.coverage),
                        _fmt(m.c_y), _fmt(cbar), _fmt(total)])
    return path


def emit_events(events: Sequence[ControlEvent], path) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EVENT_COLUMNS)
        for e in events:
            w.writerow([_fmt(e.t), e.line_index, _fmt(e.d), _fmt(e.d_set), _fmt(e.cbar),
                        _fmt(e.current)])
    return path


def read_events(path) -> list[dict]:
    with open(path, newline="") as fh:
        return [{k: float(v) for k, v in row.items()} for row in csv.DictReader(fh)]


def parse_config(text: str) -> dict[str, str]:
    """Flat ``section.key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ValueError(f"line {lineno}: empty key")
        out[key] = value
    return out


def format_config(values: dict) -> str:
    return "".join(f"{k} = {_fmt(v) if isinstance(v, float) else v}\n" for k, v in values.items())
