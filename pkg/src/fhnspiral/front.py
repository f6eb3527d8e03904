"""Front-line extraction, planarity metrics and wave-state classification."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .grid import BoundarySpec, Grid2D

PLANAR = "planar"
BROKEN = "broken"
SPIRAL = "spiral"

ASCENDING = "ascending"
DESCENDING = "descending"


class EmptyFrontError(ValueError):
    """No column carries a front."""


@dataclass
class FrontLine:
    z: np.ndarray
    valid: np.ndarray
    t: float = 0.0
    period: float | None = None  # L_y when y is periodic

    @property
    def coverage(self) -> float:
        return float(np.mean(self.valid))


@dataclass
class FrontMetrics:
    t: float
    planarity: float
    mean_z: float
    coverage: float
    c_y: float = float("nan")
    multi_fraction: float = 0.0
    dy: float = 1.0


def _wrap(d, period):
    return (d + 0.5 * period) % period - 0.5 * period


def _first_crossing(V: np.ndarray, theta: float, direction: str, start: np.ndarray | None):
    """Index j of the first crossing between samples j and j+1 along axis 1.

    ``start`` rotates each column so the scan begins there (periodic mode).
    Returns ``(j, valid, lo, hi)`` with lo/hi the bracketing values.
    """
    Nx, Ny = V.shape
    if start is not None:
        idx = (start[:, None] + np.arange(Ny)[None, :]) % Ny
        Vs = np.take_along_axis(V, idx, axis=1)
    else:
        Vs = V
    lo, hi = Vs[:, :-1], Vs[:, 1:]
    if direction == ASCENDING:
        hit = (lo < theta) & (hi >= theta)
    elif direction == DESCENDING:
        hit = (lo >= theta) & (hi < theta)
    else:
        raise ValueError(f"unknown front direction {direction!r}")
    valid = hit.any(axis=1)
    j = np.argmax(hit, axis=1)
    rows = np.arange(Nx)
    return j, valid, lo[rows, j], hi[rows, j]


def detect_front(g: Grid2D, theta: float = 0.5, direction: str = ASCENDING,
                 b: BoundarySpec = BoundarySpec(), columns=None) -> FrontLine:
    """Per-column y position where V crosses ``theta``, linearly interpolated.

    ``ascending`` means V increases through ``theta`` along +y.  With no-flux
    walls each column is scanned from y=0; on a periodic domain the scan starts
    at the column's minimum (ascending) or maximum (descending) of V and wraps.
    ``columns`` restricts detection to a subset of x indices.
    """
    if not 0.0 < theta < 1.0:
        raise ValueError("theta must lie in (0, 1)")
    V = g.V if columns is None else g.V[np.atleast_1d(columns)]
    start = None
    if b.periodic:
        start = np.argmin(V, axis=1) if direction == ASCENDING else np.argmax(V, axis=1)
    j, valid, lo, hi = _first_crossing(V, theta, direction, start)
    with np.errstate(invalid="ignore", divide="ignore"):
        frac = np.where(valid, (theta - lo) / (hi - lo), 0.0)
    pos = j + frac if start is None else start + j + frac
    z = (pos + 0.5) * g.dy
    period = g.Ly if b.periodic else None
    if period is not None:
        z = z % period
    z = np.where(valid, z, np.nan)
    return FrontLine(z, valid, g.t, period)


def crossing_counts(g: Grid2D, theta: float = 0.5, b: BoundarySpec = BoundarySpec()):
    """Number of level-``theta`` crossings of V along y, per column."""
    above = g.V >= theta
    n = np.count_nonzero(above[:, 1:] != above[:, :-1], axis=1)
    if b.periodic:
        n = n + (above[:, 0] != above[:, -1])
    return n


def planarity(f: FrontLine) -> float:
    """Population standard deviation of the valid front positions."""
    z = f.z[f.valid]
    if z.size == 0:
        raise EmptyFrontError("front line has no valid column")
    if f.period is None:
        return float(np.std(z))
    return float(np.std(_wrap(z - _circular_mean(z, f.period), f.period)))


def _circular_mean(z, period):
    ang = 2.0 * np.pi * z / period
    return (np.arctan2(np.sin(ang).mean(), np.cos(ang).mean()) % (2.0 * np.pi)) * period / (2.0 * np.pi)


def mean_position(f: FrontLine) -> float:
    z = f.z[f.valid]
    if z.size == 0:
        raise EmptyFrontError("front line has no valid column")
    return float(z.mean()) if f.period is None else float(_circular_mean(z, f.period))


def front_velocity(f1: FrontLine, f0: FrontLine) -> np.ndarray:
    """Per-column speed ``(z1 - z0)/(t1 - t0)``; NaN where either front is missing."""
    dt = f1.t - f0.t
    if dt <= 0:
        raise ValueError("f1 must be later than f0")
    dz = f1.z - f0.z
    if f1.period is not None:
        dz = _wrap(dz, f1.period)
    return np.where(f1.valid & f0.valid, dz / dt, np.nan)


def measure(g: Grid2D, theta: float = 0.5, b: BoundarySpec = BoundarySpec(),
            previous: FrontLine | None = None) -> tuple[FrontMetrics, FrontLine]:
    """Snapshot metrics of ``g``; ``previous`` enables the mean velocity estimate."""
    f = detect_front(g, theta, ASCENDING, b)
    counts = crossing_counts(g, theta, b)
    if f.valid.any():
        plan, mz = planarity(f), mean_position(f)
    else:
        plan = mz = float("nan")
    c = float("nan")
    if previous is not None and previous.t < f.t:
        v = front_velocity(f, previous)
        if np.isfinite(v).any():
            c = float(np.nanmean(v))
    m = FrontMetrics(g.t, plan, mz, f.coverage, c, float(np.mean(counts > 2)), g.dy)
    return m, f


class MetricsObserver:
    """Callable for :func:`fhnspiral.grid.run` that records FrontMetrics."""

    def __init__(self, theta: float = 0.5, b: BoundarySpec = BoundarySpec()):
        self.theta = theta
        self.b = b
        self._last: FrontLine | None = None

    def __call__(self, g: Grid2D) -> FrontMetrics:
        m, self._last = measure(g, self.theta, self.b, self._last)
        return m


def classify_state(history: Sequence[FrontMetrics], window: int | None = None,
                   coverage_min: float = 0.95, planarity_max: float = 2.0,
                   spiral_fraction: float = 0.1) -> str:
    """Label the last ``window`` samples as planar, broken or spiral.

    spiral: more than two crossings in at least ``spiral_fraction`` of the
    columns at some sample.  planar: coverage above ``coverage_min`` and
    planarity below ``planarity_max * dy`` at every sample.  Anything else
    is broken.
    """
    hist = list(history)
    if window is not None:
        if window < 2:
            raise ValueError("window must hold at least two samples")
        hist = hist[-window:]
    if len(hist) < 2:
        raise ValueError("need at least two samples to classify")
    if any(m.multi_fraction >= spiral_fraction for m in hist):
        return SPIRAL
    if all(m.coverage > coverage_min and m.planarity < planarity_max * m.dy for m in hist):
        return PLANAR
    return BROKEN
