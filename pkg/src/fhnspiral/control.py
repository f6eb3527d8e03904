"""Event-driven point-sensor / point-actuator feedback.

When the front at the monitored sensor column passes the next trigger line,
the distance travelled since the previous trigger is compared with the
distance the set velocity would have covered.  The discrepancy ``cbar`` is
held until the next trigger and drives a current

    I = -k * slope_f * cbar / (dx * dy)

at every actuator cell (a unit-mass discrete delta per actuator).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .front import ASCENDING, FrontLine, detect_front
from .grid import BoundarySpec, Grid2D


@dataclass(frozen=True)
class SensorLayout:
    x_sensors: tuple[float, ...]
    y_lines: tuple[float, ...]
    monitor: int = 0  # index into x_sensors

    def __post_init__(self):
        object.__setattr__(self, "x_sensors", tuple(float(v) for v in self.x_sensors))
        object.__setattr__(self, "y_lines", tuple(float(v) for v in self.y_lines))
        if not self.x_sensors or not self.y_lines:
            raise ValueError("need at least one sensor column and one trigger line")
        if any(b <= a for a, b in zip(self.y_lines, self.y_lines[1:])):
            raise ValueError("trigger lines must be strictly increasing")
        if not 0 <= self.monitor < len(self.x_sensors):
            raise ValueError(f"monitor index {self.monitor} out of range")

    @property
    def monitor_x(self) -> float:
        return self.x_sensors[self.monitor]


@dataclass(frozen=True)
class ActuatorLayout:
    x_actuators: tuple[float, ...]
    y_actuators: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "x_actuators", tuple(float(v) for v in self.x_actuators))
        object.__setattr__(self, "y_actuators", tuple(float(v) for v in self.y_actuators))
        if not self.x_actuators or not self.y_actuators:
            raise ValueError("need at least one actuator position in each direction")

    @property
    def count(self) -> int:
        return len(self.x_actuators) * len(self.y_actuators)


def cell_index(pos, spacing: float, n: int):
    """Index of the cell containing ``pos`` (clipped to the grid)."""
    return np.clip(np.floor(np.asarray(pos, dtype=float) / spacing).astype(int), 0, n - 1)


def _check_inside(layout_values, L, what):
    for v in layout_values:
        if not 0.0 <= v <= L:
            raise ValueError(f"{what} position {v} outside [0, {L}]")


@dataclass(frozen=True)
class ControllerConfig:
    k: float = 0.001
    c_set: float = 0.5
    slope_f: float = (1.0 - 0.5) / math.sqrt(2.0)
    t_start: float = 10.0
    theta: float = 0.5
    poll_stride: int = 1
    rearm_distance: float = 20.0

    def __post_init__(self):
        if self.k <= 0 or self.c_set <= 0 or self.slope_f <= 0:
            raise ValueError("k, c_set and slope_f must be positive")
        if self.poll_stride < 1:
            raise ValueError("poll_stride must be >= 1")


@dataclass(frozen=True)
class ControllerState:
    last_crossing_time: float | None = None
    last_line_index: int | None = None
    cbar: float = 0.0
    triggered_count: int = 0
    prev_z: float | None = None
    prev_t: float | None = None
    front_missing: bool = False
    armed: bool = True


@dataclass(frozen=True)
class ControlEvent:
    t: float
    line_index: int
    d: float
    d_set: float
    cbar: float
    current: float


def _lines_crossed(z0, dz, lines, period):
    """Indices of lines inside the half-open travel interval (z0, z0+dz]."""
    hits = []
    for e, y in enumerate(lines):
        off = y - z0
        if period is not None:
            off %= period
        if 0.0 < off <= dz or (off == 0.0 and dz > 0 and period is None):
            hits.append((off, e))
    return hits


def poll(state: ControllerState, front: FrontLine, cfg: ControllerConfig,
         layout: SensorLayout, t: float, column: int = 0) -> tuple[ControllerState, ControlEvent | None]:
    """Advance the controller state with the front seen at time ``t``.

    ``column`` indexes the monitored sensor column inside ``front``.  Returns
    the new state and the trigger event, if one fired.
    """
    if state.prev_t is not None and t < state.prev_t:
        raise ValueError("poll times must be non-decreasing")
    if not front.valid[column]:
        return replace(state, prev_z=None, prev_t=t, front_missing=True), None
    z = float(front.z[column])
    moved = replace(state, prev_z=z, prev_t=t, front_missing=False)
    if state.prev_z is None or t < cfg.t_start:
        return moved, None
    if not state.armed:
        # re-arm only once the front is clearly past the last trigger line
        past = z - layout.y_lines[state.last_line_index]
        if front.period is not None:
            past %= front.period
            ok = cfg.rearm_distance <= past <= 0.5 * front.period
        else:
            ok = past >= cfg.rearm_distance
        return replace(moved, armed=ok), None
    dz = z - state.prev_z
    if front.period is not None:
        dz = (dz + 0.5 * front.period) % front.period - 0.5 * front.period
    if dz <= 0.0:
        return moved, None
    hits = _lines_crossed(state.prev_z, dz, layout.y_lines, front.period)
    if not hits:
        return moved, None
    off, e = max(hits)  # only the most recent line counts
    t_j = state.prev_t + (t - state.prev_t) * off / dz
    t_j = max(t_j, cfg.t_start)
    if state.last_crossing_time is None:
        # first trigger only arms the controller
        return replace(moved, last_crossing_time=t_j, last_line_index=e, armed=False,
                       triggered_count=state.triggered_count + 1), None
    y_prev = layout.y_lines[state.last_line_index]
    d = layout.y_lines[e] - y_prev
    if front.period is not None:
        d %= front.period
        if d == 0.0:
            d = front.period
    elif d <= 0.0:
        # a new wave on a walled domain: restart the measurement
        return replace(moved, last_crossing_time=t_j, last_line_index=e, armed=False,
                       triggered_count=state.triggered_count + 1), None
    d_set = cfg.c_set * (t_j - state.last_crossing_time)
    cbar = d - d_set
    new = replace(moved, last_crossing_time=t_j, last_line_index=e, cbar=cbar, armed=False,
                  triggered_count=state.triggered_count + 1)
    return new, ControlEvent(t_j, e, d, d_set, cbar, actuator_value(cbar, cfg))


def actuator_value(cbar: float, cfg: ControllerConfig, dx: float = 1.0, dy: float = 1.0) -> float:
    """Current injected into one actuator cell."""
    return -cfg.k * cfg.slope_f * cbar / (dx * dy)


def control_field(state: ControllerState, cfg: ControllerConfig, layout: ActuatorLayout,
                  shape: tuple[int, int], t: float, dx: float = 1.0, dy: float = 1.0) -> np.ndarray:
    """Current field: ``-k*slope_f*cbar/(dx*dy)`` on actuator cells, zero elsewhere."""
    Nx, Ny = shape
    I = np.zeros(shape)
    if t < cfg.t_start or state.cbar == 0.0:
        return I
    ix = cell_index(layout.x_actuators, dx, Nx)
    iy = cell_index(layout.y_actuators, dy, Ny)
    I[np.ix_(ix, iy)] = actuator_value(state.cbar, cfg, dx, dy)
    return I


class Controller:
    """Stateful wrapper used by :func:`fhnspiral.grid.run`.

    Only the monitored sensor column is examined at each poll.  Every trigger
    is appended to ``events``.
    """

    def __init__(self, cfg: ControllerConfig, sensors: SensorLayout,
                 actuators: ActuatorLayout, b: BoundarySpec = BoundarySpec()):
        self.cfg = cfg
        self.sensors = sensors
        self.actuators = actuators
        self.b = b
        self.state = ControllerState()
        self.events: list[ControlEvent] = []
        self.missing_polls = 0
        self._calls = 0
        self._cache: tuple[float, bool, np.ndarray] | None = None

    def validate(self, g: Grid2D, dt: float) -> None:
        _check_inside(self.sensors.x_sensors, g.Lx, "sensor x")
        _check_inside(self.sensors.y_lines, g.Ly, "trigger line")
        _check_inside(self.actuators.x_actuators, g.Lx, "actuator x")
        _check_inside(self.actuators.y_actuators, g.Ly, "actuator y")
        lines = self.sensors.y_lines
        spacing = min([b - a for a, b in zip(lines, lines[1:])] + [g.Ly])
        if dt * self.cfg.poll_stride * self.cfg.c_set > 0.1 * spacing:
            raise ValueError("poll interval too long for the trigger-line spacing")

    def update(self, g: Grid2D) -> ControlEvent | None:
        self._calls += 1
        if (self._calls - 1) % self.cfg.poll_stride:
            return None
        col = int(cell_index(self.sensors.monitor_x, g.dx, g.Nx))
        front = detect_front(g, self.cfg.theta, ASCENDING, self.b, columns=[col])
        self.state, event = poll(self.state, front, self.cfg, self.sensors, g.t, 0)
        if self.state.front_missing:
            self.missing_polls += 1
        if event is not None:
            event = replace(event, current=actuator_value(event.cbar, self.cfg, g.dx, g.dy))
            self.events.append(event)
        return event

    def field(self, g: Grid2D) -> np.ndarray | None:
        active = g.t >= self.cfg.t_start
        if not active or self.state.cbar == 0.0:
            return None
        key = (self.state.cbar, active)
        if self._cache is None or self._cache[:2] != key:
            I = control_field(self.state, self.cfg, self.actuators, g.V.shape, g.t, g.dx, g.dy)
            self._cache = (*key, I)
        return self._cache[2]

    def total_current(self, g: Grid2D) -> float:
        if g.t < self.cfg.t_start:
            return 0.0
        return actuator_value(self.state.cbar, self.cfg, g.dx, g.dy) * g.dx * g.dy * self.actuators.count


def _scaled(values: Sequence[float], scale: float) -> tuple[float, ...]:
    return tuple(v * scale for v in values)


REF_LX, REF_LY = 200.0, 400.0
SENSOR_ROW = 0.735


def idealized_layout(Lx: float = REF_LX, Ly: float = REF_LY):
    """Dense 100 x 200 actuator grid with 7 equally spaced sensors on y = 0.735 Ly."""
    sensors = SensorLayout(tuple(Lx * i / 8 for i in range(1, 8)), (SENSOR_ROW * Ly,), 0)
    actuators = ActuatorLayout(_scaled(range(1, 200, 2), Lx / REF_LX),
                               _scaled(range(1, 400, 2), Ly / REF_LY))
    return sensors, actuators


def _sparse(x_step: int, n_x: int, n_sensors: int, Lx: float, Ly: float):
    sensors = SensorLayout(tuple(Lx * i / (n_sensors + 1) for i in range(1, n_sensors + 1)),
                           (SENSOR_ROW * Ly,), 0)
    actuators = ActuatorLayout(_scaled([1 + x_step * i for i in range(n_x)], Lx / REF_LX),
                               _scaled(range(110, 261, 30), Ly / REF_LY))
    return sensors, actuators


def sparse_layout_fig4(Lx: float = REF_LX, Ly: float = REF_LY):
    """Two sensors at Lx/3, 2Lx/3; 25 x 6 actuators at x = 1, 5, ..., 97 and y = 110, ..., 260."""
    return _sparse(4, 25, 2, Lx, Ly)


def sparse_layout_fig5(Lx: float = REF_LX, Ly: float = REF_LY):
    """Two sensors; 50 x 6 actuators at x = 1, 3, ..., 99."""
    return _sparse(2, 50, 2, Lx, Ly)


def sparse_layout_fig8(Lx: float = REF_LX, Ly: float = REF_LY):
    """Five equidistant sensors; 50 x 6 actuators as in :func:`sparse_layout_fig5`."""
    return _sparse(2, 50, 5, Lx, Ly)
