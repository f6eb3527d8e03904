"""Figure presets, the end-to-end run pipeline and the stability report."""
from __future__ import annotations

import dataclasses
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import control as ctl
from . import stability as st
from .front import PLANAR, FrontMetrics, MetricsObserver, classify_state
from .grid import (PERIODIC, BoundarySpec, Grid2D, SimConfig, break_wave, init_pulse_seed,
                   make_torus_single_wave, run)
from .io import emit_events, emit_frame, emit_metrics, format_config
from .model import HeterogeneityPatch, ModelParams

LAYOUTS = {
    "idealized": ctl.idealized_layout,
    "fig4": ctl.sparse_layout_fig4,
    "fig5": ctl.sparse_layout_fig5,
    "fig8": ctl.sparse_layout_fig8,
}

# dt of the reference runs; explicit Euler needs dt <= 0.25 at dx = dy = 1
REFERENCE_DT = 0.5


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PatchSpec:
    alpha: float = 0.21
    x_range: tuple[float, float] = (0.01, 0.5)
    y_range: tuple[float, float] = (0.275, 0.775)
    t_start: float = 1.0
    duration: float = 199.0

    def patch(self) -> HeterogeneityPatch:
        return HeterogeneityPatch(self.alpha, self.x_range, self.y_range,
                                  (self.t_start, self.t_start + self.duration))


@dataclass(frozen=True)
class ExperimentPreset:
    name: str
    model: ModelParams = ModelParams()
    Nx: int = 200
    Ny: int = 400
    dx: float = 1.0
    dy: float = 1.0
    sim: SimConfig = SimConfig(dt=0.2, t_end=1000.0, snapshot_stride=50)
    break_time: float | None = None
    layout: str | None = None
    monitor: int = 0
    controller: ctl.ControllerConfig | None = None
    patch: PatchSpec | None = None
    snapshot_every: float = 100.0
    metrics_every: float = 10.0
    classify_span: float = 200.0

    @property
    def snapshot_times(self) -> list[float]:
        n = int(math.floor(self.sim.t_end / self.snapshot_every + 1e-9))
        return [self.snapshot_every * i for i in range(1, n + 1)]

    def layouts(self):
        if self.layout is None:
            return None
        sensors, actuators = LAYOUTS[self.layout](self.Nx * self.dx, self.Ny * self.dy)
        return replace(sensors, monitor=self.monitor), actuators


def _ctrl(**kw):
    return ctl.ControllerConfig(k=0.001, c_set=0.5, t_start=10.0, **kw)


PRESETS: dict[str, ExperimentPreset] = {
    "fig1": ExperimentPreset("fig1", sim=SimConfig(0.2, 800.0, 50), snapshot_every=100.0),
    "fig2": ExperimentPreset("fig2", sim=SimConfig(0.2, 1000.0, 50), break_time=7.0,
                             snapshot_every=100.0),
    "fig3": ExperimentPreset("fig3", sim=SimConfig(0.2, 2000.0, 50), break_time=7.0,
                             layout="idealized", controller=_ctrl(), snapshot_every=200.0),
    "fig4": ExperimentPreset("fig4", sim=SimConfig(0.2, 3200.0, 50), break_time=7.0,
                             layout="fig4", controller=_ctrl(), snapshot_every=400.0),
    "fig5": ExperimentPreset("fig5", sim=SimConfig(0.2, 3200.0, 50), break_time=7.0,
                             layout="fig5", controller=_ctrl(), snapshot_every=400.0),
    "fig7": ExperimentPreset("fig7", sim=SimConfig(0.2, 1000.0, 50), patch=PatchSpec(),
                             snapshot_every=100.0),
    "fig8": ExperimentPreset("fig8", sim=SimConfig(0.2, 2000.0, 50), patch=PatchSpec(),
                             layout="fig8", controller=_ctrl(), snapshot_every=200.0),
}

# Reference values for each figure setup, checked by self_check().
REFERENCE_VALUES = {
    "all": {"Nx": 200, "Ny": 400, "dx": 1.0, "dy": 1.0, "eps": 0.01, "alpha": 0.1,
            "beta": 0.5, "gamma": 1.0, "delta": 0.0},
    "fig2": {"break_time": 7.0, "snapshot_every": 100.0},
    "fig3": {"k": 0.001, "c_set": 0.5, "t_start": 10.0, "sensors": 7, "sensor_row": 0.735,
             "actuators_x": 100, "actuators_y": 200, "snapshot_every": 200.0},
    "fig4": {"k": 0.001, "c_set": 0.5, "t_start": 10.0, "sensors": 2, "sensor_row": 0.735,
             "actuators_x": 25, "actuators_y": 6, "actuator_y_first": 110.0,
             "actuator_y_last": 260.0, "snapshot_every": 400.0},
    "fig5": {"k": 0.001, "c_set": 0.5, "t_start": 10.0, "sensors": 2, "sensor_row": 0.735,
             "actuators_x": 50, "actuators_y": 6, "actuator_y_first": 110.0,
             "actuator_y_last": 260.0, "snapshot_every": 400.0},
    "fig7": {"patch_alpha": 0.21, "patch_x": (0.01, 0.5), "patch_y": (0.275, 0.775),
             "snapshot_every": 100.0},
    "fig8": {"k": 0.001, "c_set": 0.5, "t_start": 10.0, "sensors": 5, "sensor_row": 0.735,
             "actuators_x": 50, "actuators_y": 6, "patch_alpha": 0.21,
             "patch_x": (0.01, 0.5), "patch_y": (0.275, 0.775), "snapshot_every": 200.0},
}


def preset_literals(p: ExperimentPreset) -> dict:
    """The figure-level quantities a preset resolves to."""
    out = {"Nx": p.Nx, "Ny": p.Ny, "dx": p.dx, "dy": p.dy,
           **{k: getattr(p.model, k) for k in ("eps", "alpha", "beta", "gamma", "delta")},
           "snapshot_every": p.snapshot_every}
    if p.break_time is not None:
        out["break_time"] = p.break_time
    if p.controller is not None:
        sensors, act = p.layouts()
        out.update(k=p.controller.k, c_set=p.controller.c_set, t_start=p.controller.t_start,
                   sensors=len(sensors.x_sensors),
                   sensor_row=round(sensors.y_lines[0] / (p.Ny * p.dy), 6),
                   actuators_x=len(act.x_actuators), actuators_y=len(act.y_actuators),
                   actuator_y_first=act.y_actuators[0], actuator_y_last=act.y_actuators[-1])
    if p.patch is not None:
        out.update(patch_alpha=p.patch.alpha, patch_x=p.patch.x_range, patch_y=p.patch.y_range)
    return out


def self_check(p: ExperimentPreset) -> list[str]:
    """Mismatches between a preset and the reference values (empty if none)."""
    lit = preset_literals(p)
    want = {**REFERENCE_VALUES["all"], **REFERENCE_VALUES.get(p.name, {})}
    return [f"{p.name}.{k}: preset {lit.get(k)!r} != reference {v!r}"
            for k, v in want.items() if lit.get(k) != v]


# --- overrides ---------------------------------------------------------------

def _coerce(old, text: str):
    if isinstance(old, bool):
        if text.lower() not in ("true", "false"):
            raise ConfigError(f"expected true/false, got {text!r}")
        return text.lower() == "true"
    if isinstance(old, int):
        return int(text)
    if isinstance(old, float) or old is None:
        if text.lower() == "none":
            return None
        return float(text)
    if isinstance(old, str):
        return text
    if isinstance(old, tuple):
        vals = tuple(float(v) for v in text.strip("()[] ").split(",") if v.strip())
        if len(vals) != len(old):
            raise ConfigError(f"expected {len(old)} comma separated values, got {text!r}")
        return vals
    raise ConfigError(f"cannot override a value of type {type(old).__name__}")


def apply_overrides(p: ExperimentPreset, overrides: dict[str, str]) -> ExperimentPreset:
    """Apply dotted ``section.key`` overrides, e.g. ``controller.k`` or ``sim.dt``."""
    for key, text in overrides.items():
        section, _, name = key.partition(".")
        try:
            if section in ("model", "sim", "controller", "patch"):
                obj = getattr(p, section)
                if obj is None:
                    obj = {"controller": _ctrl(), "patch": PatchSpec()}.get(section)
                    if obj is None:
                        raise ConfigError(f"preset {p.name} has no {section} section")
                    if section == "controller" and p.layout is None:
                        raise ConfigError(f"preset {p.name} has no actuator layout; set layout.name")
                if name not in {f.name for f in dataclasses.fields(obj)}:
                    raise ConfigError(f"unknown key {key!r}")
                obj = replace(obj, **{name: _coerce(getattr(obj, name), text)})
                p = replace(p, **{section: obj})
            elif section == "grid" and name in ("Nx", "Ny", "dx", "dy"):
                p = replace(p, **{name: _coerce(getattr(p, name), text)})
            elif section == "layout" and name == "name":
                if text != "none" and text not in LAYOUTS:
                    raise ConfigError(f"unknown layout {text!r}")
                p = replace(p, layout=None if text == "none" else text,
                            controller=None if text == "none" else (p.controller or _ctrl()))
            elif section == "layout" and name == "monitor":
                p = replace(p, monitor=int(text))
            elif section == "break" and name == "time":
                p = replace(p, break_time=_coerce(None, text))
            elif section == "output" and name in ("snapshot_every", "metrics_every", "classify_span"):
                p = replace(p, **{name: float(text)})
            else:
                raise ConfigError(f"unknown key {key!r}")
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"bad value for {key}: {exc}") from exc
    return p


def get_preset(name: str, overrides: dict[str, str] | None = None) -> ExperimentPreset:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    return apply_overrides(PRESETS[name], overrides or {})


def describe(p: ExperimentPreset) -> str:
    vals = {"grid.Nx": p.Nx, "grid.Ny": p.Ny, "grid.dx": p.dx, "grid.dy": p.dy}
    vals.update({f"model.{f.name}": getattr(p.model, f.name) for f in dataclasses.fields(p.model)})
    vals.update({f"sim.{f.name}": getattr(p.sim, f.name) for f in dataclasses.fields(p.sim)})
    vals["break.time"] = "none" if p.break_time is None else p.break_time
    vals["layout.name"] = p.layout or "none"
    if p.controller is not None:
        vals["layout.monitor"] = p.monitor
        vals.update({f"controller.{f.name}": getattr(p.controller, f.name)
                     for f in dataclasses.fields(p.controller)})
    if p.patch is not None:
        vals.update({f"patch.{f.name}": getattr(p.patch, f.name)
                     for f in dataclasses.fields(p.patch)})
    vals["output.snapshot_every"] = p.snapshot_every
    vals["output.metrics_every"] = p.metrics_every
    return format_config(vals)


# --- pipeline ------------------------------------------------------------------

_torus_cache: dict[tuple, Grid2D] = {}


def single_wave_state(p: ExperimentPreset) -> Grid2D:
    """Single plane wave on the torus, clock reset to t = 0 (memoised per grid/model/dt)."""
    key = (p.Nx, p.Ny, p.dx, p.dy, p.sim.dt, p.model)
    if key not in _torus_cache:
        g = init_pulse_seed(Grid2D.at_rest(p.Nx, p.Ny, p.dx, p.dy, p.model), p.model)
        g = make_torus_single_wave(g, p.model, p.sim)
        _torus_cache[key] = g
    g = _torus_cache[key].copy()
    g.t = 0.0
    return g


@dataclass
class RunReport:
    name: str
    final_classification: str
    time_to_planar: float | None
    metrics: list[FrontMetrics] = field(default_factory=list)
    events: list[ctl.ControlEvent] = field(default_factory=list)
    run_dir: Path | None = None
    metrics_csv: Path | None = None
    events_csv: Path | None = None
    frames: list[Path] = field(default_factory=list)
    frame_times: list[float] = field(default_factory=list)
    grid: Grid2D | None = None


def _sample_planar(m: FrontMetrics) -> bool:
    return m.multi_fraction < 0.1 and m.coverage > 0.95 and m.planarity < 2.0 * m.dy


def time_to_planar(history: Sequence[FrontMetrics]) -> float | None:
    """Earliest sample time from which every later sample is planar."""
    t = None
    for m in reversed(history):
        if not _sample_planar(m):
            break
        t = m.t
    return t


def run_preset(name: str | ExperimentPreset, overrides: dict[str, str] | None = None,
               out_dir=None, run_dir=None, write_frames: bool = True) -> RunReport:
    """Seed, build the torus, optionally break and control, then classify.

    Outputs go to ``run_dir`` (or ``out_dir/<name>-<timestamp>``) when either
    is given: frames/NNNN.pgm, metrics.csv, events.csv, report.txt.
    """
    p = name if isinstance(name, ExperimentPreset) else get_preset(name, overrides)
    b = BoundarySpec(PERIODIC)
    g = single_wave_state(p)
    patches = (p.patch.patch(),) if p.patch is not None else ()
    controller = None
    if p.layout is not None and p.controller is not None:
        sensors, actuators = p.layouts()
        controller = ctl.Controller(p.controller, sensors, actuators, b)
        controller.validate(g, p.sim.dt)
    stride = max(1, int(round(p.metrics_every / p.sim.dt)))
    sim = replace(p.sim, snapshot_stride=stride)

    if run_dir is None and out_dir is not None:
        base = Path(out_dir) / f"{p.name}-{time.strftime('%Y%m%d-%H%M%S')}"
        run_dir, n = base, 1
        while run_dir.exists():
            n += 1
            run_dir = base.with_name(f"{base.name}-{n}")
    if run_dir is not None:
        run_dir = Path(run_dir)
        (run_dir / "frames").mkdir(parents=True, exist_ok=True)

    rows = []
    frames, frame_times = [], []
    snaps = p.snapshot_times
    metrics_obs = MetricsObserver(0.5, b)

    def observe(grid):
        m = metrics_obs(grid)
        cbar = controller.state.cbar if controller and grid.t >= controller.cfg.t_start else 0.0
        total = controller.total_current(grid) if controller else 0.0
        rows.append((m, cbar, total))
        if write_frames and run_dir is not None and snaps and abs(grid.t - snaps[0]) < 0.5 * p.sim.dt:
            frames.append(emit_frame(grid.V, run_dir / "frames" / f"{len(frames) + 1:04d}.pgm"))
            frame_times.append(snaps.pop(0))
        elif snaps and grid.t > snaps[0]:
            snaps.pop(0)
        return m

    hooks = [(p.break_time, break_wave)] if p.break_time is not None else []
    traj = run(g, p.model, patches, b, sim, controller, [observe], hooks)
    history = [r[0] for r in rows]
    window = max(2, int(round(p.classify_span / p.metrics_every)))
    label = classify_state(history, window)
    ttp = time_to_planar(history) if label == PLANAR else None
    events = controller.events if controller else []
    rep = RunReport(p.name, label, ttp, history, list(events), run_dir, grid=traj.grid,
                    frames=frames, frame_times=frame_times)
    if run_dir is not None:
        rep.metrics_csv = emit_metrics(rows, run_dir / "metrics.csv")
        rep.events_csv = emit_events(events, run_dir / "events.csv")
        (run_dir / "report.txt").write_text(
            f"preset = {p.name}\n"
            f"final_classification = {label}\n"
            f"time_to_planar = {'none' if ttp is None else ttp}\n"
            f"events = {len(events)}\n"
            f"frames = {' '.join(str(t) for t in frame_times)}\n"
            + describe(p))
    return rep


# --- stability report ----------------------------------------------------------

@dataclass
class StabilityReport:
    layout: str
    chi: float
    slope_f: float
    N: int
    convention: str
    open_loop: np.ndarray
    sweep: list[tuple[float, float]]
    k_min: float | None
    solvability: st.Solvability | None = None
    note: str = ""

    def text(self) -> str:
        lines = [f"layout = {self.layout}", f"chi = {self.chi!r}", f"slope_f = {self.slope_f!r}",
                 f"N = {self.N}", f"convention = {self.convention}",
                 "open_loop = " + " ".join(f"{v:.6g}" for v in np.real(self.open_loop)),
                 "gain_sweep = " + " ".join(f"{k:.6g}:{a:.6g}" for k, a in self.sweep),
                 f"k_min = {'none' if self.k_min is None else repr(self.k_min)}"]
        if self.solvability is not None:
            s = self.solvability
            lines += [f"hb = {s.hb!r}", f"hb_nonzero = {str(s.hb_nonzero).lower()}",
                      "zeros = " + " ".join(f"{z.real:.6g}{z.imag:+.6g}j" for z in s.zeros),
                      f"zeros_all_negative = {str(s.zeros_all_negative).lower()}",
                      f"solvable = {str(s.solvable).lower()}"]
        if self.note:
            lines.append(f"note = {self.note}")
        return "\n".join(lines) + "\n"


def _bisect_gain(abscissa, ks: Sequence[float], iters: int = 60) -> float | None:
    prev = 0.0
    for k in sorted(ks):
        if abscissa(k) < 0:
            lo, hi = prev, k
            if abscissa(lo) < 0:
                return float(lo)
            for _ in range(iters):
                mid = 0.5 * (lo + hi)
                lo, hi = (lo, mid) if abscissa(mid) < 0 else (mid, hi)
            return float(hi)
        prev = k
    return None


def stability_report(layout: str = "fig4", chi_mode: str = st.NUMERIC_SLOPE, N: int = 32,
                     ks: Sequence[float] | None = None, convention: str = st.COSINE_WITH_CONSTANT,
                     Lx: float = 200.0, sensor_x: float | None = None,
                     actuator_xs: Sequence[float] | None = None,
                     p: ModelParams = ModelParams()) -> StabilityReport:
    """Run the modal analysis chain for a sensor/actuator x-layout.

    ``idealized`` (alias ``uniform``) stands for dense actuation and uses the
    distributed-feedback eigenvalues; ``custom`` takes ``sensor_x`` and
    ``actuator_xs``; the figure layouts use their monitored sensor and actuator
    columns.  The minimal stabilising gain is bisected on the sign of the
    spectral abscissa between consecutive sweep values.
    """
    lin = st.chi_estimate(chi_mode, p)
    chi, slope = lin.chi, lin.slope_f
    if ks is None:
        ks = list(np.geomspace(1e-4, 1e3, 29))
    open_loop = st.open_loop_eigs(chi, Lx, N)
    if layout in ("idealized", "uniform"):
        def absc(k):
            return float(st.uniform_closed_loop_eigs(chi, Lx, k, slope, N).max())
        sweep = [(k, absc(k)) for k in ks]
        return StabilityReport(layout, chi, slope, N, convention, open_loop, sweep,
                               _bisect_gain(absc, ks), None,
                               "dense actuation treated as distributed feedback")
    if layout == "custom":
        if sensor_x is None or actuator_xs is None:
            raise ConfigError("custom layout needs sensor_x and actuator_xs")
        xs, xl = list(actuator_xs), float(sensor_x)
    elif layout in LAYOUTS:
        sensors, act = LAYOUTS[layout](Lx, 2.0 * Lx)
        xs, xl = list(act.x_actuators), sensors.monitor_x
    else:
        raise ConfigError(f"unknown layout {layout!r}")
    sys = st.build_modal_system(chi, Lx, N, xs, xl, convention)
    sol = st.solvability_check(sys)
    open_loop = np.asarray(sys.A)

    def absc(k):
        return st.spectrum(st.closed_loop_matrix(sys, k, slope)).spectral_abscissa
    sweep = [(k, absc(k)) for k in ks]
    return StabilityReport(layout, chi, slope, N, convention, open_loop, sweep,
                           _bisect_gain(absc, ks), sol)
