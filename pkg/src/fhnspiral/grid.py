"""Explicit finite-difference integration of the 2-D FitzHugh-Nagumo model.

Fields are stored with shape ``(Nx, Ny)``: axis 0 is x, axis 1 is y.  Values
live at cell centres ``x_i = (i + 1/2) dx``, ``y_j = (j + 1/2) dy`` so that the
domain is exactly ``[0, Nx*dx] x [0, Ny*dy]``; no-flux walls sit on the outer
cell faces and are realised with mirror ghost cells.
"""
from __future__ import annotations

import functools
import logging
import struct
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numba
import numpy as np

from .model import HeterogeneityPatch, ModelParams, reaction_f, steady_state

log = logging.getLogger(__name__)

NO_FLUX = "no-flux"
PERIODIC = "periodic"


class CFLError(ValueError):
    """Time step violates the explicit diffusion stability bound."""


class TorusError(RuntimeError):
    """Single-wave torus state could not be constructed."""


@dataclass
class Grid2D:
    V: np.ndarray
    W: np.ndarray
    dx: float = 1.0
    dy: float = 1.0
    t: float = 0.0

    def __post_init__(self):
        self.V = np.asarray(self.V, dtype=float)
        self.W = np.asarray(self.W, dtype=float)
        if self.V.shape != self.W.shape or self.V.ndim != 2:
            raise ValueError("V and W must be 2-D arrays of identical shape")
        if self.Nx < 4 or self.Ny < 4:
            raise ValueError(f"grid must be at least 4x4, got {self.V.shape}")
        if self.dx <= 0 or self.dy <= 0:
            raise ValueError("spacings must be positive")

    @classmethod
    def at_rest(cls, Nx: int = 200, Ny: int = 400, dx: float = 1.0, dy: float = 1.0,
                p: ModelParams | None = None) -> "Grid2D":
        vs, ws = steady_state(p or ModelParams())
        return cls(np.full((Nx, Ny), vs), np.full((Nx, Ny), ws), dx, dy, 0.0)

    @property
    def Nx(self) -> int:
        return self.V.shape[0]

    @property
    def Ny(self) -> int:
        return self.V.shape[1]

    @property
    def Lx(self) -> float:
        return self.Nx * self.dx

    @property
    def Ly(self) -> float:
        return self.Ny * self.dy

    @property
    def x(self) -> np.ndarray:
        return (np.arange(self.Nx) + 0.5) * self.dx

    @property
    def y(self) -> np.ndarray:
        return (np.arange(self.Ny) + 0.5) * self.dy

    def copy(self) -> "Grid2D":
        return replace(self, V=self.V.copy(), W=self.W.copy())


@dataclass(frozen=True)
class BoundarySpec:
    y_mode: str = NO_FLUX
    x_mode: str = field(default=NO_FLUX, init=False)

    def __post_init__(self):
        if self.y_mode not in (NO_FLUX, PERIODIC):
            raise ValueError(f"unknown y boundary mode {self.y_mode!r}")

    @property
    def periodic(self) -> bool:
        return self.y_mode == PERIODIC


@dataclass(frozen=True)
class SimConfig:
    dt: float = 0.2
    t_end: float = 1000.0
    snapshot_stride: int = 500
    cfl_policy: str = "reject"
    workers: int = 1

    def __post_init__(self):
        if self.dt <= 0 or self.t_end <= 0:
            raise ValueError("dt and t_end must be positive")
        if self.snapshot_stride < 1:
            raise ValueError("snapshot_stride must be >= 1")
        if self.cfl_policy not in ("reject", "warn"):
            raise ValueError(f"unknown cfl_policy {self.cfl_policy!r}")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


def cfl_factor(D: float, dt: float, dx: float, dy: float) -> float:
    return D * dt * (2.0 / dx**2 + 2.0 / dy**2)


def check_cfl(D, dt, dx, dy, policy="reject"):
    factor = cfl_factor(D, dt, dx, dy)
    if factor > 1.0:
        limit = 1.0 / (D * (2.0 / dx**2 + 2.0 / dy**2))
        msg = (f"dt={dt} violates the explicit diffusion bound "
               f"(D*dt*(2/dx^2+2/dy^2) = {factor:.3g} > 1); use dt <= {limit:.4g}")
        if policy == "reject":
            raise CFLError(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=3)


def _neighbours_y(f: np.ndarray, periodic: bool):
    if periodic:
        return np.roll(f, 1, axis=1), np.roll(f, -1, axis=1)
    below = np.concatenate((f[:, :1], f[:, :-1]), axis=1)
    above = np.concatenate((f[:, 1:], f[:, -1:]), axis=1)
    return below, above


def laplacian(f: np.ndarray, b: BoundarySpec = BoundarySpec(), dx: float = 1.0,
              dy: float = 1.0) -> np.ndarray:
    """Five-point Laplacian; mirror ghosts on no-flux edges, wrap on periodic y."""
    left = np.concatenate((f[:1], f[:-1]), axis=0)
    right = np.concatenate((f[1:], f[-1:]), axis=0)
    below, above = _neighbours_y(f, b.periodic)
    # multiply by the inverse squares, as the compiled stencil does, for bit-identical paths
    return ((left + right) - 2.0 * f) * (1.0 / dx**2) + ((below + above) - 2.0 * f) * (1.0 / dy**2)


@functools.lru_cache(maxsize=64)
def _patch_mask(Nx, Ny, dx, dy, patch: HeterogeneityPatch) -> np.ndarray:
    x = (np.arange(Nx) + 0.5) * dx
    y = (np.arange(Ny) + 0.5) * dy
    return patch.contains(x[:, None], y[None, :], Nx * dx, Ny * dy)


def alpha_field(g: Grid2D, p: ModelParams, patches: Sequence[HeterogeneityPatch], t: float):
    """Per-cell threshold, or the scalar ``p.alpha`` when no patch is active."""
    alpha = p.alpha
    for patch in patches:
        if patch.active(t):
            mask = _patch_mask(g.Nx, g.Ny, g.dx, g.dy, patch)
            alpha = np.where(mask, patch.alpha_override, alpha)
    return alpha


@numba.njit(cache=True, nogil=True)
def _fused_band(V, W, alpha, I, D, eps, beta, gamma, delta, dt, idx2, idy2, periodic,
                lo, hi, Vout, Wout):
    Nx, Ny = V.shape
    for i in range(lo, hi):
        im = i - 1 if i > 0 else 0
        ip = i + 1 if i < Nx - 1 else Nx - 1
        for j in range(Ny):
            if j > 0:
                jm = j - 1
            else:
                jm = Ny - 1 if periodic else 0
            if j < Ny - 1:
                jp = j + 1
            else:
                jp = 0 if periodic else Ny - 1
            v = V[i, j]
            w = W[i, j]
            lap = ((V[im, j] + V[ip, j]) - 2.0 * v) * idx2 + ((V[i, jm] + V[i, jp]) - 2.0 * v) * idy2
            a = alpha[i, j] if alpha.shape[0] > 1 else alpha[0, 0]
            rhs = D * lap + v * (a - v) * (v - 1.0) - w
            if I.shape[0] > 1:
                rhs = rhs + I[i, j]
            Vout[i, j] = v + dt * rhs
            Wout[i, j] = w + dt * (eps * ((beta * v - gamma * w) + delta))


def _update_band(V, W, lap, alpha, I, p, dt, lo, hi, Vout, Wout):
    v = V[lo:hi]
    w = W[lo:hi]
    a = alpha if np.ndim(alpha) == 0 else alpha[lo:hi]
    rhs = p.D * lap[lo:hi] + reaction_f(v, a) - w
    if I is not None:
        rhs = rhs + I[lo:hi]
    Vout[lo:hi] = v + dt * rhs
    Wout[lo:hi] = w + dt * (p.eps * (p.beta * v - p.gamma * w + p.delta))


_NO_CURRENT = np.zeros((1, 1))

_pools: dict[int, ThreadPoolExecutor] = {}


def _pool(workers: int) -> ThreadPoolExecutor:
    if workers not in _pools:
        _pools[workers] = ThreadPoolExecutor(max_workers=workers)
    return _pools[workers]


def step(g: Grid2D, p: ModelParams, patches: Sequence[HeterogeneityPatch] = (),
         I: np.ndarray | None = None, b: BoundarySpec = BoundarySpec(), dt: float = 0.2,
         cfl_policy: str = "reject", workers: int = 1, fast: bool = True) -> Grid2D:
    """One forward-Euler step.  ``I=None`` is the zero control field.

    The default path is a fused compiled stencil; ``fast=False`` runs the plain
    numpy reference built on :func:`laplacian`.  With ``workers > 1`` the update
    is split into x-bands on a thread pool; every cell sees the same arithmetic,
    so results do not depend on the worker count.
    """
    check_cfl(p.D, dt, g.dx, g.dy, cfl_policy)
    if I is not None and np.shape(I) != g.V.shape:
        raise ValueError(f"control field shape {np.shape(I)} != grid shape {g.V.shape}")
    alpha = alpha_field(g, p, patches, g.t) if patches else p.alpha
    Vn = np.empty_like(g.V)
    Wn = np.empty_like(g.W)
    if not fast:
        lap = laplacian(g.V, b, g.dx, g.dy)
        _update_band(g.V, g.W, lap, alpha, I, p, dt, 0, g.Nx, Vn, Wn)
        return Grid2D(Vn, Wn, g.dx, g.dy, g.t + dt)
    a2 = np.broadcast_to(np.asarray(alpha, dtype=float), (1, 1)) if np.ndim(alpha) == 0 \
        else np.asarray(alpha, dtype=float)
    I2 = _NO_CURRENT if I is None else np.ascontiguousarray(I, dtype=float)
    args = (g.V, g.W, a2, I2, p.D, p.eps, p.beta, p.gamma, p.delta, dt,
            1.0 / g.dx**2, 1.0 / g.dy**2, b.periodic)
    if workers == 1:
        _fused_band(*args, 0, g.Nx, Vn, Wn)
    else:
        edges = np.linspace(0, g.Nx, workers + 1).astype(int)
        futures = [_pool(workers).submit(_fused_band, *args, lo, hi, Vn, Wn)
                   for lo, hi in zip(edges[:-1], edges[1:])]
        for fut in futures:
            fut.result()
    return Grid2D(Vn, Wn, g.dx, g.dy, g.t + dt)


def init_pulse_seed(g: Grid2D, p: ModelParams | None = None, band=(0.245, 0.26)) -> Grid2D:
    """Excite the horizontal band ``band[0]*Ly <= y <= band[1]*Ly`` (V=1), rest elsewhere."""
    vs, ws = steady_state(p or ModelParams())
    y = g.y
    rows = (y >= band[0] * g.Ly) & (y <= band[1] * g.Ly)
    V = np.full(g.V.shape, vs)
    V[:, rows] = 1.0
    return Grid2D(V, np.full(g.W.shape, ws), g.dx, g.dy, g.t)


def break_wave(g: Grid2D, band=(0.05, 0.5)) -> Grid2D:
    """Zero V on ``band[0]*Lx <= x <= band[1]*Lx`` across all y; W is left alone."""
    x = g.x
    cols = (x >= band[0] * g.Lx) & (x <= band[1] * g.Lx)
    out = g.copy()
    out.V[cols, :] = 0.0
    return out


def make_torus_single_wave(g: Grid2D, p: ModelParams, sim: SimConfig,
                           exit_fraction: float = 0.1, quiet_time: float = 50.0,
                           level: float = 0.1, timeout: float = 3000.0) -> Grid2D:
    """Integrate a seeded grid under no-flux walls until the downward pulse has left.

    The lower ``exit_fraction`` of rows must first be reached by the pulse and then
    stay below ``level`` for ``quiet_time``.  Raises :class:`TorusError` if no
    excitation exists or the pulse has not left by ``timeout``.  The returned grid
    keeps its clock; callers switch to periodic y themselves (see :data:`PERIODIC`).
    """
    b = BoundarySpec(NO_FLUX)
    check_cfl(p.D, sim.dt, g.dx, g.dy, sim.cfl_policy)
    nlow = max(1, int(round(exit_fraction * g.Ny)))
    quiet_steps = int(np.ceil(quiet_time / sim.dt))
    t0 = g.t
    n = 0
    visited = False
    quiet = 0
    dead = 0
    while True:
        vmax = g.V.max()
        dead = dead + 1 if vmax < level else 0
        if dead >= quiet_steps:
            raise TorusError("no excitation present; cannot build a travelling wave")
        low = g.V[:, :nlow].max()
        if low > 0.5:
            visited = True
        if visited:
            quiet = quiet + 1 if low < level else 0
            if quiet >= quiet_steps:
                log.info("downward pulse left the domain at t=%.1f", g.t)
                return g
        if g.t - t0 >= timeout:
            raise TorusError(f"two pulses still present at t={g.t:.1f}")
        n += 1
        g = step(g, p, (), None, b, sim.dt, "warn", sim.workers)
        g.t = t0 + n * sim.dt


@dataclass
class Trajectory:
    times: list[float] = field(default_factory=list)
    records: list[list] = field(default_factory=list)
    grid: Grid2D | None = None


def run(g: Grid2D, p: ModelParams, patches: Sequence[HeterogeneityPatch] = (),
        b: BoundarySpec = BoundarySpec(), sim: SimConfig = SimConfig(), controller=None,
        observers: Sequence[Callable[[Grid2D], object]] = (),
        hooks: Sequence[tuple[float, Callable[[Grid2D], Grid2D]]] = ()) -> Trajectory:
    """Integrate from ``g.t`` to ``sim.t_end``.

    ``controller`` (optional) must provide ``update(grid)`` and ``field(grid)``;
    it is updated before every step and its field is injected as I.  Each
    observer is called on the initial grid and then every ``snapshot_stride``
    steps; its return values are collected in ``Trajectory.records``.  ``hooks``
    are ``(time, fn)`` pairs applied once when the clock first reaches ``time``
    (used for the wave-break perturbation).
    """
    check_cfl(p.D, sim.dt, g.dx, g.dy, sim.cfl_policy)
    traj = Trajectory()
    pending = sorted(hooks, key=lambda h: h[0])
    t0 = g.t
    nsteps = int(round((sim.t_end - t0) / sim.dt))

    def observe(grid):
        traj.times.append(grid.t)
        traj.records.append([obs(grid) for obs in observers])

    for n in range(nsteps + 1):
        while pending and g.t >= pending[0][0] - 1e-9:
            g = pending.pop(0)[1](g)
        if n % sim.snapshot_stride == 0:
            observe(g)
        if n == nsteps:
            break
        I = None
        if controller is not None:
            controller.update(g)
            I = controller.field(g)
        g = step(g, p, patches, I, b, sim.dt, "warn", sim.workers)
        g.t = t0 + (n + 1) * sim.dt
    if nsteps % sim.snapshot_stride:
        observe(g)
    traj.grid = g
    return traj


def save_state(g: Grid2D, path) -> None:
    """Checkpoint: Nx, Ny as int64, then V and W row-major float64."""
    with open(path, "wb") as fh:
        fh.write(struct.pack("<qq", g.Nx, g.Ny))
        fh.write(np.ascontiguousarray(g.V, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(g.W, dtype="<f8").tobytes())


def load_state(path, dx: float = 1.0, dy: float = 1.0, t: float = 0.0) -> Grid2D:
    with open(path, "rb") as fh:
        Nx, Ny = struct.unpack("<qq", fh.read(16))
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != 2 * Nx * Ny:
        raise ValueError(f"checkpoint holds {data.size} values, expected {2 * Nx * Ny}")
    V = data[:Nx * Ny].reshape(Nx, Ny).copy()
    W = data[Nx * Ny:].reshape(Nx, Ny).copy()
    return Grid2D(V, W, dx, dy, t)
