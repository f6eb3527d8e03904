"""FitzHugh-Nagumo kinetics with spatially and temporally patched threshold.

    dV/dt = D * lap(V) + f(V) - W + I
    dW/dt = eps * (beta*V - gamma*W + delta)
    f(V)  = V * (alpha - V) * (V - 1)
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


class ConvergenceError(RuntimeError):
    """Raised when an iterative solver exhausts its iteration budget."""


@dataclass(frozen=True)
class ModelParams:
    D: float = 1.0
    eps: float = 0.01
    alpha: float = 0.1
    beta: float = 0.5
    gamma: float = 1.0
    delta: float = 0.0

    def __post_init__(self):
        if self.eps <= 0 or self.gamma <= 0 or self.D <= 0:
            raise ValueError("eps, gamma and D must be positive")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")


@dataclass(frozen=True)
class HeterogeneityPatch:
    """Rectangle of modified threshold, active for ``t_range[0] <= t <= t_range[1]``.

    ``x_range`` and ``y_range`` are fractions of L_x and L_y (inclusive).
    """

    alpha_override: float
    x_range: tuple[float, float]
    y_range: tuple[float, float]
    t_range: tuple[float, float]

    def __post_init__(self):
        for name in ("x_range", "y_range", "t_range"):
            lo, hi = getattr(self, name)
            if not lo < hi:
                raise ValueError(f"{name} must be a non-empty interval, got {(lo, hi)}")
        if not (0.0 <= self.x_range[0] and self.x_range[1] <= 1.0
                and 0.0 <= self.y_range[0] and self.y_range[1] <= 1.0):
            raise ValueError("patch ranges are fractions of the domain and must lie in [0, 1]")

    def active(self, t: float) -> bool:
        return self.t_range[0] <= t <= self.t_range[1]

    def contains(self, x, y, Lx: float, Ly: float):
        return ((x >= self.x_range[0] * Lx) & (x <= self.x_range[1] * Lx)
                & (y >= self.y_range[0] * Ly) & (y <= self.y_range[1] * Ly))


def reaction_f(V, alpha):
    return V * (alpha - V) * (V - 1.0)


def reaction_g(V, W, p: ModelParams):
    """Recovery rate eps * (beta*V - gamma*W + delta)."""
    return p.eps * (p.beta * V - p.gamma * W + p.delta)


def steady_state(p: ModelParams, max_iter: int = 64, tol: float = 1e-12) -> tuple[float, float]:
    """Rest state closest to the origin, by damped Newton on the two nullclines.

    Solves f(V) - W = 0 and beta*V - gamma*W + delta = 0 starting at (0, 0).
    """
    v, w = 0.0, 0.0
    a = p.alpha
    for _ in range(max_iter):
        r1 = reaction_f(v, a) - w
        r2 = p.beta * v - p.gamma * w + p.delta
        if abs(r1) < tol and abs(r2) < tol:
            return v, w
        df = -3.0 * v * v + 2.0 * v * (a + 1.0) - a
        # Jacobian [[df, -1], [beta, -gamma]]
        det = -df * p.gamma + p.beta
        if det == 0.0:
            raise ConvergenceError("singular Jacobian in steady-state Newton iteration")
        dv = (-r1 * -p.gamma - (-1.0) * -r2) / det
        dw = (df * -r2 - p.beta * -r1) / det
        lam = 1.0
        res0 = r1 * r1 + r2 * r2
        while lam > 1e-4:
            vn, wn = v + lam * dv, w + lam * dw
            n1 = reaction_f(vn, a) - wn
            n2 = p.beta * vn - p.gamma * wn + p.delta
            if n1 * n1 + n2 * n2 < res0:
                break
            lam *= 0.5
        v, w = vn, wn
    r1 = reaction_f(v, a) - w
    r2 = p.beta * v - p.gamma * w + p.delta
    if abs(r1) < tol and abs(r2) < tol:
        return v, w
    raise ConvergenceError(f"steady state not found within {max_iter} iterations")


def nullclines(p: ModelParams, v_range=(-0.4, 1.2), samples: int = 200):
    """Sample both nullclines W = f(V) and W = (beta*V + delta)/gamma.

    Returns ``(V, W_f, W_g)``.
    """
    if samples < 2:
        raise ValueError("need at least two samples")
    V = np.linspace(v_range[0], v_range[1], samples)
    return V, reaction_f(V, p.alpha), (p.beta * V + p.delta) / p.gamma


def alpha_at(x, y, t: float, p: ModelParams, patches: Sequence[HeterogeneityPatch] = (),
             Lx: float = 1.0, Ly: float = 1.0):
    """Threshold at position(s) ``(x, y)`` and time ``t``.

    Patches are applied in order, so later patches shadow earlier ones.
    Scalar inputs give a float, array inputs an array.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    out = np.full(np.broadcast(x, y).shape, p.alpha)
    for patch in patches:
        if patch.active(t):
            out = np.where(patch.contains(x, y, Lx, Ly), patch.alpha_override, out)
    return out[()] if out.ndim == 0 else out
