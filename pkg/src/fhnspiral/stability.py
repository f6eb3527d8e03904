"""Linear analysis of the approximate 1-D front model.

The front deviation Z(x, t) from a planar set line obeys

    dZ/dt = chi * Z + Z_xx - k * slope_f * Z(x_l) * sum_d delta(x - x_d)

on [0, Lx] with no-flux ends.  Projecting onto the cosine eigenfunctions gives
the modal system a' = A a + B v, w = H a closed by v = -k * slope_f * w.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg

from .model import ConvergenceError, ModelParams

LITERAL_TRUNCATION = "literal-truncation"
COSINE_WITH_CONSTANT = "cosine-with-constant-mode"
CONVENTIONS = (LITERAL_TRUNCATION, COSINE_WITH_CONSTANT)

ANALYTIC = "analytic"
NUMERIC_SLOPE = "numeric-slope"

# W slope at the front read off the 1-D pulse profile
NUMERIC_W_SLOPE = 0.15


class DegenerateRootError(ArithmeticError):
    pass


class DegenerateTransferError(ArithmeticError):
    """H (sI - A)^-1 B vanishes identically."""


# --- front velocity constants ------------------------------------------------

def c_inf_kinematic(V_plus, V_minus, V_i):
    """Planar front speed for a cubic with roots V_minus < V_i < V_plus."""
    return (V_plus + V_minus - 2.0 * V_i) / math.sqrt(2.0)


def perturbed_root(V_star: float, W0: float, alpha: float) -> float:
    """First-order shift of the root V_star of f(V) when f(V) = W0."""
    den = -3.0 * V_star**2 + 2.0 * V_star * (alpha + 1.0) - alpha
    if abs(den) < 1e-12:
        raise DegenerateRootError(f"f'(V*) vanishes at V*={V_star}, alpha={alpha}")
    return W0 / den


def dc_inf_dW(alpha: float = 0.1) -> float:
    """Sensitivity of the planar front speed to a frozen inhibitor level, at W = 0."""
    lp = perturbed_root(1.0, 1.0, alpha)
    lm = perturbed_root(0.0, 1.0, alpha)
    li = perturbed_root(alpha, 1.0, alpha)
    return c_inf_kinematic(lp, lm, li)


def front_slope_analytic(beta: float = 0.5) -> float:
    if not 0.0 <= beta < 1.0:
        raise ValueError("beta must lie in [0, 1)")
    return (1.0 - beta) / math.sqrt(2.0)


@dataclass(frozen=True)
class FrontLinearization:
    chi: float
    slope_f: float
    dcdw: float
    slope_w: float


def chi_estimate(mode: str = NUMERIC_SLOPE, p: ModelParams = ModelParams(),
                 slope_w_numeric: float | None = NUMERIC_W_SLOPE,
                 dcdw: float | None = None) -> FrontLinearization:
    """Transverse growth constant chi of the front.

    ``analytic`` uses the tanh front profile; ``numeric-slope`` uses a measured
    inhibitor slope at the front, which is the more accurate estimate.
    """
    dcdw = dc_inf_dW(p.alpha) if dcdw is None else dcdw
    slope_f = front_slope_analytic(p.beta)
    if mode == ANALYTIC:
        slope_w = p.beta / p.gamma * slope_f
    elif mode == NUMERIC_SLOPE:
        if slope_w_numeric is None:
            raise ValueError("numeric-slope mode needs slope_w_numeric")
        slope_w = slope_w_numeric
    else:
        raise ValueError(f"unknown chi mode {mode!r}")
    return FrontLinearization(-dcdw * slope_w, slope_f, dcdw, slope_w)


# --- modal eigenvalues ---------------------------------------------------------

def open_loop_eigs(chi: float, Lx: float, N: int) -> np.ndarray:
    if N < 1:
        raise ValueError("N must be >= 1")
    n = np.arange(1, N + 1)
    return chi - (n * np.pi / Lx) ** 2


def uniform_closed_loop_eigs(chi: float, Lx: float, k: float, slope_f: float, N: int) -> np.ndarray:
    """Eigenvalues with distributed feedback -k*slope_f*Z on the whole front."""
    if slope_f <= 0:
        raise ValueError("slope_f must be positive")
    return open_loop_eigs(chi, Lx, N) - k * slope_f


def mode_shape(n, x, Lx: float):
    """Normalised no-flux eigenfunction number n (1-based): the constant for n=1,
    sqrt(2/Lx) cos((n-1) pi x / Lx) after that."""
    n = np.asarray(n)
    x = np.asarray(x, dtype=float)
    cos = math.sqrt(2.0 / Lx) * np.cos((n - 1) * np.pi * x / Lx)
    return np.where(n == 1, 1.0 / math.sqrt(Lx), cos)


@dataclass
class GalerkinSystem:
    N: int
    A: np.ndarray  # diagonal entries
    B: np.ndarray
    H: np.ndarray
    Lx: float
    mode_convention: str = COSINE_WITH_CONSTANT

    @property
    def A_matrix(self) -> np.ndarray:
        return np.diag(self.A)


def build_modal_system(chi: float, Lx: float, N: int, actuator_xs: Sequence[float],
                       sensor_x: float, convention: str = COSINE_WITH_CONSTANT) -> GalerkinSystem:
    """Truncated modal matrices for point actuators and a single point sensor.

    ``literal-truncation`` keeps the truncated matrices as usually written (A starting at
    chi - pi^2/Lx^2, B with cos(n pi x/Lx)); ``cosine-with-constant-mode`` keeps
    the constant mode and uses one consistent eigenfunction family for A, B, H.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    xs = np.asarray(actuator_xs, dtype=float)
    if xs.size == 0:
        raise ValueError("need at least one actuator")
    if np.any((xs < 0) | (xs > Lx)) or not 0.0 <= sensor_x <= Lx:
        raise ValueError("positions must lie in [0, Lx]")
    n = np.arange(1, N + 1)
    H = mode_shape(n, sensor_x, Lx)
    if convention == COSINE_WITH_CONSTANT:
        A = chi - ((n - 1) * np.pi / Lx) ** 2
        B = mode_shape(n[:, None], xs[None, :], Lx).sum(axis=1)
    elif convention == LITERAL_TRUNCATION:
        A = chi - (n * np.pi / Lx) ** 2
        B = math.sqrt(2.0 / Lx) * np.cos(n[:, None] * np.pi * xs[None, :] / Lx).sum(axis=1)
        B[0] = xs.size / math.sqrt(Lx)
    else:
        raise ValueError(f"unknown mode convention {convention!r}")
    return GalerkinSystem(N, A.astype(float), B, H, float(Lx), convention)


def closed_loop_matrix(sys: GalerkinSystem, k: float, slope_f: float) -> np.ndarray:
    """A - k * slope_f * B H (rank-one update of the diagonal)."""
    if k < 0:
        raise ValueError("k must be non-negative")
    return np.diag(sys.A) - k * slope_f * np.outer(sys.B, sys.H)


# --- spectra -----------------------------------------------------------------

@dataclass
class SpectrumReport:
    eigenvalues: np.ndarray
    spectral_abscissa: float
    stable: bool


def spectrum(M) -> SpectrumReport:
    """All eigenvalues of a small dense real matrix."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("matrix must be square")
    if M.shape[0] > 200:
        raise ValueError("spectrum is meant for N <= 200")
    if not np.all(np.isfinite(M)):
        raise ConvergenceError("matrix has non-finite entries")
    try:
        ev = np.linalg.eigvals(M)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(str(exc)) from exc
    ev = ev[np.lexsort((ev.imag, -ev.real))]
    abscissa = float(ev.real.max()) if ev.size else -math.inf
    return SpectrumReport(ev, abscissa, abscissa < 0)


def poly_from_roots_scaled(roots: np.ndarray, centre: float, scale: float) -> np.ndarray:
    """Coefficients (highest first) of prod (u - (r - centre)/scale)."""
    return np.poly((np.asarray(roots) - centre) / scale) if len(roots) else np.array([1.0])


def companion(coeffs: np.ndarray) -> np.ndarray:
    """Companion matrix of the polynomial with the given coefficients (highest first)."""
    c = np.trim_zeros(np.asarray(coeffs, dtype=float), "f")
    if c.size < 2:
        return np.zeros((0, 0))
    c = c / c[0]
    m = c.size - 1
    C = np.zeros((m, m))
    C[0, :] = -c[1:]
    C[1:, :-1] = np.eye(m - 1)
    return C


def transfer_numerator(sys: GalerkinSystem) -> tuple[np.ndarray, float, float]:
    """Numerator of H (sI - A)^-1 B in the scaled variable u = (s - centre)/scale.

    Returns ``(coeffs, centre, scale)``; coefficients are highest degree first.
    """
    a = sys.A
    centre = float(a.mean())
    scale = float(max(np.abs(a - centre).max(), 1e-300))
    if scale < 1e-12 * max(1.0, abs(centre)):
        scale = 1.0
    hb = sys.H * sys.B
    num = np.zeros(sys.N)
    for j in range(sys.N):
        others = np.delete(a, j)
        num += hb[j] * poly_from_roots_scaled(others, centre, scale) / scale
    return num, centre, scale


@dataclass
class Solvability:
    hb: float
    hb_nonzero: bool
    zeros: np.ndarray
    zeros_all_negative: bool

    @property
    def solvable(self) -> bool:
        return self.hb_nonzero and self.zeros_all_negative


def solvability_check(sys: GalerkinSystem, tol: float = 1e-12) -> Solvability:
    """Output-stabilisation conditions for the SISO modal system.

    1. H B != 0.  2. all transmission zeros (roots of the numerator of
    H (sI - A)^-1 B) lie in the open left half-plane.
    """
    if sys.N < 2:
        raise ValueError("need N >= 2")
    hb_terms = sys.H * sys.B
    if np.all(np.abs(hb_terms) <= tol * max(1.0, np.abs(sys.H).max() * np.abs(sys.B).max())):
        raise DegenerateTransferError("H_j B_j = 0 for every mode: the transfer function is zero")
    hb = float(hb_terms.sum())
    num, centre, scale = transfer_numerator(sys)
    big = np.abs(num).max()
    num = np.where(np.abs(num) < 1e-14 * big, 0.0, num)
    C = companion(num)
    u = spectrum(C).eigenvalues if C.size else np.zeros(0, dtype=complex)
    zeros = np.sort_complex(centre + scale * u)
    neg = bool(np.all(zeros.real < 0)) if zeros.size else True
    return Solvability(hb, abs(hb) > tol, zeros, neg)


@dataclass
class SampledStability:
    stable: bool
    radii: np.ndarray
    transition_radius: float

    def __bool__(self):
        return self.stable


def sampled_stability(M, delta_t: float) -> SampledStability:
    """Held-input closed loop sampled every ``delta_t``.

    ``radii`` are |exp(lambda * delta_t)| for the eigenvalues of M and
    ``transition_radius`` is the spectral radius of expm(M * delta_t).
    """
    if delta_t <= 0:
        raise ValueError("delta_t must be positive")
    rep = spectrum(M)
    radii = np.exp(rep.eigenvalues.real * delta_t)
    G = scipy.linalg.expm(np.asarray(M, dtype=float) * delta_t)
    rho = float(np.abs(np.linalg.eigvals(G)).max())
    return SampledStability(rep.stable, radii, rho)


# --- direct PDE cross-check ----------------------------------------------------

def _pde_operator(chi, Lx, k, slope_f, actuator_xs, sensor_x, nx):
    dx = Lx / nx
    L = np.zeros((nx, nx))
    i = np.arange(nx)
    L[i, i] = -2.0
    L[i[1:], i[1:] - 1] = 1.0
    L[i[:-1], i[:-1] + 1] = 1.0
    L[0, 0] = L[-1, -1] = -1.0  # mirror ghost cells
    M = L / dx**2 + chi * np.eye(nx)
    if k:
        # sensor read and unit point masses both use linear (hat) weights
        M -= k * slope_f * np.outer(sum(_hat(xd, dx, nx) for xd in actuator_xs) / dx,
                                    _hat(sensor_x, dx, nx))
    return M, (i + 0.5) * dx


def _hat(pos, dx, nx):
    w = np.zeros(nx)
    s = min(max(pos / dx - 0.5, 0.0), nx - 1.0)
    j = min(int(s), nx - 2)
    w[j] = 1.0 - (s - j)
    w[j + 1] = s - j
    return w


def modal_vs_pde_oracle(chi: float, Lx: float, k: float, actuator_xs: Sequence[float],
                        sensor_x: float, horizon: float, N: int = 16,
                        slope_f: float = front_slope_analytic(0.5), z0=None,
                        convention: str = COSINE_WITH_CONSTANT, nx: int = 400,
                        samples: int = 20) -> float:
    """Max relative deviation between the truncated modal ODEs and a direct
    finite-difference solution of the controlled front equation.

    Both linear systems are propagated exactly in time with matrix exponentials.
    ``z0`` is a callable initial profile (default cos(pi x / Lx)).  The
    deviation at each sample time is normalised by the largest sup norm the
    PDE solution has reached so far (initial state included), so decaying
    solutions are not judged on round-off.
    """
    if Lx > 50 or N > 32:
        raise ValueError("oracle is meant for small instances (Lx <= 50, N <= 32)")
    z0 = z0 or (lambda x: np.cos(np.pi * x / Lx))
    M, x = _pde_operator(chi, Lx, k, slope_f, actuator_xs, sensor_x, nx)
    Z0 = z0(x)
    sys = build_modal_system(chi, Lx, N, actuator_xs, sensor_x, convention)
    Mm = closed_loop_matrix(sys, k, slope_f) if k else np.diag(sys.A)
    n = np.arange(1, N + 1)
    if convention == COSINE_WITH_CONSTANT:
        Phi = mode_shape(n[None, :], x[:, None], Lx)
    else:
        Phi = math.sqrt(2.0 / Lx) * np.cos(n[None, :] * np.pi * x[:, None] / Lx)
    a0 = Phi.T @ Z0 * (Lx / nx)  # midpoint quadrature
    worst = 0.0
    peak = float(np.abs(Z0).max())
    for t in np.linspace(horizon / samples, horizon, samples):
        Zp = scipy.linalg.expm(M * t) @ Z0
        Zm = Phi @ (scipy.linalg.expm(Mm * t) @ a0)
        peak = max(peak, float(np.abs(Zp).max()))
        worst = max(worst, float(np.abs(Zp - Zm).max()) / peak)
    return worst
