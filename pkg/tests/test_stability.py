import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as hs

from fhnspiral import control as ctl
from fhnspiral import stability as st
from fhnspiral.model import ModelParams

SLOPE = (1 - 0.5) / math.sqrt(2)


def cubic_roots(W0, alpha):
    # V(alpha - V)(V - 1) = W0  <=>  -V^3 + (1+alpha) V^2 - alpha V - W0 = 0
    r = np.roots([-1.0, 1.0 + alpha, -alpha, -W0])
    return np.sort(r.real)


def c_from_roots(W0, alpha):
    vm, vi, vp = cubic_roots(W0, alpha)
    return (vp + vm - 2 * vi) / math.sqrt(2)


def test_kinematic_speed_examples():
    assert st.c_inf_kinematic(1, 0, 0.5) == 0
    assert st.c_inf_kinematic(1, 0, 0.1) == pytest.approx(0.8 / math.sqrt(2))
    assert st.c_inf_kinematic(1, 0, 1e-12) == pytest.approx(1 / math.sqrt(2))


@pytest.mark.parametrize("V, expected", [(1.0, -1 / 0.9), (0.0, -1 / 0.1), (0.1, 1 / 0.09)])
def test_perturbed_roots(V, expected):
    assert st.perturbed_root(V, 1.0, 0.1) == pytest.approx(expected, rel=1e-12)


def test_perturbed_root_degenerate():
    # f'(V) = 0 at the local extremum of the cubic
    a = 0.1
    v = ((a + 1) + math.sqrt((a + 1) ** 2 - 3 * a)) / 3
    with pytest.raises(st.DegenerateRootError):
        st.perturbed_root(v, 1.0, a)


@pytest.mark.parametrize("alpha", [0.05, 0.1, 0.2, 0.5])
def test_dc_dw_against_root_finder(alpha):
    h = 1e-4
    fd = (c_from_roots(h, alpha) - c_from_roots(-h, alpha)) / (2 * h)
    assert st.dc_inf_dW(alpha) == pytest.approx(fd, rel=1e-2)


def test_dc_dw_default():
    assert st.dc_inf_dW(0.1) == pytest.approx(-23.55, abs=0.05)


def test_front_slope():
    assert st.front_slope_analytic(0.5) == pytest.approx(0.35355, abs=1e-5)
    assert st.front_slope_analytic(0.0) == pytest.approx(1 / math.sqrt(2))
    p = ModelParams()
    assert p.beta * st.front_slope_analytic(p.beta) / p.gamma == pytest.approx(0.177, abs=1e-3)


def test_chi_estimates():
    num = st.chi_estimate(st.NUMERIC_SLOPE)
    assert num.chi == pytest.approx(3.53, abs=0.02)
    ana = st.chi_estimate(st.ANALYTIC)
    assert ana.chi == pytest.approx(23.57 * 0.1768, rel=1e-3)
    assert st.chi_estimate(st.ANALYTIC, dcdw=0.0).chi == 0.0
    with pytest.raises(ValueError):
        st.chi_estimate(st.NUMERIC_SLOPE, slope_w_numeric=None)


def test_open_loop_examples():
    ev = st.open_loop_eigs(3.54, 200.0, 200)
    assert ev[0] == pytest.approx(3.5398, abs=5e-5)
    first_stable = int(np.argmax(ev < 0)) + 1
    assert first_stable == 120 == math.ceil(200 * math.sqrt(3.54) / math.pi)
    assert np.all(st.open_loop_eigs(0.0, 50.0, 10) < 0)


@given(hs.floats(0, 5), hs.floats(5, 300), hs.floats(0, 100), hs.integers(1, 40))
def test_uniform_closed_loop(chi, Lx, k, N):
    ol = st.open_loop_eigs(chi, Lx, N)
    assert np.array_equal(st.uniform_closed_loop_eigs(chi, Lx, 0.0, SLOPE, N), ol)
    assert np.allclose(st.uniform_closed_loop_eigs(chi, Lx, k, SLOPE, N), ol - k * SLOPE)


def test_uniform_threshold():
    k_star = 3.54 / SLOPE
    assert k_star == pytest.approx(10.01, abs=0.01)
    assert np.all(st.uniform_closed_loop_eigs(3.54, 200.0, 1.001 * k_star, SLOPE, 200) < 0)


@pytest.mark.parametrize("N", [2, 8, 16])
def test_eigenfunctions_orthonormal(N):
    Lx = 37.0
    x = np.linspace(0, Lx, 10_000)
    phi = st.mode_shape(np.arange(1, N + 1)[:, None], x[None, :], Lx)
    gram = np.trapezoid(phi[:, None, :] * phi[None, :, :], x, axis=2)
    assert np.abs(gram - np.eye(N)).max() < 1e-6


@pytest.mark.parametrize("conv", st.CONVENTIONS)
def test_modal_input_vectors(conv):
    Lx = 40.0
    sys = st.build_modal_system(1.0, Lx, 6, [0.0], 10.0, conv)
    assert sys.B[0] == pytest.approx(1 / math.sqrt(Lx))
    assert np.allclose(sys.B[1:], math.sqrt(2 / Lx))
    many = st.build_modal_system(1.0, Lx, 6, [1.0, 7.0, 30.0], 10.0, conv)
    assert many.B[0] == pytest.approx(3 / math.sqrt(Lx))


def test_literal_truncation_matrices():
    sys = st.build_modal_system(3.54, 200.0, 4, [1.0], 50.0, st.LITERAL_TRUNCATION)
    assert np.allclose(sys.A, 3.54 - (np.arange(1, 5) * np.pi / 200) ** 2)
    own = st.build_modal_system(3.54, 200.0, 4, [1.0], 50.0)
    assert own.A[0] == 3.54


def test_sensor_at_midpoint_hits_nodes():
    sys = st.build_modal_system(1.0, 40.0, 8, [3.0], 20.0)
    assert np.allclose(sys.H[1::2], 0.0, atol=1e-12)
    assert np.all(np.abs(sys.H[0::2]) > 0.1)


def test_modal_system_validation():
    with pytest.raises(ValueError):
        st.build_modal_system(1.0, 40.0, 4, [50.0], 1.0)
    with pytest.raises(ValueError):
        st.build_modal_system(1.0, 40.0, 4, [5.0], 1.0, "sine")


def random_system(seed, N):
    rng = np.random.default_rng(seed)
    Lx = rng.uniform(5, 50)
    xs = rng.uniform(0, Lx, rng.integers(1, 6))
    return st.build_modal_system(rng.uniform(0, 3), Lx, N, xs, rng.uniform(0, Lx))


def test_closed_loop_trace_identity():
    sys = random_system(4, 10)
    M = st.closed_loop_matrix(sys, 0.7, SLOPE)
    assert np.trace(M) == pytest.approx(sys.A.sum() - 0.7 * SLOPE * (sys.H @ sys.B))
    assert np.array_equal(st.closed_loop_matrix(sys, 0.0, SLOPE), np.diag(sys.A))
    with pytest.raises(ValueError):
        st.closed_loop_matrix(sys, -1.0, SLOPE)


def test_fig4_layout_moves_left_for_small_gain():
    s, a = ctl.sparse_layout_fig4()
    sys = st.build_modal_system(3.54, 200.0, 12, a.x_actuators, s.monitor_x)
    ab = [st.spectrum(st.closed_loop_matrix(sys, k, SLOPE)).spectral_abscissa
          for k in (0.0, 1e-3, 2e-3, 4e-3)]
    assert all(b < a for a, b in zip(ab, ab[1:]))


def test_spectrum_diagonal_exact():
    d = np.array([3.0, -1.0, 0.5, -7.25])
    rep = st.spectrum(np.diag(d))
    assert sorted(rep.eigenvalues.real) == sorted(d) and not rep.stable
    assert rep.spectral_abscissa == 3.0


@given(hs.integers(0, 10_000), hs.integers(1, 32), hs.floats(0, 5))
def test_spectrum_trace_det(seed, N, k):
    rng = np.random.default_rng(seed)
    M = np.diag(rng.uniform(-3, 3, N)) - k * np.outer(rng.normal(size=N), rng.normal(size=N))
    ev = st.spectrum(M).eigenvalues
    tr, det = np.trace(M), np.linalg.det(M)
    assert abs(ev.sum().real - tr) <= 1e-6 * max(1.0, abs(tr), np.abs(M).sum())
    assert abs(np.prod(ev).real - det) <= 1e-6 * max(abs(det), 1e-300) + 1e-12 * np.prod(np.abs(ev).clip(1))


def test_spectrum_errors():
    with pytest.raises(ValueError):
        st.spectrum(np.zeros((2, 3)))
    with pytest.raises(st.ConvergenceError):
        st.spectrum(np.array([[np.nan, 0], [0, 1]]))


def test_companion_cubic():
    C = st.companion(np.poly([-1, -2, -3]))
    ev = np.sort(st.spectrum(C).eigenvalues.real)
    assert np.allclose(ev, [-3, -2, -1], atol=1e-8)


@given(hs.floats(-5, 5), hs.floats(-5, 5), hs.floats(0.1, 3), hs.floats(0.1, 3))
def test_two_mode_zero_closed_form(a1, a2, hb1, hb2):
    assume(abs(a1 - a2) > 1e-3)
    sys = st.GalerkinSystem(2, np.array([a1, a2]), np.array([hb1, hb2]), np.ones(2), 1.0)
    sol = st.solvability_check(sys)
    expected = (hb1 * a2 + hb2 * a1) / (hb1 + hb2)
    assert sol.zeros.size == 1
    assert sol.zeros[0].real == pytest.approx(expected, abs=1e-8 * (1 + abs(expected)))
    assert sol.hb == pytest.approx(hb1 + hb2)


def test_zero_transfer_is_degenerate():
    sys = st.GalerkinSystem(3, np.array([1.0, 0.5, 0.0]), np.ones(3), np.zeros(3), 1.0)
    with pytest.raises(st.DegenerateTransferError):
        st.solvability_check(sys)


@given(hs.integers(0, 10_000), hs.integers(2, 8))
def test_zeros_attract_high_gain_eigenvalues(seed, N):
    sys = random_system(seed, N)
    sol = st.solvability_check(sys)
    # no heavy cancellation in H B, otherwise a far zero converges only like 1/(k |HB|)
    terms = sys.H * sys.B
    assume(abs(terms.sum()) >= 0.25 * np.abs(terms).sum())
    ev = st.spectrum(st.closed_loop_matrix(sys, 1e4, 1.0)).eigenvalues
    for z in sol.zeros:
        assert np.abs(ev - z).min() < 1e-2 * (1 + abs(z))


def test_fig4_layout_unsolvable_at_reference_chi():
    s, a = ctl.sparse_layout_fig4()
    sys = st.build_modal_system(3.54, 200.0, 16, a.x_actuators, s.monitor_x)
    sol = st.solvability_check(sys)
    assert sol.hb_nonzero and not sol.zeros_all_negative and not sol.solvable


@pytest.mark.parametrize("dt", [0.1, 1.0, 10.0])
def test_sampled_stability_examples(dt):
    rep = st.sampled_stability(np.diag([-1.0, -2.0]), dt)
    assert rep and np.allclose(sorted(rep.radii), [math.exp(-2 * dt), math.exp(-dt)])
    assert rep.transition_radius == pytest.approx(math.exp(-dt))
    assert not st.sampled_stability(np.diag([0.1, -2.0]), dt)


def test_sampled_stability_fig4_layout_small_chi():
    s, a = ctl.sparse_layout_fig4()
    sys = st.build_modal_system(1e-4, 200.0, 12, a.x_actuators, s.monitor_x)
    M = st.closed_loop_matrix(sys, 10.0, SLOPE)
    assert st.sampled_stability(M, 5.0)


@given(hs.integers(0, 10_000), hs.floats(0.01, 50))
def test_sampled_stability_independent_of_interval(seed, dt):
    rng = np.random.default_rng(seed)
    M = np.diag(rng.uniform(-2, 1, 5)) - np.outer(rng.normal(size=5), rng.normal(size=5))
    ab = st.spectrum(M).spectral_abscissa
    assume(abs(ab) > 1e-3)
    assert bool(st.sampled_stability(M, dt)) == (ab < 0)
    assert bool(st.sampled_stability(M, dt)) == bool(st.sampled_stability(M, 1.0))


ORACLE = dict(chi=0.002, Lx=50.0, actuator_xs=[5.0, 25.0, 45.0], sensor_x=10.0)


@pytest.mark.parametrize("N", [4, 8, 16])
def test_oracle_single_cosine_mode(N):
    dev = st.modal_vs_pde_oracle(k=0.0, horizon=200.0, N=N, **ORACLE)
    assert dev < 0.01


def test_oracle_constant_mode_needs_constant_mode():
    z0 = lambda x: np.ones_like(x)
    assert st.modal_vs_pde_oracle(k=0.0, horizon=200.0, z0=z0, **ORACLE) < 1e-6
    assert st.modal_vs_pde_oracle(k=0.0, horizon=200.0, z0=z0, convention=st.LITERAL_TRUNCATION,
                                  **ORACLE) > 0.5


def test_oracle_stabilised_decay():
    sys = st.build_modal_system(0.002, 50.0, 16, ORACLE["actuator_xs"], ORACLE["sensor_x"])
    M = st.closed_loop_matrix(sys, 0.15, SLOPE)
    assert st.spectrum(M).stable
    n = np.arange(1, 17)
    a0 = np.zeros(16)
    a0[:2] = [math.sqrt(50.0), math.sqrt(25.0)]
    aT = st.scipy.linalg.expm(M * 8000.0) @ a0
    assert np.linalg.norm(aT) < 1e-3 * np.linalg.norm(a0)
    assert n.size == 16


def test_oracle_rejects_large_instances():
    with pytest.raises(ValueError):
        st.modal_vs_pde_oracle(0.1, 200.0, 0.0, [1.0], 1.0, 10.0)
