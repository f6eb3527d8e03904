import numpy as np
import pytest
from hypothesis import given, strategies as hs

from fhnspiral.front import (BROKEN, DESCENDING, PLANAR, SPIRAL, EmptyFrontError, FrontLine,
                             FrontMetrics, MetricsObserver, classify_state, crossing_counts,
                             detect_front, front_velocity, measure, planarity)
from fhnspiral.grid import NO_FLUX, PERIODIC, BoundarySpec, Grid2D, SimConfig, break_wave, run
from fhnspiral.model import ModelParams

NF, PER = BoundarySpec(NO_FLUX), BoundarySpec(PERIODIC)


def tanh_grid(z0, width=2.0, Nx=8, Ny=400, dy=1.0):
    g = Grid2D.at_rest(Nx, Ny, 1.0, dy)
    g.V = np.tile(0.5 * (1 + np.tanh((g.y - z0) / width)), (Nx, 1))
    return g


def test_no_front_on_rest_state():
    f = detect_front(Grid2D.at_rest(6, 20))
    assert not f.valid.any() and f.coverage == 0.0
    with pytest.raises(EmptyFrontError):
        planarity(f)


def test_tanh_profile_position():
    f = detect_front(tanh_grid(170.0), 0.5, b=NF)
    assert f.valid.all()
    assert np.abs(f.z - 170.0).max() <= 0.1


@given(hs.floats(20, 380), hs.floats(3, 8))
def test_tanh_interpolation_error(z0, width):
    # front width >= 3 dy: error bounded by dy/10
    f = detect_front(tanh_grid(z0, width), b=NF)
    assert np.abs(f.z - z0).max() <= 0.1


def pulse_grid(center, Ny=200, Nx=6):
    g = Grid2D.at_rest(Nx, Ny)
    y = g.y
    d = (y - center + Ny / 2) % Ny - Ny / 2
    g.V = np.tile(np.exp(-(d / 6.0) ** 2), (Nx, 1))
    return g


@given(hs.floats(0, 199), hs.integers(-300, 300))
def test_periodic_translation_equivariance(c, m):
    g = pulse_grid(c)
    h = Grid2D(np.roll(g.V, m, axis=1), g.W)
    a, b = detect_front(g, b=PER), detect_front(h, b=PER)
    assert a.valid.all() and b.valid.all()
    diff = (b.z - a.z - m) % 200.0
    assert np.all(np.minimum(diff, 200.0 - diff) < 1e-9)


def test_descending_front_is_behind_pulse_centre():
    g = pulse_grid(100.0)
    asc = detect_front(g, b=PER).z
    desc = detect_front(g, direction=DESCENDING, b=PER).z
    assert np.all(asc < 100.0) and np.all(desc > 100.0)
    assert np.allclose(100.0 - asc, desc - 100.0)


def test_planarity_examples():
    z = np.array([3.0, 7.0] * 5)
    f = FrontLine(z, np.ones(10, bool))
    assert planarity(f) == pytest.approx(2.0)
    assert planarity(FrontLine(np.full(4, 9.0), np.ones(4, bool))) == 0.0


@given(hs.lists(hs.floats(0, 100), min_size=2, max_size=30), hs.floats(-50, 50))
def test_planarity_shift_invariance(z, c):
    z = np.array(z)
    a = planarity(FrontLine(z, np.ones(z.size, bool)))
    b = planarity(FrontLine(z + c, np.ones(z.size, bool)))
    assert b == pytest.approx(a, abs=1e-9)


def test_periodic_planarity_across_seam():
    f = FrontLine(np.array([399.0, 1.0, 399.0, 1.0]), np.ones(4, bool), period=400.0)
    assert planarity(f) == pytest.approx(1.0)


def test_front_velocity_examples():
    z = np.linspace(10, 20, 5)
    valid = np.ones(5, bool)
    f0 = FrontLine(z, valid, 0.0)
    assert np.all(front_velocity(FrontLine(z, valid, 1.0), f0) == 0)
    assert np.allclose(front_velocity(FrontLine(z + 5, valid, 10.0), f0), 0.5)
    v = valid.copy()
    v[2] = False
    out = front_velocity(FrontLine(z + 5, v, 10.0), f0)
    assert np.isnan(out[2]) and np.isfinite(out[[0, 1, 3, 4]]).all()
    with pytest.raises(ValueError):
        front_velocity(f0, f0)


def test_front_velocity_unwraps_seam():
    f0 = FrontLine(np.array([398.0]), np.ones(1, bool), 0.0, 400.0)
    f1 = FrontLine(np.array([2.0]), np.ones(1, bool), 8.0, 400.0)
    assert front_velocity(f1, f0)[0] == pytest.approx(0.5)


@given(hs.floats(0, 199), hs.integers(1, 40))
def test_rigid_translation_velocity(c, m):
    g0, g1 = pulse_grid(c), pulse_grid(c + m)
    f0 = detect_front(g0, b=PER)
    g1.t = 4.0
    f1 = detect_front(g1, b=PER)
    assert np.allclose(front_velocity(f1, f0), m / 4.0, atol=0.2 / 4.0)


def test_crossing_counts():
    g = pulse_grid(50.0)
    assert np.all(crossing_counts(g, 0.5, PER) == 2)
    g.V[:, 150:160] = 1.0
    assert np.all(crossing_counts(g, 0.5, PER) == 4)


def test_plane_wave_metrics(torus):
    m, f = measure(torus, 0.5, PER)
    assert f.coverage == 1.0 and m.planarity < 0.5 and m.multi_fraction == 0.0


def test_classification_of_plane_wave_and_break(torus):
    obs = MetricsObserver(0.5, PER)
    traj = run(torus, ModelParams(), (), PER, SimConfig(0.2, 100.0, 50), observers=[obs])
    hist = [r[0] for r in traj.records]
    assert classify_state(hist) == PLANAR
    broken = break_wave(traj.grid)
    m1, f = measure(broken, 0.5, PER)
    assert f.coverage < 1.0
    assert classify_state([hist[-1], m1]) == BROKEN


def test_classify_rules():
    ok = FrontMetrics(0, 0.1, 5, 1.0)
    ragged = FrontMetrics(1, 5.0, 5, 1.0)
    spiral = FrontMetrics(2, 1.0, 5, 1.0, multi_fraction=0.5)
    assert classify_state([ok, ok]) == PLANAR
    assert classify_state([ok, ragged]) == BROKEN
    assert classify_state([spiral, ok, ok]) == SPIRAL
    assert classify_state([spiral, ok, ok], window=2) == PLANAR
    with pytest.raises(ValueError):
        classify_state([ok], window=1)
