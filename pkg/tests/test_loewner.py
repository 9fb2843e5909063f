import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from slerho.loewner import (
    BranchError,
    DrivingPath,
    HullError,
    LoewnerChain,
    capacity_of,
    chain_from_path,
    compute_trace,
    concatenate,
    elementary_slit_map,
    fit_expansion,
    forward_evaluate,
    inverse_slit_map,
)


def zero_path(t=1.0, n=1000):
    return DrivingPath(np.linspace(0, t, n + 1), np.zeros(n + 1))


def smooth_path(n, t=1.0):
    times = np.linspace(0, t, n + 1)
    return DrivingPath(times, np.sin(3 * times) + 0.5 * times)


# -- DrivingPath ------------------------------------------------------------


def test_path_validation():
    with pytest.raises(ValueError):
        DrivingPath([0.0, 0.5, 0.5], [0, 0, 0])
    with pytest.raises(ValueError):
        DrivingPath([0.1, 0.5], [0, 0])
    with pytest.raises(ValueError):
        DrivingPath([0.0, 0.5], [0, 0, 0])
    with pytest.raises(ValueError):
        DrivingPath([0.0, 0.5], [0, 0], force_tracks=[[1.0, 0.0]])


def test_path_is_read_only():
    p = zero_path(n=4)
    with pytest.raises(ValueError):
        p.values[0] = 1.0


def test_rescaled_path():
    p = smooth_path(10)
    r = p.rescaled(2.0)
    assert np.allclose(r.times, 4 * p.times)
    assert np.allclose(r.values, 2 * p.values)


# -- elementary map ---------------------------------------------------------


def test_slit_map_closed_form():
    assert elementary_slit_map(3.0, 1.0, 0.0) == pytest.approx(np.sqrt(13), abs=1e-12)


@given(st.floats(0.01, 10), st.floats(-5, 5))
def test_tip_maps_to_origin(dt, w):
    tip = w + 2j * np.sqrt(dt)
    assert abs(elementary_slit_map(tip, dt, w)) < 1e-12 * max(1.0, abs(tip))


def _ode_slit(z, dt, w):
    """Integrate d g / ds = 2 / (g - w) for time dt."""

    def rhs(_, y):
        g = y[0] + 1j * y[1]
        v = 2.0 / (g - w)
        return [v.real, v.imag]

    sol = solve_ivp(rhs, (0, dt), [z.real, z.imag], rtol=1e-12, atol=1e-14)
    return complex(sol.y[0, -1], sol.y[1, -1])


def test_slit_map_matches_ode():
    z, dt, w = 1 + 1j, 0.25, 0.5
    assert abs(elementary_slit_map(z, dt, w) - (_ode_slit(z, dt, w) - w)) < 1e-9


def test_point_on_slit_rejected():
    with pytest.raises(HullError):
        elementary_slit_map(0.5j, 1.0, 0.0)
    with pytest.raises(ValueError):
        elementary_slit_map(1j, 0.0, 0.0)


@given(st.floats(-4, 4), st.floats(0.01, 4), st.floats(0.01, 2), st.floats(-2, 2))
def test_inverse_slit_map_round_trip(x, y, dt, w):
    z = complex(x, y)
    if abs(z.real - w) < 1e-9 and z.imag < 2 * np.sqrt(dt):
        return
    u = elementary_slit_map(z, dt, w)
    assert u.imag >= 0
    assert abs(inverse_slit_map(u, dt, w) - z) < 1e-8 * max(1.0, abs(z))


def test_inverse_below_axis_rejected():
    with pytest.raises(BranchError):
        inverse_slit_map(1 - 1e-3j, 1.0, 0.0)


# -- chains -----------------------------------------------------------------


def test_forward_empty_chain_is_identity():
    chain = LoewnerChain([], [])
    assert forward_evaluate(chain, 1 + 2j) == 1 + 2j
    assert capacity_of(chain) == 0


def test_forward_refinement_matches_closed_form():
    chain = chain_from_path(zero_path(1.0, 1000))
    assert abs(forward_evaluate(chain, 3.0) - np.sqrt(13)) / np.sqrt(13) < 1e-6


def test_forward_single_step():
    assert forward_evaluate(LoewnerChain([1.0], [0.0]), 3.0) == pytest.approx(np.sqrt(13))


def test_forward_hull_error():
    with pytest.raises(HullError):
        forward_evaluate(LoewnerChain([1.0], [0.0]), 1j)


def test_capacity_additivity():
    a = LoewnerChain([0.3], [0.1])
    b = LoewnerChain([0.7], [-0.2])
    assert capacity_of(a + b) == 1.0
    c = concatenate([a, b, a])
    assert capacity_of(c) == capacity_of(a) + capacity_of(b) + capacity_of(a)


def test_expansion_capacity_zero_driving():
    coeffs = fit_expansion(chain_from_path(zero_path()), radius=1e3)
    assert abs(coeffs[2].real - 2.0) < 1e-4


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=2, max_size=30), st.floats(0.1, 2))
def test_hydrodynamic_normalisation(ws, t):
    n = len(ws)
    chain = LoewnerChain(np.full(n, t / n), np.cumsum(ws) * np.sqrt(t / n))
    c = fit_expansion(chain)
    assert abs(c[0] - 1) < 1e-6
    assert abs(c[1] + chain.final_offset) < 1e-6
    assert abs(c[2].real - 2 * t) / (2 * t) < 1e-3


# -- traces -----------------------------------------------------------------


@pytest.mark.parametrize("t, tip", [(1.0, 2j), (0.25, 1j)])
def test_vertical_trace(t, tip):
    for n in (10, 2000):
        tr = compute_trace(zero_path(t, n))
        assert abs(tr.tip - tip) < 1e-4
        assert tr.points[0] == 0
        assert np.allclose(tr.points.real, 0, atol=1e-12)


def test_trace_upper_half_plane():
    tr = compute_trace(smooth_path(400))
    assert np.all(tr.points.imag >= 0)


def test_trace_tip_images_are_zero():
    path = smooth_path(50)
    chain = chain_from_path(path)
    tr = compute_trace(path)
    for k in (10, 30, 50):
        sub = LoewnerChain(chain.dts[:k], chain.offsets[:k])
        g = forward_evaluate(sub, tr.points[k] + 1e-13j)
        assert abs(g) < 1e-5


def test_trace_refinement_convergence():
    tips = [compute_trace(smooth_path(n)).tip for n in (100, 200, 400, 800)]
    diffs = [abs(a - b) for a, b in zip(tips, tips[1:])]
    # successive differences shrink at least like n^{-1/2}
    for d0, d1 in zip(diffs, diffs[1:]):
        assert d1 <= d0 / np.sqrt(2) * 1.1


def test_trace_scaling_covariance():
    sigma = 1.7
    p = smooth_path(300)
    scaled = p.rescaled(sigma)
    a = compute_trace(p).points
    b = compute_trace(scaled).points
    assert np.max(np.abs(b - sigma * a)) < 1e-9
