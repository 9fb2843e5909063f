import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slerho.gff import (
    BoundaryData,
    FitQualityError,
    LatticeDomain,
    analytic_lattice_coupling,
    calibrate_lattice_coupling,
    continuum_green_half_disk,
    continuum_harmonic,
    lambda_star,
    sample_field,
    sample_fields,
    sample_fluctuation,
    solve_harmonic_part,
)


@pytest.fixture(scope="module")
def dom16():
    return LatticeDomain(16)


@pytest.fixture(scope="module")
def dom64():
    return LatticeDomain(64)


def mirror_index(dom):
    return np.array([dom.site(-int(a) - int(b) - 1, int(b)) for a, b in zip(dom.a, dom.b)])


# -- continuum pieces -------------------------------------------------------


def test_lambda_star():
    assert lambda_star(0.25) == pytest.approx(1.0)
    assert lambda_star(1.0) == pytest.approx(0.5)


def test_continuum_harmonic_values():
    bc = BoundaryData(((0.0, 0.3),))
    assert continuum_harmonic(2.0 + 0j, bc) == pytest.approx(0.0)
    assert continuum_harmonic(-2.0 + 0j, bc) == pytest.approx(-2 * np.pi * 0.3)
    for y in (0.1, 1.0, 50.0):
        assert continuum_harmonic(1j * y, bc) == pytest.approx(-np.pi * 0.3)
    # symmetric data 2 pi lam on (-1, 1): harmonic measure of the segment seen from i is 1/2
    two = BoundaryData(((-1.0, 0.4), (1.0, -0.4)))
    assert continuum_harmonic(1j, two) == pytest.approx(np.pi * 0.4)
    assert continuum_harmonic(3 + 2j, two) == pytest.approx(continuum_harmonic(-3 + 2j, two))
    with pytest.raises(ZeroDivisionError):
        continuum_harmonic(0j, bc)
    with pytest.raises(ValueError):
        continuum_harmonic(-1j, bc)


def test_boundary_validation():
    with pytest.raises(ValueError):
        BoundaryData(((0.0, 1.0), (0.0, 2.0)))
    with pytest.raises(ValueError):
        BoundaryData(((0.0, 1.0),), g=0.0)


def test_axis_value_matches_continuum_limit():
    bc = BoundaryData(((0.0, 0.5), (3.0, -0.2)))
    for x in (-5.0, 1.0, 7.0):
        assert bc.axis_value(x) == pytest.approx(continuum_harmonic(x + 1e-12j, bc), abs=1e-9)


# -- domain -----------------------------------------------------------------


def test_domain_structure(dom16):
    assert dom16.boundary.size > 0
    inner = dom16.neighbors[dom16.interior]
    assert np.all(inner >= 0)
    assert np.all(np.abs(dom16.z) <= 16 + 1e-9)
    assert np.all(dom16.z.imag >= 0)
    # every neighbour of an interior site is a domain site, so the boundary separates
    assert not np.any(dom16.is_boundary[dom16.interior])


def test_domain_is_mirror_symmetric(dom16):
    m = mirror_index(dom16)
    assert np.allclose(dom16.z[m], -np.conj(dom16.z))
    assert np.array_equal(dom16.is_boundary[m], dom16.is_boundary)


def test_incidence_factorises_laplacian(dom16):
    B = dom16.incidence
    assert abs(B @ B.T - dom16.laplacian).max() < 1e-12


# -- harmonic part -----------------------------------------------------------


def test_constant_boundary(dom16):
    assert np.all(solve_harmonic_part(dom16, BoundaryData(())) == 0.0)
    c = np.full(dom16.size, 1.7)
    assert np.allclose(dom16.harmonic_extension(c, dom16.is_boundary), 1.7)


@settings(max_examples=10, deadline=None)
@given(st.lists(st.tuples(st.integers(-12, 12), st.floats(-1, 1)), min_size=1, max_size=3, unique_by=lambda t: t[0]))
def test_mean_value_property(jumps):
    dom = LatticeDomain(16)
    bc = BoundaryData(tuple((x + 0.25, lam) for x, lam in jumps))
    h = solve_harmonic_part(dom, bc)
    assert dom.mean_value_residual(h) < 1e-10


def test_antisymmetric_data_gives_antisymmetric_solution(dom16):
    lam = 0.4
    h = solve_harmonic_part(dom16, BoundaryData(((0.0, lam),))) + np.pi * lam
    m = mirror_index(dom16)
    assert np.max(np.abs(h + h[m])) < 1e-10


def test_harmonic_part_near_continuum(dom64):
    bc = BoundaryData(((0.0, 0.5),))
    h = solve_harmonic_part(dom64, bc)
    s = dom64.nearest_site(32j)
    assert abs(h[s] - continuum_harmonic(dom64.z[s], bc)) < 2.0 / 64


# -- fluctuations -------------------------------------------------------------


def test_fluctuation_zero_on_boundary(dom16):
    f = sample_fluctuation(dom16, 1.0, seed=3)
    assert np.all(f[dom16.boundary] == 0.0)
    assert np.any(f[dom16.interior] != 0.0)


def test_fluctuation_reproducible(dom16):
    a = sample_fluctuation(dom16, 1.0, seed=3, index=5)
    b = sample_fluctuation(dom16, 1.0, seed=3, index=5)
    c = sample_fluctuation(dom16, 1.0, seed=3, index=6)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    batch = list(sample_fields(dom16, BoundaryData(((0.0, 0.5),)), seed=3, n=3, start=4))
    assert np.array_equal(batch[1].fluctuation, a)


def test_variance_matches_inverse_diagonal():
    dom = LatticeDomain(12)
    k = analytic_lattice_coupling(1.0)
    site = dom.nearest_site(6j)
    exact = k * dom.inverse_columns([site])[site, 0]
    vals = np.array([s.fluctuation[site] for s in sample_fields(dom, BoundaryData(()), 1, 10_000, kappa_lat=k)])
    var = vals.var(ddof=1)
    assert abs(var - exact) < 3 * var * np.sqrt(2 / (vals.size - 1))


def test_empirical_mean_converges_to_harmonic_part():
    dom = LatticeDomain(12)
    bc = BoundaryData(((0.0, 0.5),))
    samples = np.stack([s.total for s in sample_fields(dom, bc, 2, 4000)])
    h = solve_harmonic_part(dom, bc)
    probes = dom.nearest_site(np.array([3j, 6j, 9j, -4 + 4j, 4 + 4j, 2 + 8j]))
    mean = samples[:, probes].mean(axis=0)
    err = samples[:, probes].std(axis=0, ddof=1) / np.sqrt(samples.shape[0])
    assert np.all(np.abs(mean - h[probes]) < 3 * err)


def test_symmetric_data_has_no_odd_antisymmetric_moments():
    dom = LatticeDomain(12)
    bc = BoundaryData(((-2.0, 0.5), (2.0, -0.5)))
    m = mirror_index(dom)
    site = dom.nearest_site(3 + 5j)
    anti = np.array([s.total[site] - s.total[m[site]] for s in sample_fields(dom, bc, 4, 4000)])
    n = anti.size
    assert abs(anti.mean()) < 3 * anti.std(ddof=1) / np.sqrt(n)
    third = anti**3
    assert abs(third.mean()) < 3 * third.std(ddof=1) / np.sqrt(n)


def test_domain_markov_property():
    dom = LatticeDomain(16)
    bc = BoundaryData(((0.0, 0.5),))
    inside = (np.abs(dom.z) < 8) & ~dom.is_boundary
    probe = dom.nearest_site(4j)
    resid = []
    for s in sample_fields(dom, bc, 6, 2000):
        ext = dom.harmonic_extension(s.total, ~inside)
        resid.append(s.total[probe] - ext[probe])
    resid = np.array(resid)
    assert abs(resid.mean()) < 3 * resid.std(ddof=1) / np.sqrt(resid.size)


def test_harmonic_extension_requires_fixed_boundary(dom16):
    with pytest.raises(ValueError):
        dom16.harmonic_extension(np.zeros(dom16.size), np.zeros(dom16.size, dtype=bool))


# -- calibration --------------------------------------------------------------


def test_calibration_quality_and_holdout():
    res = calibrate_lattice_coupling(1.0, 48)
    assert res.relative_residual < 0.05
    assert res.holdout_error < 0.05
    # the fitted constant sits near the cotangent-weight value
    assert abs(res.kappa_lat / analytic_lattice_coupling(1.0) - 1) < 0.05


def test_calibration_scales_inverse_with_g():
    dom = LatticeDomain(48)
    a = calibrate_lattice_coupling(1.0, dom).kappa_lat
    b = calibrate_lattice_coupling(2.0, dom).kappa_lat
    assert a / b == pytest.approx(2.0, rel=1e-12)
    assert dom.kappa_lat[2.0] == b


def test_calibration_sampled_agrees_with_exact():
    dom = LatticeDomain(32)
    exact = calibrate_lattice_coupling(1.0, dom).kappa_lat
    sampled = calibrate_lattice_coupling(1.0, dom, method="sampled", n_samples=3000, seed=1, max_residual=0.3).kappa_lat
    assert abs(sampled / exact - 1) < 0.1


def test_calibration_preconditions():
    with pytest.raises(ValueError):
        calibrate_lattice_coupling(1.0, 16)
    with pytest.raises(FitQualityError):
        calibrate_lattice_coupling(1.0, 32, max_residual=1e-9)


def test_two_point_function_log_difference():
    dom = LatticeDomain(128)
    k = calibrate_lattice_coupling(1.0, dom).kappa_lat
    z0 = dom.nearest_site(-16 + 48j)
    r = 8
    z1 = dom.nearest_site(dom.z[z0] + r)
    z2 = dom.nearest_site(dom.z[z0] + 2 * r)
    col = dom.inverse_columns([z0])[:, 0]
    lattice = k * (col[z1] - col[z2])
    cont = continuum_green_half_disk(dom.z[z0], dom.z[z1], 1.0, 128) - continuum_green_half_disk(
        dom.z[z0], dom.z[z2], 1.0, 128
    )
    assert abs(lattice / cont - 1) < 0.1


def test_field_sample_header_fields(dom16):
    s = sample_field(dom16, BoundaryData(((0.0, 0.5),)), seed=1, index=2)
    assert s.seed == 1 and s.index == 2
    assert s.kappa_lat > 0
    assert np.allclose(s.total, s.harmonic_part + s.fluctuation)
