from fractions import Fraction as F

import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from slerho.cft import (
    ChargeConfig,
    CoincidentPointError,
    FockVector,
    TruncationError,
    ZeroChargeError,
    anomaly_readout,
    apply_J,
    apply_L,
    check_deformed_null_on_correlator,
    check_m2_identity,
    check_perturbed_identity,
    check_routes_agree,
    commutator_L,
    conformal_weight,
    correlator_terms,
    highest_weight,
    m2_vector,
    partition_exponents,
    rho_coefficients,
    run_suite,
    suite_ok,
)

# -- independent oracles ------------------------------------------------------
#
# Fock space as polynomials: J_-n is multiplication by y_n, J_n is k n d/dy_n
# and J_0 is q. Correlators from the partition function via the Ward identity.

Y = sp.symbols("y1:12")


def _rat(f):
    return sp.Rational(f.numerator, f.denominator)


def poly_J(n, p, q, k):
    if n < 0:
        return sp.expand(Y[-n - 1] * p)
    if n == 0:
        return sp.expand(q * p)
    return sp.expand(k * n * sp.diff(p, Y[n - 1]))


def poly_L(n, p, q, k, scale, top):
    out = 0
    for r in range(-top - abs(n) - 1, top + abs(n) + 2):
        a, b = (r, n - r) if r <= n - r else (n - r, r)
        out += poly_J(a, poly_J(b, p, q, k), q, k)
    return sp.expand(scale / 4 * out)


def to_poly(v: FockVector):
    out = 0
    for mono, c in v.terms.items():
        term = _rat(c)
        for m in mono:
            term *= Y[-m - 1]
        out += term
    return sp.expand(out)


def ward_correlators(cfg, i):
    n = len(cfg)
    xs = sp.symbols(f"x0:{n}")
    q = [_rat(v) for v in cfg.q]
    # log Z avoids branch choices for fractional powers of negative differences
    logZ = sum(q[j] * q[k] / 2 * sp.log(xs[k] - xs[j]) for j in range(n) for k in range(j + 1, n))
    d = [sp.diff(logZ, x) for x in xs]
    L2 = sum(q[j] ** 2 / 4 / (xs[j] - xs[i]) ** 2 - d[j] / (xs[j] - xs[i]) for j in range(n) if j != i)
    L11 = sp.diff(logZ, xs[i], 2) + d[i] ** 2
    vals = {xs[j]: _rat(cfg.x[j]) for j in range(n)}
    return {"L-2": L2.subs(vals), "L-1": d[i].subs(vals), "L-1^2": L11.subs(vals)}


# -- partition function and weights -----------------------------------------


def test_partition_exponents():
    cfg = ChargeConfig((1, -1, F(1, 2)), (0, 1, 3))
    e = partition_exponents(cfg)
    assert e[(0, 1)] == F(-1, 2)
    assert e[(0, 2)] == F(1, 4)
    assert partition_exponents(ChargeConfig((0, 5), (0, 1)))[(0, 1)] == 0
    assert partition_exponents(ChargeConfig((F(1, 2), F(1, 2)), (0, 1)))[(0, 1)] == F(1, 8)


def test_conformal_weight():
    assert conformal_weight(1) == F(1, 4)
    assert conformal_weight(0) == 0
    assert conformal_weight(2) == 1
    assert conformal_weight(F(-1, 2)) == F(1, 16)


def test_rho_coefficients():
    cfg = ChargeConfig((1, 3, -2), (0, 1, 2))
    assert all(r == 0 for r in rho_coefficients(cfg, 0).values())
    assert rho_coefficients(ChargeConfig((F(1, 2), 1), (0, 2)), 0) == {1: F(3, 2)}
    assert all(r == 0 for r in rho_coefficients(ChargeConfig((-1, 2), (0, 2)), 0).values())
    with pytest.raises(ZeroChargeError):
        rho_coefficients(ChargeConfig((0, 1), (0, 1)), 0)


def test_coincident_points_rejected():
    with pytest.raises(CoincidentPointError):
        ChargeConfig((1, 1), (F(1, 2), F(2, 4)))


@pytest.mark.parametrize(
    "q, x, i",
    [
        ((F(1, 2), 1), (0, 2), 0),
        ((F(2, 3), 1, F(-1, 2)), (F(1, 3), 2, -5), 1),
        ((1, 1, -2), (0, 1, 3), 0),
        ((F(3, 2), F(-1, 3), 2, 1), (F(-7, 2), F(1, 5), 4, 9), 2),
    ],
)
def test_correlators_match_ward_identity(q, x, i):
    cfg = ChargeConfig(q, x)
    got = correlator_terms(cfg, i)
    want = ward_correlators(cfg, i)
    for key in want:
        assert _rat(got[key]) == want[key], key


# -- Fock space ----------------------------------------------------------------


def test_current_modes():
    h = highest_weight(F(1, 2), k=3)
    assert apply_J(1, apply_J(-1, h)) == 3 * h
    assert apply_J(0, h) == F(1, 2) * h
    assert apply_J(2, apply_J(-1, h)).is_zero()
    assert anomaly_readout(1) == 2
    assert anomaly_readout(F(1, 3), k=5) == 5


def test_sugawara_on_highest_weight():
    q = F(2, 3)
    h = highest_weight(q)
    assert apply_L(0, h) == conformal_weight(q) * h
    assert apply_L(-1, h) == FockVector({(-1,): q / 2}, q)
    assert apply_L(-2, h) == FockVector({(-2,): q / 2, (-1, -1): F(1, 4)}, q)
    assert apply_L(1, h).is_zero() and apply_L(2, h).is_zero()


@pytest.mark.parametrize("q, k, scale", [(F(1), 2, 1), (F(-2, 3), 2, 1), (F(1, 2), 3, 1), (F(3, 2), F(2, 5), F(5))])
def test_sugawara_matches_polynomial_model(q, k, scale):
    k, scale = F(k), F(scale)
    vectors = [
        highest_weight(q, k, scale),
        FockVector({(-1,): 1}, q, k, scale),
        FockVector({(-2,): 2, (-1, -1): F(-1, 3)}, q, k, scale),
    ]
    for v in vectors:
        for n in (-2, -1, 0, 1, 2):
            got = to_poly(apply_L(n, v))
            want = poly_L(n, to_poly(v), _rat(q), _rat(k), _rat(scale), v.level + 2)
            assert sp.expand(got - want) == 0, (n, v)


def test_virasoro_commutators():
    for q in (F(1), F(1, 2), F(-3, 2)):
        for v in (highest_weight(q), apply_J(-1, highest_weight(q)), apply_J(-2, highest_weight(q))):
            assert commutator_L(1, -1, v) == 2 * apply_L(0, v)
            if v.level == 0:
                # central term c (m^3 - m) / 12 with c = 1
                assert commutator_L(2, -2, v) == 4 * apply_L(0, v) + F(1, 2) * v


def test_truncation_cap():
    v = FockVector({(-1,) * 5: 1}, 1)
    with pytest.raises(TruncationError):
        apply_L(-1, v)


# -- identities -------------------------------------------------------------------


@pytest.mark.parametrize("q", [1, -1, F(1, 2), F(-1, 2), F(3, 2), F(2, 3)])
def test_m2_identity_holds(q):
    r = check_m2_identity(q)
    assert r.passed and r.residual == []
    assert r.details["residual_matches_prediction"]


def test_m2_negative_control():
    r = check_m2_identity(F(1, 2), alpha=0)
    assert not r.passed
    assert r.details["residual_matches_prediction"]


def test_m2_residual_for_other_levels():
    r = check_m2_identity(F(1, 2), k=3)
    assert not r.passed
    assert r.details["residual_matches_prediction"]
    assert m2_vector(F(1, 2), k=3).coefficient(-2) == F(1, 2) * (1 - F(3, 2))
    with pytest.raises(ZeroChargeError):
        m2_vector(0)


def test_deformed_null_on_correlators():
    for q, x, i in [((F(1, 2), 1), (0, 2), 0), ((F(2, 3), 1, F(-1, 2)), (F(1, 3), 2, -5), 1), ((1, -2, 3), (0, 1, 2), 0)]:
        r = check_deformed_null_on_correlator(ChargeConfig(q, x), i)
        assert r.passed
        assert all(v == 0 for v in r.residual)
        assert len(r.residual) == 6


def test_perturbed_rho_fails():
    cfg = ChargeConfig((F(1, 2), 1), (0, 2))
    r = check_deformed_null_on_correlator(cfg, 0, rho_shift=F(1, 1000))
    assert not r.passed
    with pytest.raises(ZeroChargeError):
        check_deformed_null_on_correlator(ChargeConfig((0, 1), (0, 2)), 0)


@pytest.mark.parametrize("s", [1, 2, 4, F(9, 4)])
def test_perturbed_identity(s):
    for q in (1, F(1, 2), F(2, 3)):
        r = check_perturbed_identity(q, s)
        assert r.passed
        assert all(r.details["displays"].values())
        assert r.details["deformation_matches"]


def test_perturbed_special_cases():
    assert check_perturbed_identity(F(1, 2), 4).details["undeformed"]
    assert check_perturbed_identity(1, 2).details["deformation_coefficient"] == -1
    assert not check_perturbed_identity(1, 2).details["undeformed"]
    with pytest.raises(ValueError):
        check_perturbed_identity(1, 0)


def test_routes_agree():
    cfg = ChargeConfig((F(1, 2), 1, -2), (0, 2, -3))
    ok = check_routes_agree(cfg, 0)
    assert ok.passed and ok.details["correlator_pass"] and ok.details["fock_pass"]
    bad = check_routes_agree(cfg, 0, alpha=1)
    assert bad.passed and not bad.details["correlator_pass"] and not bad.details["fock_pass"]


@settings(max_examples=40, deadline=None)
@given(
    st.lists(st.fractions(-3, 3, max_denominator=6), min_size=2, max_size=5),
    st.integers(0, 10_000),
)
def test_deformed_null_exact_for_random_charges(qs, seed):
    if qs[0] == 0:
        qs[0] = F(1)
    cfg = ChargeConfig(tuple(qs), tuple(range(len(qs))))
    r = check_deformed_null_on_correlator(cfg, 0, n_points=3, seed=seed)
    assert r.passed


def test_suite():
    results = run_suite()
    assert suite_ok(results)
    controls = [r for r in results if r.details.get("negative_control")]
    assert len(controls) == 2 and not any(r.passed for r in controls)
    d = results[0].to_dict()
    assert {"identity", "parameters", "pass", "residual"} <= set(d)
