"""Build-level acceptance checks, one test per criterion.

Each test prints a single ``PASS``/``FAIL`` line (collected into the
terminal summary) with the raw numbers behind the verdict. Criterion 7 is
exploratory: its line is reported but the test never fails on it.
"""

import time
from fractions import Fraction

import numpy as np
from scipy.stats import ks_2samp

from conftest import ACCEPTANCE_LINES
from slerho.cft import run_suite, suite_ok
from slerho.driver import (
    ForceSpec,
    SdeConfig,
    sample_ensemble,
    sample_sle_driving,
    sample_sle_ensemble,
    sample_sle_rho_driving,
    sample_via_current,
)
from slerho.experiments import (
    run_drift_consistency_experiment,
    run_jump_universality_experiment,
    run_levelline_kappa_experiment,
)
from slerho.gff import (
    BoundaryData,
    LatticeDomain,
    calibrate_lattice_coupling,
    continuum_harmonic,
    sample_fields,
    solve_harmonic_part,
)
from slerho.loewner import DrivingPath, chain_from_path, compute_trace, fit_expansion
from slerho.zipper import estimate_drift, estimate_kappa, resolution_error, round_trip_error


def report(n, ok, text, exploratory=False):
    tag = "PASS" if ok else "FAIL"
    if exploratory:
        tag += " (exploratory)"
    line = f"criterion {n}: {tag} | {text}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def test_criterion_1_exact_cft_suite():
    t0 = time.perf_counter()
    results = run_suite(seed=0)
    elapsed = time.perf_counter() - t0
    by = lambda name: [r for r in results if r.name == name]  # noqa: E731
    m2 = by("m2")
    corr = by("deformed-null-correlator")
    pert = by("perturbed")
    controls = [r for r in results if r.details.get("negative_control")]
    qi_one = any(r.parameters["q"][r.parameters["i"]] == 1 for r in corr)
    undeformed_iff = all(
        r.details["undeformed"] == (r.parameters["s"] * r.parameters["q"] ** 2 == 1) for r in pert
    )
    ok = (
        suite_ok(results)
        and len(m2) == 6
        and all(r.passed and not r.residual for r in m2)
        and len(corr) == 20
        and all(r.passed for r in corr)
        and qi_one
        and {r.parameters["s"] for r in pert} == {1, 2, 4, Fraction(9, 4)}
        and all(r.passed for r in pert)
        and undeformed_iff
        and len(controls) == 2
        and not any(r.passed for r in controls)
        and elapsed < 10
    )
    report(
        1,
        ok,
        f"{len(results)} exact checks in {elapsed:.2f}s; m2 {sum(r.passed for r in m2)}/6, "
        f"correlator {sum(r.passed for r in corr)}/20, perturbed {sum(r.passed for r in pert)}/{len(pert)}, "
        f"negative controls failing {sum(not r.passed for r in controls)}/2",
    )
    assert ok


def test_criterion_2_loewner_determinism():
    t0 = time.perf_counter()
    zero = DrivingPath(np.linspace(0, 1, 2001), np.zeros(2001))
    tip = compute_trace(zero).tip
    tip_ok = abs(tip - 2j) < 1e-4
    cap = fit_expansion(chain_from_path(zero))[2].real / 2
    cap_ok = abs(cap - 1) < 1e-3
    # fine reference path; the curve is then known only at n points
    ref = sample_sle_driving(4.0, SdeConfig(1.0, 16_000, seed=2024))
    tr = compute_trace(ref)
    e2000 = resolution_error(ref, tr, 2000)
    e4000 = resolution_error(ref, tr, 4000)
    exact = round_trip_error(sample_sle_driving(4.0, SdeConfig(1.0, 2000, seed=2024)))
    elapsed = time.perf_counter() - t0
    ok = tip_ok and cap_ok and e2000 <= 5e-2 and e4000 < e2000 and elapsed < 60
    report(
        2,
        ok,
        f"tip {tip:.6f}; capacity {cap:.6f}; round-trip sup-error {e2000:.4f} (n=2000) -> {e4000:.4f} (n=4000); "
        f"same-grid round trip {exact:.1e}; {elapsed:.1f}s",
    )
    assert ok


def test_criterion_3_sde_drift():
    t0 = time.perf_counter()
    spec = ForceSpec(((1.0, 1.0),), kappa=4.0)
    cfg = SdeConfig(0.05, 50, seed=31)
    # window spans the horizon; bias from the moving force point is below 1% here
    est = estimate_drift(sample_ensemble(spec, cfg, 10_000), (0.0, 0.05))
    drift_ok = abs(est.pooled_rate + 1) < 3 * est.pooled_stderr
    multi = ForceSpec(((1.0, 1.0), (-0.5, 2.0), (3.0, -0.4)), kappa=4.0)
    rcfg = SdeConfig(1.0, 1000, seed=32)
    sup = max(
        float(np.max(np.abs(sample_sle_rho_driving(multi, rcfg, i).values - sample_via_current(multi, rcfg, i).values)))
        for i in range(20)
    )
    elapsed = time.perf_counter() - t0
    ok = drift_ok and sup < 1e-8 and elapsed < 300
    report(
        3,
        ok,
        f"initial drift {est.pooled_rate:.4f} +- {est.pooled_stderr:.4f} (target -1, {est.n_paths} paths); "
        f"route sup-difference {sup:.1e}; {elapsed:.1f}s",
    )
    assert ok


def test_criterion_4_diffusivity_recovery():
    t0 = time.perf_counter()
    paths = sample_sle_ensemble(4.0, SdeConfig(1.0, 100, seed=41), 10_000)
    est = estimate_kappa(paths, n_boot=200, seed=41)
    kappa_ok = abs(est.kappa - 4) < 3 * est.stderr
    # self-similarity: W_{sigma^2 t} / sigma has the law of W_t
    sigma = 2.0
    wide = sample_sle_ensemble(4.0, SdeConfig(sigma**2, 100, seed=42), 10_000)
    pvals = []
    for t in (0.25, 0.5, 1.0):
        a = np.array([p.value_at(t) for p in paths])
        b = np.array([p.value_at(sigma**2 * t) for p in wide]) / sigma
        pvals.append(ks_2samp(a, b).pvalue)
    elapsed = time.perf_counter() - t0
    ok = kappa_ok and min(pvals) > 0.01 and elapsed < 300
    report(
        4,
        ok,
        f"kappa-hat {est.kappa:.4f} +- {est.stderr:.4f} ({est.n_paths} paths); "
        f"KS p-values (sigma=2) {', '.join(f'{p:.3f}' for p in pvals)}; {elapsed:.1f}s",
    )
    assert ok


def test_criterion_5_gff_fidelity():
    t0 = time.perf_counter()
    dom = LatticeDomain(64)
    probes = dom.nearest_site(
        np.array([8j, 16j, 32j, 48j, -20 + 20j, 20 + 20j, -10 + 40j, 10 + 50j, -40 + 10j, 30 + 30j])
    )
    kappa_lat = calibrate_lattice_coupling(1.0, dom).kappa_lat
    inv = dom.inverse_columns(probes)
    exact = kappa_lat * inv[probes, np.arange(probes.size)]
    vals = np.stack([s.fluctuation[probes] for s in sample_fields(dom, BoundaryData(()), 51, 10_000, kappa_lat=kappa_lat)])
    var = vals.var(axis=0, ddof=1)
    se = var * np.sqrt(2 / (vals.shape[0] - 1))
    z = np.abs(var - exact) / se
    cov_ok = bool(np.all(z < 3))
    k64 = kappa_lat
    k128 = calibrate_lattice_coupling(1.0, 128).kappa_lat
    cal_ok = abs(k128 / k64 - 1) < 0.02
    bc = BoundaryData(((0.0, 0.5),))
    scaled = []
    for R in (64, 128):
        d = LatticeDomain(R)
        h = solve_harmonic_part(d, bc)
        sites = d.nearest_site(np.array([0.5j * R, 0.25 * R + 0.5j * R, -0.3 * R + 0.3j * R]))
        scaled.append(R * max(abs(h[s] - continuum_harmonic(d.z[s], bc)) for s in sites))
    harm_ok = scaled[0] < 1.0 and scaled[1] <= scaled[0]
    elapsed = time.perf_counter() - t0
    ok = cov_ok and cal_ok and harm_ok and elapsed < 600
    report(
        5,
        ok,
        f"variance z-scores max {z.max():.2f} over {probes.size} sites; kappa_lat {k64:.4f} (R=64) vs {k128:.4f} (R=128); "
        f"R * harmonic error {scaled[0]:.2e} (R=64), {scaled[1]:.2e} (R=128); {elapsed:.1f}s",
    )
    assert ok


def test_criterion_6_levelline_sle4():
    t0 = time.perf_counter()
    rep = run_levelline_kappa_experiment(q=1, R=128, n_samples=500, seed=0)
    e = rep.estimates
    elapsed = time.perf_counter() - t0
    ok = rep.passed and rep.checks["kappa_band"]["pass"] and rep.checks["zero_drift"]["pass"]
    report(
        6,
        ok,
        f"kappa-hat {e['kappa_hat']:.3f} +- {e['kappa_stderr']:.3f} (band 3.5-4.5); drift {e['drift']:.4f} +- "
        f"{e['drift_stderr']:.4f}; failures {rep.failures['n_failed']}/500; {elapsed:.0f}s",
    )
    assert ok


def test_criterion_7_exploratory():
    t0 = time.perf_counter()
    jump = run_jump_universality_experiment(q_list=(1, Fraction(1, 2)), R_list=(64, 128), n_samples=100, seed=0)
    drift = run_drift_consistency_experiment(q=Fraction(1, 2), spectators=((2, 1),), R=128, n_samples=500, seed=0)
    elapsed = time.perf_counter() - t0
    rows = {(r["q"], r["R"]): r for r in jump.estimates["rows"]}
    one, half = rows[(1, 128)], rows[(Fraction(1, 2), 128)]
    c = jump.checks
    d = drift.estimates
    report(
        7,
        c["q=1:within_15pct"]["pass"],
        f"q=1 jump/2pi {one['jump_over_2pi']:.3f} +- {one['stderr']:.3f} vs lambda* 0.5 (R=128, side-verified probes; "
        f"geometric probes {one['geometric_jump_over_2pi']:.3f})",
        exploratory=True,
    )
    report(
        7,
        c["q=1/2:closer_to_lambda_star"]["pass"],
        f"q=1/2 jump/2pi {half['jump_over_2pi']:.3f} +- {half['stderr']:.3f} vs lambda* 0.5 and q lambda* 0.25 "
        f"(geometric probes {half['geometric_jump_over_2pi']:.3f}); q-spread {jump.estimates['q_spread_sigma']:.2f} sigma",
        exploratory=True,
    )
    report(
        7,
        drift.checks["drift_matches"]["pass"],
        f"q=1/2 spectator drift {d['drift_in_units']:.3f} +- {d['drift_stderr_in_units']:.3f} vs predicted "
        f"{d['predicted_drift_in_units']:.3f} (units of R/8); "
        f"{elapsed:.0f}s",
        exploratory=True,
    )
