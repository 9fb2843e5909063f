"""Loewner chains, SLE(kappa, rho) driving processes, lattice free-field level lines and exact CFT checks."""

from .cft import ChargeConfig, check_deformed_null_on_correlator, check_m2_identity, check_perturbed_identity, run_suite
from .driver import ForceSpec, SdeConfig, sample_ensemble, sample_sle_driving, sample_sle_rho_driving, sample_via_current
from .experiments import (
    ExperimentReport,
    run_drift_consistency_experiment,
    run_jump_universality_experiment,
    run_levelline_kappa_experiment,
)
from .gff import BoundaryData, LatticeDomain, calibrate_lattice_coupling, lambda_star, sample_field, sample_fields
from .levelline import LevelLine, extract_level_line, measure_jump
from .loewner import DrivingPath, LoewnerChain, Trace, chain_from_path, compute_trace, fit_expansion, forward_evaluate
from .zipper import estimate_drift, estimate_kappa, extract_driving

__version__ = "0.1.0"

__all__ = [
    "BoundaryData",
    "ChargeConfig",
    "DrivingPath",
    "ExperimentReport",
    "ForceSpec",
    "LatticeDomain",
    "LevelLine",
    "LoewnerChain",
    "SdeConfig",
    "Trace",
    "__version__",
    "calibrate_lattice_coupling",
    "chain_from_path",
    "check_deformed_null_on_correlator",
    "check_m2_identity",
    "check_perturbed_identity",
    "compute_trace",
    "estimate_drift",
    "estimate_kappa",
    "extract_driving",
    "extract_level_line",
    "fit_expansion",
    "forward_evaluate",
    "lambda_star",
    "measure_jump",
    "run_drift_consistency_experiment",
    "run_jump_universality_experiment",
    "run_levelline_kappa_experiment",
    "run_suite",
    "sample_ensemble",
    "sample_field",
    "sample_fields",
    "sample_sle_driving",
    "sample_sle_rho_driving",
    "sample_via_current",
]
