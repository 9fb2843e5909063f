"""Exact rational checks of the level-2 identities for a charged free boson.

Run: python3 demos/null_state_checks.py
"""

# %%
from fractions import Fraction

from slerho.cft import (
    ChargeConfig,
    apply_L,
    check_deformed_null_on_correlator,
    check_perturbed_identity,
    highest_weight,
    m2_vector,
    rho_coefficients,
)

# %% Sugawara generators on a highest-weight state of charge q
q = Fraction(1, 2)
h = highest_weight(q)
print("L_-1 |h> =", apply_L(-1, h))
print("L_-2 |h> =", apply_L(-2, h))

# %% the combination 2 L_-2 - 2 L_-1^2 - (1/q - q) J_-1 L_-1 vanishes identically
print("m2 vector:", m2_vector(q))
print("with alpha = 0:", m2_vector(q, alpha=0))

# %% on correlators the J_-1 term becomes a drift with rho_j = (q_j / q)(1 - q^2)
cfg = ChargeConfig((q, 1, Fraction(-3, 2)), (0, 2, -5))
print("rho:", rho_coefficients(cfg, 0))
print("residuals:", check_deformed_null_on_correlator(cfg, 0).residual)

# %% after the J Jbar perturbation the deformation coefficient is 1/q - s q
for s in (1, 2, 4):
    r = check_perturbed_identity(q, s)
    print(f"s = {s}: coefficient {r.details['deformation_coefficient']}, undeformed {r.details['undeformed']}")
