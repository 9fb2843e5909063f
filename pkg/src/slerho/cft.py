"""Exact checks of the free-boson null-state identities.

Everything is expressed in charge units ``q = lam / lam*`` so that
``g lam_j lam_k = q_j q_k / 4`` and every coefficient is rational. Fock
vectors are dictionaries from monomials in the negative current modes
(sorted tuples of mode indices, all <= -1) to ``Fraction`` coefficients,
acting on a highest-weight state ``|h, q>``.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

__all__ = [
    "ChargeConfig",
    "CheckResult",
    "CoincidentPointError",
    "FockVector",
    "TruncationError",
    "ZeroChargeError",
    "anomaly_readout",
    "apply_J",
    "apply_L",
    "check_deformed_null_on_correlator",
    "check_m2_identity",
    "check_perturbed_identity",
    "check_routes_agree",
    "commutator_L",
    "conformal_weight",
    "correlator_terms",
    "highest_weight",
    "partition_exponents",
    "random_points",
    "rho_coefficients",
    "run_suite",
    "suite_ok",
]

Monomial = tuple[int, ...]
DEFAULT_LEVEL_CAP = 4


class ZeroChargeError(ValueError):
    pass


class CoincidentPointError(ValueError):
    pass


class TruncationError(RuntimeError):
    """A Sugawara term fell outside the configured level range (a bug signal)."""


def _frac(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


@dataclass(frozen=True)
class FockVector:
    """Linear combination of ``J_{m_1} ... J_{m_r} |h, q>`` with rational coefficients.

    ``scale`` multiplies the Sugawara stress tensor: ``T = (scale / 4) :J J:``.
    It is 1 for the free boson and ``1 + 4 pi u`` after the ``J Jbar``
    perturbation.
    """

    terms: Mapping[Monomial, Fraction]
    q: Fraction
    k: Fraction = Fraction(2)
    scale: Fraction = Fraction(1)

    def __post_init__(self):
        clean: dict[Monomial, Fraction] = {}
        for mono, c in self.terms.items():
            mono = tuple(sorted(mono))
            if any(m > -1 for m in mono):
                raise ValueError("monomials hold negative modes only")
            c = _frac(c)
            if c:
                clean[mono] = clean.get(mono, Fraction(0)) + c
        object.__setattr__(self, "terms", {m: c for m, c in clean.items() if c})
        object.__setattr__(self, "q", _frac(self.q))
        object.__setattr__(self, "k", _frac(self.k))
        object.__setattr__(self, "scale", _frac(self.scale))

    def _like(self, terms) -> "FockVector":
        return FockVector(terms, self.q, self.k, self.scale)

    @property
    def level(self) -> int:
        return max((-sum(m) for m in self.terms), default=0)

    def is_zero(self) -> bool:
        return not self.terms

    def coefficient(self, *modes: int) -> Fraction:
        return self.terms.get(tuple(sorted(modes)), Fraction(0))

    def __add__(self, other: "FockVector") -> "FockVector":
        out = dict(self.terms)
        for m, c in other.terms.items():
            out[m] = out.get(m, Fraction(0)) + c
        return self._like(out)

    def __neg__(self) -> "FockVector":
        return self._like({m: -c for m, c in self.terms.items()})

    def __sub__(self, other: "FockVector") -> "FockVector":
        return self + (-other)

    def __rmul__(self, s) -> "FockVector":
        s = _frac(s)
        return self._like({m: s * c for m, c in self.terms.items()})

    def __eq__(self, other):
        if not isinstance(other, FockVector):
            return NotImplemented
        return (self.terms, self.q, self.k, self.scale) == (other.terms, other.q, other.k, other.scale)

    def __hash__(self):
        return hash((frozenset(self.terms.items()), self.q, self.k, self.scale))

    def __repr__(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for mono, c in sorted(self.terms.items(), key=lambda kv: (sum(kv[0]), kv[0])):
            ops = " ".join(f"J({m})" for m in mono)
            parts.append(f"({c})" + (f" {ops}" if ops else ""))
        return " + ".join(parts) + " |h,q>"

    def to_list(self) -> list[dict]:
        return [
            {"modes": list(m), "coefficient": str(c)}
            for m, c in sorted(self.terms.items(), key=lambda kv: (sum(kv[0]), kv[0]))
        ]


def highest_weight(q, k=2, scale=1) -> FockVector:
    return FockVector({(): Fraction(1)}, q, k, scale)


def apply_J(n: int, v: FockVector) -> FockVector:
    """Act with ``J_n`` using ``[J_n, J_m] = k n delta_{n,-m}`` and the highest-weight conditions."""
    out: dict[Monomial, Fraction] = {}
    for mono, c in v.terms.items():
        if n < 0:
            key = tuple(sorted(mono + (n,)))
            out[key] = out.get(key, Fraction(0)) + c
        elif n == 0:
            out[mono] = out.get(mono, Fraction(0)) + v.q * c
        else:
            hits = mono.count(-n)
            if hits:
                rest = list(mono)
                rest.remove(-n)
                key = tuple(rest)
                out[key] = out.get(key, Fraction(0)) + c * v.k * n * hits
    return v._like(out)


def apply_L(n: int, v: FockVector, level_cap: int = DEFAULT_LEVEL_CAP) -> FockVector:
    """Sugawara ``L_n = (scale / 4) sum_r :J_r J_{n-r}:`` with the larger mode on the right.

    Only pairs ``J_{n-b} J_b`` with ``n/2 <= b <= level(v)`` survive, so the
    sum is finite; ``level_cap`` bounds the input level.
    """
    if v.level > level_cap:
        raise TruncationError(f"input level {v.level} exceeds the cap {level_cap}")
    out = v._like({})
    top = v.level
    b_lo = -((-n) // 2)  # ceil(n / 2)
    for b in range(b_lo, top + 1):
        a = n - b
        if a > b:
            raise TruncationError("normal-ordering range violated")
        term = apply_J(a, apply_J(b, v))
        weight = Fraction(1) if a == b else Fraction(2)
        out = out + weight * term
    return (v.scale / 4) * out


def commutator_L(m: int, n: int, v: FockVector) -> FockVector:
    return apply_L(m, apply_L(n, v)) - apply_L(n, apply_L(m, v))


def anomaly_readout(q, k=2) -> Fraction:
    """``<h,q| J_1 J_-1 |h,q> / <h,q|h,q>``."""
    v = apply_J(1, apply_J(-1, highest_weight(q, k)))
    return v.coefficient()


def conformal_weight(q) -> Fraction:
    """``h = g lam^2 = q^2 / 4``."""
    q = _frac(q)
    return q * q / 4


@dataclass(frozen=True)
class ChargeConfig:
    """Boundary charges ``q_j`` at distinct rational positions ``x_j``."""

    q: tuple[Fraction, ...]
    x: tuple[Fraction, ...]

    def __post_init__(self):
        q = tuple(_frac(v) for v in self.q)
        x = tuple(_frac(v) for v in self.x)
        if len(q) != len(x):
            raise ValueError("one position per charge")
        if len(set(x)) != len(x):
            raise CoincidentPointError("positions must be distinct")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "x", x)

    def __len__(self) -> int:
        return len(self.q)

    def with_positions(self, x: Sequence) -> "ChargeConfig":
        return ChargeConfig(self.q, tuple(x))


def partition_exponents(cfg: ChargeConfig) -> dict[tuple[int, int], Fraction]:
    """Exponents ``2 g lam_j lam_k = q_j q_k / 2`` of ``(x_k - x_j)`` for ``j < k``."""
    n = len(cfg)
    return {(j, k): cfg.q[j] * cfg.q[k] / 2 for j in range(n) for k in range(j + 1, n)}


def rho_coefficients(cfg: ChargeConfig, i: int) -> dict[int, Fraction]:
    """``rho_j = (q_j / q_i)(1 - q_i^2)`` for the spectators ``j != i``."""
    qi = cfg.q[i]
    if qi == 0:
        raise ZeroChargeError("rho coefficients need a nonzero charge at the deformed insertion")
    return {j: (qj / qi) * (1 - qi * qi) for j, qj in enumerate(cfg.q) if j != i}


def correlator_terms(cfg: ChargeConfig, i: int) -> dict[str, Fraction]:
    """Normalised correlators of ``L_-2``, ``L_-1`` and ``L_-1^2`` acting on insertion ``i``."""
    qi, xi = cfg.q[i], cfg.x[i]
    spect = [(cfg.q[j], xi - cfg.x[j]) for j in range(len(cfg)) if j != i]
    if any(d == 0 for _, d in spect):
        raise CoincidentPointError("spectator coincides with the insertion")
    first = sum((qi * qj / 2 / d for qj, d in spect), Fraction(0))
    square = sum((qi * qj / 2 / (d * d) for qj, d in spect), Fraction(0))
    s1 = sum((qj / d for qj, d in spect), Fraction(0))
    L2 = -sum((qi * qj / 2 / (d * d) for qj, d in spect), Fraction(0)) + s1 * s1 / 4
    L11 = first * first - square
    return {"L-2": L2, "L-1": first, "L-1^2": L11}


def random_points(cfg: ChargeConfig, n_points: int, seed: int = 0, denominator: int = 97) -> list[ChargeConfig]:
    """Configurations with the same charges at random distinct rational positions."""
    rng = random.Random(seed)
    out = []
    while len(out) < n_points:
        xs = tuple(Fraction(rng.randint(-10 * denominator, 10 * denominator), rng.randint(1, denominator)) for _ in cfg.x)
        if len(set(xs)) == len(xs):
            out.append(cfg.with_positions(xs))
    return out


@dataclass
class CheckResult:
    name: str
    passed: bool
    parameters: dict
    residual: list = field(default_factory=list)
    details: dict = field(default_factory=dict)
    exploratory: bool = False

    def to_dict(self) -> dict:
        def enc(v):
            if isinstance(v, Fraction):
                return str(v)
            if isinstance(v, dict):
                return {str(k): enc(x) for k, x in v.items()}
            if isinstance(v, (list, tuple)):
                return [enc(x) for x in v]
            return v

        return {
            "identity": self.name,
            "parameters": enc(self.parameters),
            "pass": self.passed,
            "residual": enc(self.residual),
            "details": enc(self.details),
            "exploratory": self.exploratory,
        }


def _deformed_residual(cfg: ChargeConfig, i: int, rho: Mapping[int, Fraction]) -> Fraction:
    c = correlator_terms(cfg, i)
    xi = cfg.x[i]
    drift = sum((rho[j] / (cfg.x[j] - xi) for j in rho), Fraction(0))
    return 2 * c["L-2"] - (2 * c["L-1^2"] - drift * c["L-1"])


def check_deformed_null_on_correlator(
    cfg: ChargeConfig,
    i: int,
    n_points: int = 5,
    seed: int = 0,
    rho_shift: Fraction | Mapping[int, Fraction] = Fraction(0),
) -> CheckResult:
    """``2<L_-2 phi_i ...> = 2<L_-1^2 phi_i ...> - sum_j rho_j / (x_j - x_i) <L_-1 phi_i ...>``.

    Evaluated exactly at the given positions and at ``n_points`` random
    rational configurations. ``rho_shift`` perturbs the coefficients for
    negative controls.
    """
    if cfg.q[i] == 0:
        raise ZeroChargeError("deformed null check needs q_i != 0")
    if len(cfg) < 2:
        raise ValueError("need at least one spectator")
    rho = rho_coefficients(cfg, i)
    if isinstance(rho_shift, Mapping):
        rho = {j: r + _frac(rho_shift.get(j, 0)) for j, r in rho.items()}
    else:
        rho = {j: r + _frac(rho_shift) for j, r in rho.items()}
    configs = [cfg] + random_points(cfg, n_points, seed)
    residuals = [_deformed_residual(c, i, rho) for c in configs]
    return CheckResult(
        "deformed-null-correlator",
        all(r == 0 for r in residuals),
        {"q": list(cfg.q), "x": list(cfg.x), "i": i, "rho": rho, "n_points": len(configs)},
        residuals,
    )


def m2_vector(q, k=2, alpha=None, scale=1) -> FockVector:
    """``(2 L_-2 - 2 L_-1^2 - alpha J_-1 L_-1)|h, q>``; ``alpha`` defaults to ``1/q - q``."""
    q = _frac(q)
    if q == 0:
        raise ZeroChargeError("alpha = 1/q - q needs q != 0")
    alpha = (1 / q - q) if alpha is None else _frac(alpha)
    v = highest_weight(q, k, scale)
    L1v = apply_L(-1, v)
    return 2 * apply_L(-2, v) - 2 * apply_L(-1, L1v) - alpha * apply_J(-1, L1v)


def check_m2_identity(q, k=2, alpha=None) -> CheckResult:
    """Exact check that ``(2 L_-2 - 2 L_-1^2 - alpha J_-1 L_-1)|h, q> = 0``.

    For ``k != 2`` the residual is ``q (1 - k/2) J_-2 |h, q>`` plus
    ``(1/2 - q^2/2 - alpha q / 2) J_-1^2 |h, q>``; both are reported.
    """
    q = _frac(q)
    alpha_used = (1 / q - q) if alpha is None and q != 0 else alpha
    res = m2_vector(q, k, alpha)
    k = _frac(k)
    a = _frac(alpha_used)
    predicted = FockVector({(-2,): q * (1 - k / 2), (-1, -1): (1 - q * q - a * q) / 2}, q, k)
    return CheckResult(
        "m2",
        res.is_zero(),
        {"q": q, "k": k, "alpha": a},
        res.to_list(),
        {"predicted_residual": predicted.to_list(), "residual_matches_prediction": res == predicted},
    )


def check_perturbed_identity(q, s) -> CheckResult:
    """Free boson with ``T = (s/4):J^2:`` and ``k = 2/s``, where ``s = 1 + 4 pi u``.

    Verifies the three level-2 mode displays, that
    ``(2 L_-2 - 2 L_-1^2)|h> = (1/q - s q) J_-1 L_-1 |h>`` and reports
    whether the undeformed condition holds (iff ``s q^2 = 1``).
    """
    q, s = _frac(q), _frac(s)
    if s <= 0:
        raise ValueError("s = 1 + 4 pi u must be positive")
    if q == 0:
        raise ZeroChargeError("perturbed identity needs q != 0")
    k = 2 / s
    v = highest_weight(q, k, s)
    L2 = apply_L(-2, v)
    L1 = apply_L(-1, v)
    L11 = apply_L(-1, L1)
    J1L1 = apply_J(-1, L1)
    displays = {
        "L-2": L2 == FockVector({(-2,): s / 4 * 2 * q, (-1, -1): s / 4}, q, k, s),
        "L-1^2": L11 == FockVector({(-1, -1): s * s / 4 * q * q, (-2,): s * s / 4 * k * q}, q, k, s),
        "J-1 L-1": J1L1 == FockVector({(-1, -1): q * s / 2}, q, k, s),
    }
    coefficient = 1 / q - s * q
    lhs = 2 * L2 - 2 * L11
    deformation_ok = lhs == coefficient * J1L1
    undeformed = lhs.is_zero()
    return CheckResult(
        "perturbed",
        all(displays.values()) and deformation_ok and undeformed == (s * q * q == 1),
        {"q": q, "s": s, "k": k},
        lhs.to_list(),
        {
            "displays": displays,
            "deformation_coefficient": coefficient,
            "deformation_matches": deformation_ok,
            "undeformed": undeformed,
        },
    )


def check_routes_agree(cfg: ChargeConfig, i: int, alpha=None, n_points: int = 5, seed: int = 0) -> CheckResult:
    """Compare the correlator and Fock verdicts for one deformation strength.

    With ``rho_j = alpha q_j`` the correlator identity is the image of the
    Fock identity, ``J_-1`` acting as ``sum_j q_j / (x_j - x_i)``.
    """
    qi = cfg.q[i]
    if qi == 0:
        raise ZeroChargeError("routes need q_i != 0")
    a = (1 / qi - qi) if alpha is None else _frac(alpha)
    shift = {j: a * cfg.q[j] - r for j, r in rho_coefficients(cfg, i).items()}
    corr = check_deformed_null_on_correlator(cfg, i, n_points, seed, rho_shift=shift)
    fock = check_m2_identity(qi, 2, a)
    return CheckResult(
        "routes-agree",
        corr.passed == fock.passed,
        {"q_i": qi, "alpha": a},
        [],
        {"correlator_pass": corr.passed, "fock_pass": fock.passed},
    )


def _configs(n: int, seed: int) -> Iterable[tuple[ChargeConfig, int]]:
    rng = random.Random(seed)
    choices = [Fraction(p, r) for p in range(-4, 5) for r in (1, 2, 3) if p]
    for c in range(n):
        m = rng.randint(2, 5)
        qs = [rng.choice(choices) for _ in range(m)]
        if c % 4 == 0:
            qs[0] = Fraction(1)
        xs: list[Fraction] = []
        while len(xs) < m:
            x = Fraction(rng.randint(-50, 50), rng.randint(1, 7))
            if x not in xs:
                xs.append(x)
        yield ChargeConfig(tuple(qs), tuple(xs)), 0


def run_suite(seed: int = 0) -> list[CheckResult]:
    """The full battery of exact checks, negative controls included (expected to fail)."""
    out: list[CheckResult] = []
    for q in (1, -1, Fraction(1, 2), Fraction(-1, 2), Fraction(3, 2), Fraction(2, 3)):
        out.append(check_m2_identity(q, 2))
    for cfg, i in _configs(20, seed):
        out.append(check_deformed_null_on_correlator(cfg, i, seed=seed))
    for s in (1, 2, 4, Fraction(9, 4)):
        for q in (1, Fraction(1, 2), Fraction(2, 3), Fraction(3, 2)):
            out.append(check_perturbed_identity(q, s))
    neg_m2 = check_m2_identity(Fraction(1, 2), 2, alpha=0)
    neg_m2.name, neg_m2.details["negative_control"] = "m2-negative-control", True
    neg_rho = check_deformed_null_on_correlator(
        ChargeConfig((Fraction(1, 2), Fraction(1)), (Fraction(0), Fraction(2))), 0, rho_shift=Fraction(1, 1000)
    )
    neg_rho.name, neg_rho.details["negative_control"] = "deformed-null-negative-control", True
    out += [neg_m2, neg_rho]
    return out


def suite_ok(results: Sequence[CheckResult]) -> bool:
    """Positive checks pass and negative controls fail."""
    ok = True
    for r in results:
        if r.exploratory:
            continue
        if r.details.get("negative_control"):
            ok &= not r.passed
        else:
            ok &= r.passed
    return ok

