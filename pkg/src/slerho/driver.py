"""Driving-function samplers for SLE(kappa) and SLE(kappa, rho).

Every path owns a noise substream derived from ``(seed, path_index)``: one
generator for the base Brownian increments and a second one reserved for
Brownian-bridge refinement. The base increments of a path therefore do not
depend on whether, or where, refinement happened.

Ensembles are integrated in lock-step across paths with numpy; a path that
needs near-source refinement on a step leaves the batch for that step and is
advanced by recursive halving.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .loewner import DrivingPath, SwallowEvent

__all__ = [
    "ForceSpec",
    "SdeConfig",
    "harmonic_current_x",
    "harmonic_potential",
    "noise_streams",
    "sample_ensemble",
    "sample_sle_driving",
    "sample_sle_ensemble",
    "sample_sle_rho_driving",
    "sample_via_current",
]

MAX_REFINE_DEPTH = 10
SWALLOW_FLOOR = 1e-6
POLICIES = ("halt", "drop-point")


@dataclass(frozen=True)
class ForceSpec:
    """Force points ``(x_j, rho_j)`` on the real line and the diffusivity."""

    points: tuple[tuple[float, float], ...] = ()
    kappa: float = 4.0

    def __post_init__(self):
        pts = tuple((float(x), float(r)) for x, r in self.points)
        xs = [x for x, _ in pts]
        if any(x == 0 for x in xs):
            raise ValueError("force points must be nonzero")
        if len(set(xs)) != len(xs):
            raise ValueError("force points must be distinct")
        if self.kappa < 0:
            raise ValueError("kappa must be nonnegative")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "kappa", float(self.kappa))

    @property
    def x(self) -> np.ndarray:
        return np.array([p[0] for p in self.points], dtype=float)

    @property
    def rho(self) -> np.ndarray:
        return np.array([p[1] for p in self.points], dtype=float)

    def scaled(self, sigma: float) -> "ForceSpec":
        return ForceSpec(tuple((sigma * x, r) for x, r in self.points), self.kappa)


@dataclass(frozen=True)
class SdeConfig:
    t_max: float
    n_steps: int
    seed: int = 0
    swallow_policy: str = "halt"
    adaptive: bool = True

    def __post_init__(self):
        if not self.t_max > 0:
            raise ValueError("t_max must be positive")
        if self.n_steps < 1:
            raise ValueError("n_steps must be at least 1")
        if self.swallow_policy not in POLICIES:
            raise ValueError(f"swallow_policy must be one of {POLICIES}")

    @property
    def dt(self) -> float:
        return self.t_max / self.n_steps

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt


def noise_streams(seed: int, index: int) -> tuple[np.random.Generator, np.random.Generator]:
    """(base, refinement) generators for one path."""
    base, refine = np.random.SeedSequence([seed, index]).spawn(2)
    return np.random.default_rng(base), np.random.default_rng(refine)


def harmonic_potential(at, spec: ForceSpec):
    """``Phi(z) = -sum_j rho_j arg(z - x_j)``; jumps by ``pi rho_j`` across each source."""
    z = np.asarray(at, dtype=complex)[..., None]
    return -np.sum(spec.rho * np.angle(z - spec.x), axis=-1)


def _current(z, sources, rhos):
    # d/dy arg(z - X) = Re 1/(z - X)
    return -np.sum(rhos * np.real(1.0 / (z - sources)), axis=-1)


def harmonic_current_x(at, spec: ForceSpec):
    """x-component of the current ``d Phi / dy`` at ``at``.

    Source positions are read from ``spec`` and are taken to be already in
    tip-centred coordinates, so at the origin this equals ``sum rho_j / x_j``.
    """
    z = np.asarray(at, dtype=complex)
    if np.any(np.isin(z, spec.x.astype(complex))):
        raise ZeroDivisionError("current evaluated at a source")
    out = _current(z[..., None], spec.x, spec.rho)
    return float(out) if np.ndim(out) == 0 else out


def _drift_kr1(X: np.ndarray, rho: np.ndarray, alive: np.ndarray) -> np.ndarray:
    return np.sum(np.where(alive, rho / np.where(alive, X, 1.0), 0.0), axis=-1)


def _drift_current(X: np.ndarray, rho: np.ndarray, alive: np.ndarray) -> np.ndarray:
    return _current(0j, np.where(alive, X, np.inf), np.where(alive, rho, 0.0))


DriftFn = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]


@dataclass
class _PathState:
    W: float
    X: np.ndarray
    alive: np.ndarray
    halted: bool = False
    extra: list = field(default_factory=list)
    events: list = field(default_factory=list)


class _Integrator:
    def __init__(self, spec: ForceSpec, cfg: SdeConfig, drift: DriftFn):
        self.spec = spec
        self.cfg = cfg
        self.drift = drift
        self.rho = spec.rho
        self.sqrtk = np.sqrt(spec.kappa)

    def threshold(self, dt: float) -> float:
        return max(SWALLOW_FLOOR, np.sqrt(self.spec.kappa * dt) / 10.0)

    def needs_refinement(self, X, alive, dt):
        if not self.cfg.adaptive or self.spec.kappa == 0 or X.shape[-1] == 0:
            return np.zeros(X.shape[:-1], dtype=bool)
        near = np.where(alive, np.abs(X), np.inf).min(axis=-1)
        return near < 10.0 * np.sqrt(self.spec.kappa * dt)

    def euler(self, W, X, alive, dt, dB):
        dW = self.sqrtk * dB - self.drift(X, self.rho, alive) * dt
        with np.errstate(invalid="ignore", divide="ignore"):
            Xn = np.where(alive, X + 2.0 * dt / X - dW[..., None], np.nan)
        return W + dW, Xn

    def swallowed(self, X_old, X_new, alive, dt):
        thr = self.threshold(dt)
        with np.errstate(invalid="ignore"):
            crossed = np.sign(X_new) != np.sign(X_old)
            return alive & ((np.abs(X_new) < thr) | crossed)

    def advance(self, st: _PathState, t: float, dt: float, dB: float, depth: int, ref_rng):
        """Advance one path over ``[t, t + dt]``, halving while near a source."""
        if depth < MAX_REFINE_DEPTH and self.needs_refinement(st.X[None], st.alive[None], dt)[0]:
            xi = ref_rng.standard_normal()
            dB1 = 0.5 * dB + np.sqrt(dt / 4.0) * xi
            self.advance(st, t, dt / 2, dB1, depth + 1, ref_rng)
            if st.halted:
                return
            st.extra.append((t + dt / 2, st.W, st.X.copy()))
            self.advance(st, t + dt / 2, dt / 2, dB - dB1, depth + 1, ref_rng)
            return
        W, X = self.euler(np.array([st.W]), st.X[None], st.alive[None], dt, np.array([dB]))
        X = X[0]
        hit = self.swallowed(st.X, X, st.alive, dt)
        st.W = float(W[0])
        if hit.any():
            for j in np.flatnonzero(hit):
                st.events.append(SwallowEvent(t + dt, int(j), float(X[j])))
            if self.cfg.swallow_policy == "halt":
                st.halted = True
                return
            X = np.where(hit, np.nan, X)
            st.alive = st.alive & ~hit
        st.X = X

    def run(self, indices: Sequence[int]) -> list[DrivingPath]:
        cfg, spec = self.cfg, self.spec
        n, dt = cfg.n_steps, cfg.dt
        P, m = len(indices), len(spec.points)
        streams = [noise_streams(cfg.seed, i) for i in indices]
        dB = np.stack([b.standard_normal(n) for b, _ in streams]) * np.sqrt(dt)
        W = np.zeros(P)
        X = np.tile(spec.x, (P, 1))
        alive = np.ones((P, m), dtype=bool)
        active = np.ones(P, dtype=bool)
        last = np.full(P, n)
        rec_W = np.zeros((P, n + 1))
        rec_X = np.empty((P, m, n + 1))
        rec_X[:, :, 0] = X
        extra: dict[int, list] = {}
        events: dict[int, list] = {}
        for i in range(n):
            t = i * dt
            need = active & self.needs_refinement(X, alive, dt)
            simple = active & ~need
            if simple.any():
                Wn, Xn = self.euler(W[simple], X[simple], alive[simple], dt, dB[simple, i])
                hit = self.swallowed(X[simple], Xn, alive[simple], dt)
                W[simple], X[simple] = Wn, Xn
                if hit.any():
                    rows = np.flatnonzero(simple)
                    for r, j in zip(*np.nonzero(hit)):
                        p = rows[r]
                        events.setdefault(p, []).append(SwallowEvent(t + dt, int(j), float(Xn[r, j])))
                        if cfg.swallow_policy == "halt":
                            active[p] = False
                            last[p] = i
                        else:
                            X[p, j] = np.nan
                            alive[p, j] = False
            for p in np.flatnonzero(need):
                st = _PathState(W[p], X[p].copy(), alive[p].copy())
                self.advance(st, t, dt, dB[p, i], 0, streams[p][1])
                extra.setdefault(p, []).extend(st.extra)
                events.setdefault(p, []).extend(st.events)
                if st.halted:
                    active[p] = False
                    last[p] = i
                else:
                    W[p], X[p], alive[p] = st.W, st.X, st.alive
            rec_W[:, i + 1] = W
            rec_X[:, :, i + 1] = X
        times = cfg.times
        out = []
        for p in range(P):
            k = last[p] + 1
            ts, ws, xs = times[:k], rec_W[p, :k], rec_X[p, :, :k]
            sub = [e for e in extra.get(p, []) if e[0] < times[k - 1] or k == n + 1]
            if sub:
                ts = np.concatenate([ts, [e[0] for e in sub]])
                ws = np.concatenate([ws, [e[1] for e in sub]])
                xs = np.concatenate([xs, np.stack([e[2] for e in sub], axis=1)], axis=1)
                order = np.argsort(ts, kind="stable")
                ts, ws, xs = ts[order], ws[order], xs[:, order]
            out.append(DrivingPath(ts, ws, xs if m else None, tuple(events.get(p, ()))))
        return out


def sample_sle_driving(kappa: float, cfg: SdeConfig, index: int = 0) -> DrivingPath:
    """Brownian driving ``W = sqrt(kappa) B`` on the config's time grid."""
    if kappa < 0:
        raise ValueError("kappa must be nonnegative")
    base, _ = noise_streams(cfg.seed, index)
    dB = base.standard_normal(cfg.n_steps) * np.sqrt(cfg.dt)
    W = np.concatenate([[0.0], np.cumsum(np.sqrt(kappa) * dB)])
    return DrivingPath(cfg.times, W)


def sample_sle_ensemble(kappa: float, cfg: SdeConfig, n_paths: int, start: int = 0) -> list[DrivingPath]:
    return [sample_sle_driving(kappa, cfg, i) for i in range(start, start + n_paths)]


def sample_ensemble(
    spec: ForceSpec, cfg: SdeConfig, n_paths: int, route: str = "kr1", start: int = 0, batch: int = 2000
) -> list[DrivingPath]:
    """Paths ``start .. start + n_paths - 1`` integrated in batches.

    ``route`` selects the drift evaluation: ``"kr1"`` sums ``rho_j / X_j``
    directly, ``"current"`` evaluates the harmonic current at the tip.
    """
    drift = {"kr1": _drift_kr1, "current": _drift_current}[route]
    integ = _Integrator(spec, cfg, drift)
    out: list[DrivingPath] = []
    for lo in range(start, start + n_paths, batch):
        hi = min(lo + batch, start + n_paths)
        out.extend(integ.run(range(lo, hi)))
    return out


def sample_sle_rho_driving(spec: ForceSpec, cfg: SdeConfig, index: int = 0) -> DrivingPath:
    """Euler-Maruyama path of ``dW = sqrt(kappa) dB - sum rho_j dt / X_j``, ``dX_j = 2 dt / X_j - dW``."""
    return _Integrator(spec, cfg, _drift_kr1).run([index])[0]


def sample_via_current(spec: ForceSpec, cfg: SdeConfig, index: int = 0) -> DrivingPath:
    """Same process written as ``dW = sqrt(kappa) dB - J^x(0) dt`` with the harmonic current."""
    return _Integrator(spec, cfg, _drift_current).run([index])[0]
