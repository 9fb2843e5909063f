"""Inverse Loewner transform and ensemble estimators for driving functions."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .loewner import DrivingPath, Trace, _slit

__all__ = [
    "DegenerateStepError",
    "DriftEstimate",
    "InsufficientEnsembleError",
    "KappaEstimate",
    "common_grid",
    "decimate_midpoints",
    "estimate_drift",
    "estimate_kappa",
    "extract_driving",
    "resolution_error",
    "round_trip_error",
]

MIN_ENSEMBLE = 30


class DegenerateStepError(ValueError):
    """The next curve point did not map strictly into the upper half-plane."""


class InsufficientEnsembleError(ValueError):
    pass


def _as_points(curve) -> np.ndarray:
    if isinstance(curve, Trace):
        pts = curve.points
    else:
        pts = np.asarray(curve, dtype=complex)
    if pts.ndim != 1 or pts.size < 2:
        raise ValueError("a curve needs at least two points")
    if pts[0] != 0:
        raise ValueError("curve must start at the origin")
    return pts


def _map_point(z: complex, dts: list, ws: list) -> complex:
    g = np.array(z, dtype=complex)
    for dt, w in zip(dts, ws):
        g = w + _slit(g - w, dt)
    return complex(g)


def extract_driving(curve, max_step_capacity: float | None = None, max_bisections: int = 16) -> DrivingPath:
    """Unzip a simple curve from 0 into a driving function.

    Each curve point, mapped through the steps emitted so far, gives the
    next vertical slit: ``dt = (Im w)**2 / 4`` and ``W = Re w``. With
    ``max_step_capacity`` set, a step exceeding the bound is split by
    inserting the midpoint of the corresponding polyline segment.
    """
    pts = _as_points(curve)
    remaining = pts[1:].copy()  # images of the unconsumed points
    dts: list[float] = []
    ws: list[float] = []
    prev = 0j  # original coordinates of the last consumed point
    total = 0.0
    k = 0
    while k < remaining.size:
        target = remaining[k]
        orig = pts[k + 1]
        if max_step_capacity is not None:
            depth = 0
            while (target.imag**2) / 4.0 > max_step_capacity and depth < max_bisections:
                orig = 0.5 * (prev + orig)
                target = _map_point(orig, dts, ws)
                depth += 1
            if depth:
                # consume the inserted point, then retry the original one
                if target.imag <= 0:
                    raise DegenerateStepError(f"inserted point before index {k + 1} collapsed onto the axis")
                dt, w = target.imag**2 / 4.0, target.real
                total += dt
                dts.append(dt)
                ws.append(w)
                remaining[k:] = w + _slit(remaining[k:] - w, dt)
                prev = orig
                continue
        if not target.imag > 0:
            raise DegenerateStepError(f"point {k + 1} maps to Im <= 0; curve not simple or collapsed")
        dt, w = target.imag**2 / 4.0, target.real
        if total + dt == total:
            # below float resolution of the running capacity: nothing to unzip
            k += 1
            continue
        total += dt
        dts.append(dt)
        ws.append(w)
        if k + 1 < remaining.size:
            remaining[k + 1 :] = w + _slit(remaining[k + 1 :] - w, dt)
        prev = pts[k + 1]
        k += 1
    times = np.concatenate([[0.0], np.cumsum(dts)])
    return DrivingPath(times, np.concatenate([[0.0], ws]))


def decimate_midpoints(points) -> np.ndarray:
    """Replace consecutive point pairs by their midpoints, keeping the origin.

    Removes lattice-scale zigzag from interface curves before unzipping.
    """
    pts = np.asarray(points, dtype=complex)
    body = pts[1:]
    m = body.size // 2
    mids = 0.5 * (body[0 : 2 * m : 2] + body[1 : 2 * m : 2])
    if body.size % 2:
        mids = np.concatenate([mids, body[-1:]])
    return np.concatenate([[0j], mids])


def round_trip_error(path: DrivingPath, trace: Trace | None = None) -> float:
    """Sup-difference between ``path`` and the driving unzipped from its own trace."""
    from .loewner import compute_trace

    trace = compute_trace(path) if trace is None else trace
    back = extract_driving(trace)
    return float(np.max(np.abs(back.values - path.value_at(back.times))))


def resolution_error(reference: DrivingPath, trace: Trace, n: int) -> float:
    """Unzipping error when the reference curve is only known at ``n`` points.

    ``trace`` is the fine trace of ``reference``; every ``len/n``-th point is
    kept and unzipped, and the driving value recovered at each kept point is
    compared with the reference value at that point's time.
    """
    n_fine = len(trace) - 1
    if n_fine % n:
        raise ValueError("n must divide the reference step count")
    stride = n_fine // n
    back = extract_driving(trace.points[::stride])
    return float(np.max(np.abs(back.values - reference.values[::stride])))


def common_grid(paths: Sequence[DrivingPath], n_grid: int = 50, t_max: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Resample an ensemble onto ``n_grid`` equally spaced capacity times.

    Default horizon is the shortest path in the ensemble.
    """
    if t_max is None:
        t_max = min(p.t_total for p in paths)
    grid = np.linspace(0.0, t_max, n_grid + 1)
    values = np.stack([np.interp(grid, p.times, p.values) for p in paths])
    return grid, values


@dataclass
class KappaEstimate:
    kappa: float
    stderr: float
    n_paths: int
    grid: np.ndarray = field(repr=False)
    variance: np.ndarray = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "kappa_hat": self.kappa,
            "stderr": self.stderr,
            "n_paths": self.n_paths,
            "t_max": float(self.grid[-1]),
            "n_grid": int(self.grid.size - 1),
        }


def _slope_through_origin(t: np.ndarray, var: np.ndarray) -> np.ndarray:
    return (var @ t) / (t @ t)


def estimate_kappa(
    paths: Sequence[DrivingPath],
    n_grid: int = 50,
    t_max: float | None = None,
    n_boot: int = 200,
    seed: int = 0,
) -> KappaEstimate:
    """Slope of the ensemble variance of W_t against t, through the origin.

    The standard error comes from a path-level bootstrap.
    """
    if len(paths) < MIN_ENSEMBLE:
        raise InsufficientEnsembleError(f"need at least {MIN_ENSEMBLE} paths, got {len(paths)}")
    grid, values = common_grid(paths, n_grid, t_max)
    t = grid[1:]
    vals = values[:, 1:]
    var = vals.var(axis=0, ddof=1)
    kappa = float(_slope_through_origin(t, var))
    rng = np.random.default_rng(seed)
    n = vals.shape[0]
    boots = np.empty(n_boot)
    for b in range(n_boot):
        idx = rng.integers(0, n, n)
        boots[b] = _slope_through_origin(t, vals[idx].var(axis=0, ddof=1))
    return KappaEstimate(kappa, float(boots.std(ddof=1)), n, grid, np.concatenate([[0.0], var]))


@dataclass
class DriftEstimate:
    """Per-grid-time mean increment rate plus a pooled rate over the window."""

    times: np.ndarray
    rate: np.ndarray
    stderr: np.ndarray
    pooled_rate: float
    pooled_stderr: float
    window: tuple[float, float]
    n_paths: int

    def to_dict(self) -> dict:
        return {
            "window": list(self.window),
            "pooled_rate": self.pooled_rate,
            "pooled_stderr": self.pooled_stderr,
            "n_paths": self.n_paths,
            "times": self.times.tolist(),
            "rate": self.rate.tolist(),
            "stderr": self.stderr.tolist(),
        }


def estimate_drift(
    paths: Sequence[DrivingPath], window: tuple[float, float], n_grid: int = 10
) -> DriftEstimate:
    """Mean of ``(W_{t+h} - W_t) / h`` across the ensemble on a grid spanning ``window``."""
    if len(paths) < MIN_ENSEMBLE:
        raise InsufficientEnsembleError(f"need at least {MIN_ENSEMBLE} paths, got {len(paths)}")
    t0, t1 = window
    if not t1 > t0:
        raise ValueError("empty drift window")
    grid = np.linspace(t0, t1, n_grid + 1)
    values = np.stack([np.interp(grid, p.times, p.values) for p in paths])
    h = np.diff(grid)
    inc = np.diff(values, axis=1) / h
    n = values.shape[0]
    rate = inc.mean(axis=0)
    stderr = inc.std(axis=0, ddof=1) / np.sqrt(n)
    pooled = (values[:, -1] - values[:, 0]) / (t1 - t0)
    return DriftEstimate(
        grid[:-1],
        rate,
        stderr,
        float(pooled.mean()),
        float(pooled.std(ddof=1) / np.sqrt(n)),
        (float(t0), float(t1)),
        n,
    )
