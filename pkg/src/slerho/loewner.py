"""Forward chordal Loewner evolution in the upper half-plane.

The driving function is treated as piecewise constant on each time step, so
every step is the exact vertical-slit map

    z -> w + sqrt((z - w)**2 + 4 * dt)

and a chain of steps composes exactly to a conformal map. Points are carried
in absolute ``g`` coordinates internally; the public evaluation returns the
tip-centred map ``g_t(z) - W_t``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = [
    "DrivingPath",
    "HullError",
    "BranchError",
    "LoewnerChain",
    "SwallowEvent",
    "Trace",
    "capacity_of",
    "chain_from_path",
    "compute_trace",
    "elementary_slit_map",
    "fit_expansion",
    "forward_evaluate",
    "inverse_slit_map",
]

ALGEBRAIC_TOL = 1e-12
TRACE_TOL = 1e-4


class HullError(ValueError):
    """A point lies on (or inside) the hull removed by the chain."""


class BranchError(ArithmeticError):
    """An inverse step left the closed upper half-plane."""


@dataclass(frozen=True)
class SwallowEvent:
    time: float
    index: int
    position: float


@dataclass(frozen=True, eq=False)
class DrivingPath:
    """Time-discretised driving function with optional force-point tracks.

    ``force_tracks`` has shape ``(n_force, len(times))``. A dropped force
    point is recorded as NaN from the step it was swallowed.
    """

    times: np.ndarray
    values: np.ndarray
    force_tracks: np.ndarray | None = None
    events: tuple[SwallowEvent, ...] = field(default=())

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if times.ndim != 1 or values.shape != times.shape:
            raise ValueError("times and values must be 1-d arrays of equal length")
        if times.size == 0 or times[0] != 0.0:
            raise ValueError("times must start at 0")
        if np.any(np.diff(times) <= 0):
            raise ValueError("times must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        if self.force_tracks is not None:
            tracks = np.atleast_2d(np.asarray(self.force_tracks, dtype=float))
            if tracks.shape[1] != times.size:
                raise ValueError("force tracks must have the same length as times")
            if np.any(tracks == 0.0):
                raise ValueError("a recorded force point sits at 0 (swallowed)")
            object.__setattr__(self, "force_tracks", tracks)
        object.__setattr__(self, "events", tuple(self.events))
        for arr in (self.times, self.values, self.force_tracks):
            if arr is not None:
                arr.setflags(write=False)

    def __len__(self) -> int:
        return self.times.size

    @property
    def t_total(self) -> float:
        return float(self.times[-1])

    def __eq__(self, other):
        if not isinstance(other, DrivingPath):
            return NotImplemented
        if (self.force_tracks is None) != (other.force_tracks is None):
            return False
        same_tracks = self.force_tracks is None or np.array_equal(
            self.force_tracks, other.force_tracks, equal_nan=True
        )
        return (
            np.array_equal(self.times, other.times)
            and np.array_equal(self.values, other.values)
            and same_tracks
            and self.events == other.events
        )

    def value_at(self, t):
        """Linear interpolation of W in capacity time."""
        return np.interp(t, self.times, self.values)

    def rescaled(self, sigma: float) -> "DrivingPath":
        """Path of ``sigma * W_{t / sigma**2}``, the driving of the curve ``sigma * gamma``."""
        tracks = None if self.force_tracks is None else sigma * self.force_tracks
        return DrivingPath(sigma**2 * self.times, sigma * self.values, tracks)


@dataclass(frozen=True, eq=False)
class LoewnerChain:
    """Sequence of elementary vertical-slit steps ``(dt_i, w_i)``."""

    dts: np.ndarray
    offsets: np.ndarray

    def __post_init__(self):
        dts = np.asarray(self.dts, dtype=float).reshape(-1)
        offsets = np.asarray(self.offsets, dtype=float).reshape(-1)
        if dts.shape != offsets.shape:
            raise ValueError("dts and offsets must have equal length")
        if np.any(dts <= 0):
            raise ValueError("capacity increments must be positive")
        dts.setflags(write=False)
        offsets.setflags(write=False)
        object.__setattr__(self, "dts", dts)
        object.__setattr__(self, "offsets", offsets)

    def __len__(self) -> int:
        return self.dts.size

    def __add__(self, other: "LoewnerChain") -> "LoewnerChain":
        return LoewnerChain(
            np.concatenate([self.dts, other.dts]),
            np.concatenate([self.offsets, other.offsets]),
        )

    @property
    def final_offset(self) -> float:
        return float(self.offsets[-1]) if len(self) else 0.0


@dataclass(frozen=True, eq=False)
class Trace:
    """Points of the curve at the step times; ``points[0] == 0``."""

    times: np.ndarray
    points: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        points = np.asarray(self.points, dtype=complex)
        if times.shape != points.shape:
            raise ValueError("times and points must have equal length")
        if points.size and points[0] != 0:
            raise ValueError("a trace starts at the origin")
        if np.any(points.imag < 0):
            raise ValueError("trace points must lie in the closed upper half-plane")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "points", points)

    def __len__(self) -> int:
        return self.points.size

    @property
    def tip(self) -> complex:
        return complex(self.points[-1])


def _slit(zeta, dt):
    """``sqrt(zeta**2 + 4 dt)`` on the branch mapping H minus the slit onto H."""
    zeta = np.asarray(zeta, dtype=complex)
    h = 2j * np.sqrt(dt)
    # factored form: exact zero at the tip, no cancellation near it
    root = np.sqrt(zeta - h) * np.sqrt(zeta + h)
    upper = zeta.imag > 0
    # open H: principal root is never real there, flip into H
    root = np.where(upper & (root.imag < 0), -root, root)
    on_axis = ~upper
    if np.any(on_axis):
        x = zeta.real
        real_root = np.sign(x) * np.sqrt(np.maximum(x * x + 4.0 * dt, 0.0))
        root = np.where(on_axis, real_root + 0j, root)
    return root


def elementary_slit_map(z, dt: float, w: float):
    """Tip-centred image of ``z`` under one step of constant driving ``w``.

    Returns ``sqrt((z - w)**2 + 4*dt)`` with the branch that maps the
    complement of the slit ``[w, w + 2i sqrt(dt)]`` onto the upper
    half-plane. The tip ``w + 2i sqrt(dt)`` maps to 0.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    zeta = np.asarray(z, dtype=complex) - w
    height = 2.0 * np.sqrt(dt)
    if np.any(zeta.imag < 0):
        raise HullError("point below the real axis")
    inside = (zeta.real == 0) & (zeta.imag > 0) & (zeta.imag < height)
    if np.any(inside):
        raise HullError("point lies on the removed slit")
    out = _slit(zeta, dt)
    return complex(out) if out.ndim == 0 else out


def inverse_slit_map(u, dt: float, w: float, tol: float = ALGEBRAIC_TOL):
    """Inverse of :func:`elementary_slit_map`: absolute preimage of tip-centred ``u``."""
    u = np.asarray(u, dtype=complex)
    if np.any(u.imag < -tol):
        raise BranchError("inverse step applied below the real axis")
    u = u.real + 1j * np.maximum(u.imag, 0.0)
    root = np.sqrt(u * u - 4.0 * dt)
    root = np.where(root.imag < 0, -root, root)
    on_axis = u.imag == 0
    if np.any(on_axis):
        x = u.real
        outside = np.abs(x) * np.abs(x) >= 4.0 * dt
        real_root = np.where(
            outside,
            np.sign(x) * np.sqrt(np.maximum(x * x - 4.0 * dt, 0.0)) + 0j,
            1j * np.sqrt(np.maximum(4.0 * dt - x * x, 0.0)),
        )
        root = np.where(on_axis, real_root, root)
    out = w + root
    return complex(out) if out.ndim == 0 else out


def chain_from_path(path: DrivingPath) -> LoewnerChain:
    """Step ``i`` uses the driving value at the end of ``[t_{i-1}, t_i]``."""
    return LoewnerChain(np.diff(path.times), path.values[1:])


def capacity_of(chain: LoewnerChain) -> float:
    return float(np.sum(chain.dts))


def _forward_absolute(chain: LoewnerChain, z):
    g = np.asarray(z, dtype=complex).copy()
    for dt, w in zip(chain.dts, chain.offsets):
        zeta = g - w
        height = 2.0 * np.sqrt(dt)
        hit = (np.abs(zeta.real) <= 1e-15 * max(1.0, height)) & (zeta.imag > 0) & (
            zeta.imag < height * (1 - 1e-15)
        )
        if np.any(hit):
            raise HullError("point enters the hull during forward evaluation")
        g = w + _slit(zeta, dt)
    return g


def forward_evaluate(chain: LoewnerChain, z):
    """Evaluate ``g_t(z) - W_t`` for the full chain (identity for an empty chain)."""
    z = np.asarray(z, dtype=complex)
    if np.any(z.imag < 0):
        raise HullError("z must lie in the closed upper half-plane")
    out = _forward_absolute(chain, z) - chain.final_offset
    return complex(out) if out.ndim == 0 else out


def compute_trace(path: DrivingPath | LoewnerChain, tol: float = TRACE_TOL) -> Trace:
    """Curve tips ``gamma(t_i)`` by unwinding the steps from each tip image.

    Cost is quadratic in the number of steps; all tips are pulled back
    together so each inverse step is one vectorised operation.
    """
    chain = path if isinstance(path, LoewnerChain) else chain_from_path(path)
    n = len(chain)
    times = np.concatenate([[0.0], np.cumsum(chain.dts)])
    if n == 0:
        return Trace(times, np.zeros(1, dtype=complex))
    pts = chain.offsets + 2j * np.sqrt(chain.dts)
    for j in range(n - 2, -1, -1):
        tail = pts[j + 1 :]
        if np.any(tail.imag < -tol):
            raise BranchError(f"inverse step {j + 1} left the upper half-plane")
        pts[j + 1 :] = inverse_slit_map(tail - chain.offsets[j], chain.dts[j], chain.offsets[j], tol=tol)
    return Trace(times, np.concatenate([[0j], pts]))


def fit_expansion(chain: LoewnerChain, radius: float = 1e4, n_points: int = 64) -> np.ndarray:
    """Laurent coefficients of ``g_t - W_t`` at infinity.

    Samples the upper semicircle of the given radius, completes it by
    Schwarz reflection and reads off coefficients by FFT. Returns
    ``[c_1, c_0, c_{-1}, c_{-2}, ...]`` (``n_points // 2`` entries) so that
    ``c_1 ~ 1``, ``c_0 = -W_t`` and ``c_{-1} ~ 2 t``.
    """
    theta = 2 * np.pi * np.arange(n_points) / n_points
    z = radius * np.exp(1j * theta)
    upper = z.imag >= 0
    vals = np.empty(n_points, dtype=complex)
    zu = z[upper].real + 1j * np.maximum(z[upper].imag, 0.0)
    vals[upper] = forward_evaluate(chain, zu)
    vals[~upper] = np.conj(forward_evaluate(chain, np.conj(z[~upper])))
    coeffs = np.fft.fft(vals) / n_points  # coeffs[k] ~ c_k R^k (k mod n)
    half = n_points // 2
    out = [coeffs[1] / radius, coeffs[0]]
    for k in range(1, half - 1):
        out.append(coeffs[-k] * radius**k)
    return np.array(out)


def concatenate(chains: Sequence[LoewnerChain]) -> LoewnerChain:
    out = LoewnerChain(np.empty(0), np.empty(0))
    for c in chains:
        out = out + c
    return out
