"""Gaussian free field on a triangular-lattice half-disk.

Sites are ``(a + (b + 1) / 2) + i b sqrt(3) / 2`` with ``b >= 0`` and
``|z| <= R``: the real-axis row sits at half-integers, so a boundary jump at
the origin falls between the two sites at ``-1/2`` and ``1/2`` and the
lattice is exactly symmetric under ``x -> -x``.

Field units follow the continuum action ``(g / 4 pi) int (grad phi)^2``: a
boundary jump of amplitude ``lam`` is a discontinuity of ``2 pi lam``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.spatial import cKDTree

__all__ = [
    "BoundaryData",
    "CalibrationResult",
    "FieldSample",
    "FitQualityError",
    "LatticeDomain",
    "SolverError",
    "analytic_lattice_coupling",
    "calibrate_lattice_coupling",
    "continuum_green_half_disk",
    "continuum_harmonic",
    "lambda_star",
    "sample_field",
    "sample_fields",
    "sample_fluctuation",
    "solve_harmonic_part",
]

SQ3 = np.sqrt(3.0)
NEIGHBOR_OFFSETS = ((1, 0), (-1, 0), (0, 1), (-1, 1), (0, -1), (1, -1))
MIN_CALIBRATION_RADIUS = 32


class SolverError(RuntimeError):
    pass


class FitQualityError(RuntimeError):
    pass


def lambda_star(g: float) -> float:
    """Jump amplitude ``(4 g)^(-1/2)`` at which the level line is SLE_4."""
    if g <= 0:
        raise ValueError("coupling must be positive")
    return 1.0 / np.sqrt(4.0 * g)


def analytic_lattice_coupling(g: float) -> float:
    """Covariance prefactor of the cotangent-weight discretisation, ``2 pi sqrt(3) / g``."""
    return 2.0 * np.pi * SQ3 / g


@dataclass(frozen=True)
class BoundaryData:
    """Boundary jumps ``(x_j, lam_j)`` and the coupling ``g``."""

    jumps: tuple[tuple[float, float], ...]
    g: float = 1.0

    def __post_init__(self):
        jumps = tuple((float(x), float(lam)) for x, lam in self.jumps)
        xs = [x for x, _ in jumps]
        if len(set(xs)) != len(xs):
            raise ValueError("jump positions must be distinct")
        if not self.g > 0:
            raise ValueError("coupling must be positive")
        object.__setattr__(self, "jumps", jumps)

    @property
    def x(self) -> np.ndarray:
        return np.array([j[0] for j in self.jumps])

    @property
    def lam(self) -> np.ndarray:
        return np.array([j[1] for j in self.jumps])

    def axis_value(self, x):
        """Real-axis boundary value; at a jump point the right-hand value is used."""
        x = np.asarray(x, dtype=float)[..., None]
        return -2.0 * np.pi * np.sum(self.lam * (x < self.x), axis=-1)

    def negated(self) -> "BoundaryData":
        return BoundaryData(tuple((x, -lam) for x, lam in self.jumps), self.g)


def continuum_harmonic(z, bc: BoundaryData):
    """``-2 sum_j lam_j arg(z - x_j)`` in the closed upper half-plane."""
    z = np.asarray(z, dtype=complex)
    if np.any(z.imag < 0):
        raise ValueError("z must lie in the closed upper half-plane")
    d = z[..., None] - bc.x
    if np.any(d == 0):
        raise ZeroDivisionError("harmonic part is singular at a jump point")
    arg = np.angle(d)
    arg = np.where((d.imag == 0) & (d.real < 0), np.pi, arg)  # -0.0 imag edge case
    out = -2.0 * np.sum(bc.lam * arg, axis=-1)
    return float(out) if out.ndim == 0 else out


def continuum_green_half_disk(z, w, g: float, radius: float):
    """Dirichlet Green's function of the half-disk for ``(g / 4 pi) int (grad phi)^2``."""
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    R2 = radius * radius
    return -(1.0 / g) * (
        np.log(np.abs(z - w))
        - np.log(np.abs(z - np.conj(w)))
        - np.log(np.abs(R2 - z * np.conj(w)))
        + np.log(np.abs(R2 - z * w))
    )


class LatticeDomain:
    """Half-disk of radius ``R`` on the triangular lattice with its Dirichlet Laplacian.

    The sparse factorisation of the interior Laplacian is built lazily and
    shared by the harmonic solve and the fluctuation sampler.
    """

    def __init__(self, radius: int):
        if radius < 2:
            raise ValueError("radius too small")
        self.radius = int(radius)
        R = self.radius
        bmax = int(np.floor(2 * R / SQ3))
        a_list, b_list = [], []
        for b in range(bmax + 1):
            y = b * SQ3 / 2
            half = np.sqrt(max(R * R - y * y, 0.0))
            shift = (b + 1) / 2
            lo = int(np.ceil(-half - shift))
            hi = int(np.floor(half - shift))
            a = np.arange(lo, hi + 1)
            a_list.append(a)
            b_list.append(np.full(a.size, b))
        self.a = np.concatenate(a_list)
        self.b = np.concatenate(b_list)
        self.z = (self.a + (self.b + 1) / 2) + 1j * self.b * SQ3 / 2
        keep = np.abs(self.z) <= R + 1e-9
        self.a, self.b, self.z = self.a[keep], self.b[keep], self.z[keep]
        self._index = {(int(a), int(b)): i for i, (a, b) in enumerate(zip(self.a, self.b))}
        nb = np.full((self.size, 6), -1, dtype=np.int64)
        for k, (da, db) in enumerate(NEIGHBOR_OFFSETS):
            for i, (a, b) in enumerate(zip(self.a, self.b)):
                nb[i, k] = self._index.get((int(a + da), int(b + db)), -1)
        self.neighbors = nb
        self.axis_boundary = self.b == 0
        self.is_boundary = self.axis_boundary | np.any(nb < 0, axis=1)
        self.arc_boundary = self.is_boundary & ~self.axis_boundary
        self.interior = np.flatnonzero(~self.is_boundary)
        self.boundary = np.flatnonzero(self.is_boundary)
        self._interior_pos = np.full(self.size, -1, dtype=np.int64)
        self._interior_pos[self.interior] = np.arange(self.interior.size)
        self.kappa_lat: dict[float, float] = {}

    @property
    def size(self) -> int:
        return self.z.size

    def site(self, a: int, b: int) -> int:
        return self._index[(a, b)]

    def has_site(self, a: int, b: int) -> bool:
        return (a, b) in self._index

    @cached_property
    def _tree(self) -> cKDTree:
        return cKDTree(np.column_stack([self.z.real, self.z.imag]))

    def nearest_site(self, z) -> np.ndarray | int:
        z = np.asarray(z, dtype=complex)
        _, idx = self._tree.query(np.column_stack([z.ravel().real, z.ravel().imag]))
        return int(idx[0]) if z.ndim == 0 else idx.reshape(z.shape)

    @cached_property
    def laplacian(self) -> sp.csc_matrix:
        """Interior Dirichlet graph Laplacian (6 on the diagonal)."""
        rows, cols = [], []
        for k in range(6):
            nbk = self.neighbors[self.interior, k]
            pos = self._interior_pos[nbk]
            inner = pos >= 0
            rows.append(np.flatnonzero(inner))
            cols.append(pos[inner])
        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        n = self.interior.size
        off = sp.csc_matrix((-np.ones(rows.size), (rows, cols)), shape=(n, n))
        return (off + 6.0 * sp.identity(n, format="csc")).tocsc()

    @cached_property
    def incidence(self) -> sp.csr_matrix:
        """``B`` with ``B @ B.T == laplacian``: one column per edge touching the interior."""
        cols_r, cols_c, vals = [], [], []
        e = 0
        for i_pos, i in enumerate(self.interior):
            for k in range(6):
                j = self.neighbors[i, k]
                j_pos = self._interior_pos[j]
                if j_pos >= 0:
                    if j_pos < i_pos:
                        continue
                    cols_r += [i_pos, j_pos]
                    cols_c += [e, e]
                    vals += [1.0, -1.0]
                else:
                    cols_r.append(i_pos)
                    cols_c.append(e)
                    vals.append(1.0)
                e += 1
        return sp.csr_matrix((vals, (cols_r, cols_c)), shape=(self.interior.size, e))

    @cached_property
    def factor(self):
        try:
            return spla.splu(self.laplacian, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0)
        except RuntimeError as exc:  # singular: disconnected or empty interior
            raise SolverError(str(exc)) from exc

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return self.factor.solve(np.asarray(rhs, dtype=float))

    def boundary_values(self, bc: BoundaryData) -> np.ndarray:
        """Per-site array with boundary data filled in and zeros in the interior."""
        vals = np.zeros(self.size)
        ax = self.axis_boundary
        vals[ax] = bc.axis_value(self.z[ax].real)
        arc = self.arc_boundary
        vals[arc] = continuum_harmonic(self.z[arc], bc)
        return vals

    def inverse_columns(self, sites: Sequence[int]) -> np.ndarray:
        """Columns of the inverse interior Laplacian for the given (interior) sites."""
        pos = self._interior_pos[np.asarray(sites)]
        if np.any(pos < 0):
            raise ValueError("inverse columns requested for a boundary site")
        rhs = np.zeros((self.interior.size, pos.size))
        rhs[pos, np.arange(pos.size)] = 1.0
        cols = np.zeros((self.size, pos.size))
        cols[self.interior] = self.solve(rhs)
        return cols

    def harmonic_extension(self, values: np.ndarray, fixed: np.ndarray) -> np.ndarray:
        """Discrete harmonic extension of ``values`` on the ``fixed`` mask into the rest.

        ``fixed`` must contain every boundary site.
        """
        fixed = np.asarray(fixed, dtype=bool)
        if not np.all(fixed[self.boundary]):
            raise ValueError("boundary sites must be fixed")
        free = np.flatnonzero(~fixed)
        out = np.where(fixed, values, 0.0)
        if free.size == 0:
            return out
        pos = np.full(self.size, -1, dtype=np.int64)
        pos[free] = np.arange(free.size)
        rows, cols, rhs = [], [], np.zeros(free.size)
        for k in range(6):
            nbk = self.neighbors[free, k]
            p = pos[nbk]
            inner = p >= 0
            rows.append(np.flatnonzero(inner))
            cols.append(p[inner])
            outer = ~inner
            rhs[outer] += out[nbk[outer]]
        A = sp.csc_matrix(
            (-np.ones(sum(r.size for r in rows)), (np.concatenate(rows), np.concatenate(cols))),
            shape=(free.size, free.size),
        ) + 6.0 * sp.identity(free.size, format="csc")
        out[free] = spla.spsolve(A.tocsc(), rhs)
        return out

    def mean_value_residual(self, values: np.ndarray) -> float:
        nb = self.neighbors[self.interior]
        return float(np.max(np.abs(6.0 * values[self.interior] - values[nb].sum(axis=1)))) if self.interior.size else 0.0


def solve_harmonic_part(dom: LatticeDomain, bc: BoundaryData) -> np.ndarray:
    """Discrete harmonic function with the boundary data of ``bc`` (arc values from the continuum)."""
    vals = dom.boundary_values(bc)
    nb = dom.neighbors[dom.interior]
    rhs = np.zeros(dom.interior.size)
    on_bnd = dom.is_boundary[nb]
    rhs += np.where(on_bnd, vals[nb], 0.0).sum(axis=1)
    vals[dom.interior] = dom.solve(rhs)
    return vals


@dataclass
class CalibrationResult:
    kappa_lat: float
    relative_residual: float
    holdout_error: float
    n_pairs: int
    radius: int
    g: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _probe_sites(dom: LatticeDomain) -> np.ndarray:
    R = dom.radius
    xs = np.array([-0.4, -0.2, 0.0, 0.2, 0.4]) * R
    ys = np.array([0.15, 0.3, 0.45, 0.6]) * R
    pts = (xs[:, None] + 1j * ys[None, :]).ravel()
    return np.unique(dom.nearest_site(pts))


def calibrate_lattice_coupling(
    g: float,
    R: int | LatticeDomain,
    method: str = "exact",
    n_samples: int = 4000,
    seed: int = 0,
    max_residual: float = 0.05,
) -> CalibrationResult:
    """Fit ``kappa_lat`` so that ``kappa_lat * L^-1`` matches the continuum Green's function.

    Probe sites form a bulk grid at fixed fractions of ``R``; distinct-site
    pairs are fitted by least squares, with even-indexed pairs as the
    training set and odd-indexed pairs held out. ``method="exact"`` uses the
    exact sampler covariance (columns of ``L^-1``); ``"sampled"`` uses the
    empirical covariance of ``n_samples`` unit-coupling samples.
    """
    dom = R if isinstance(R, LatticeDomain) else LatticeDomain(R)
    if dom.radius < MIN_CALIBRATION_RADIUS:
        raise ValueError(f"calibration needs R >= {MIN_CALIBRATION_RADIUS}")
    sites = _probe_sites(dom)
    if method == "exact":
        cov = dom.inverse_columns(sites)[sites]
    elif method == "sampled":
        samples = np.stack(
            [s[sites] for s in _raw_samples(dom, seed, range(n_samples))]
        )
        cov = np.cov(samples, rowvar=False)
    else:
        raise ValueError("method must be 'exact' or 'sampled'")
    iu, ju = np.triu_indices(sites.size, k=1)
    lat = cov[iu, ju]
    cont = continuum_green_half_disk(dom.z[sites][iu], dom.z[sites][ju], g, dom.radius)
    train = np.arange(lat.size) % 2 == 0
    k_fit = float(cont[train] @ lat[train] / (lat[train] @ lat[train]))
    resid = float(np.linalg.norm(cont - k_fit * lat) / np.linalg.norm(cont))
    hold = float(np.max(np.abs(cont[~train] - k_fit * lat[~train]) / np.abs(cont[~train])))
    if resid > max_residual:
        raise FitQualityError(f"relative residual {resid:.3g} exceeds {max_residual}")
    dom.kappa_lat[g] = k_fit
    return CalibrationResult(k_fit, resid, hold, int(lat.size), dom.radius, g)


def _raw_samples(dom: LatticeDomain, seed: int, indices, batch: int = 64) -> Iterator[np.ndarray]:
    """Unit-prefactor fluctuation samples (covariance ``L^-1``), one substream per index."""
    B = dom.incidence
    indices = list(indices)
    for lo in range(0, len(indices), batch):
        chunk = indices[lo : lo + batch]
        xi = np.stack(
            [np.random.default_rng(np.random.SeedSequence([seed, i])).standard_normal(B.shape[1]) for i in chunk],
            axis=1,
        )
        sol = dom.solve(B @ xi)
        for c in range(len(chunk)):
            full = np.zeros(dom.size)
            full[dom.interior] = sol[:, c]
            yield full


def _kappa_for(dom: LatticeDomain, g: float, kappa_lat: float | None) -> float:
    if kappa_lat is not None:
        return kappa_lat
    if g not in dom.kappa_lat:
        if dom.radius >= MIN_CALIBRATION_RADIUS:
            calibrate_lattice_coupling(g, dom)
        else:
            dom.kappa_lat[g] = analytic_lattice_coupling(g)
    return dom.kappa_lat[g]


def sample_fluctuation(
    dom: LatticeDomain, g: float, seed: int, index: int = 0, kappa_lat: float | None = None
) -> np.ndarray:
    """Zero-boundary Gaussian field with covariance ``kappa_lat * L^-1``.

    Draws white noise on the edges and solves ``L x = B xi``, which has
    covariance ``L^-1`` because ``B B^T = L``.
    """
    k = _kappa_for(dom, g, kappa_lat)
    return np.sqrt(k) * next(_raw_samples(dom, seed, [index]))


@dataclass
class FieldSample:
    harmonic_part: np.ndarray
    fluctuation: np.ndarray
    domain: LatticeDomain = field(repr=False)
    boundary: BoundaryData | None = None
    seed: int | None = None
    index: int | None = None
    kappa_lat: float | None = None

    @property
    def total(self) -> np.ndarray:
        return self.harmonic_part + self.fluctuation

    @classmethod
    def deterministic(cls, dom: LatticeDomain, values: np.ndarray) -> "FieldSample":
        """Noise-free field with arbitrary site values (used for fixtures and controls)."""
        return cls(np.asarray(values, dtype=float), np.zeros(dom.size), dom)


def sample_fields(
    dom: LatticeDomain,
    bc: BoundaryData,
    seed: int,
    n: int,
    start: int = 0,
    kappa_lat: float | None = None,
    noise: bool = True,
) -> Iterator[FieldSample]:
    """Fields for sample indices ``start .. start + n - 1``; ``noise=False`` gives the harmonic part only."""
    harmonic = solve_harmonic_part(dom, bc)
    if not noise:
        for i in range(start, start + n):
            yield FieldSample(harmonic, np.zeros(dom.size), dom, bc, seed, i, 0.0)
        return
    k = _kappa_for(dom, bc.g, kappa_lat)
    scale = np.sqrt(k)
    for i, raw in zip(range(start, start + n), _raw_samples(dom, seed, range(start, start + n))):
        yield FieldSample(harmonic, scale * raw, dom, bc, seed, i, k)


def sample_field(dom: LatticeDomain, bc: BoundaryData, seed: int, index: int = 0, kappa_lat: float | None = None) -> FieldSample:
    return next(sample_fields(dom, bc, seed, 1, start=index, kappa_lat=kappa_lat))
