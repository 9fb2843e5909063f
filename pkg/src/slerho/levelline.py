"""Level lines of lattice fields and the field jump measured across them.

The walk moves through the triangles of the lattice (vertices of the dual
hexagonal lattice). The crossed edge always has its lower site on the left
and its upper site on the right; the third vertex of the triangle ahead
decides which of the two remaining edges is crossed next, so the walk is
unique. Sites exactly at the threshold count as upper.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sps
from scipy.sparse.csgraph import connected_components

from .gff import SQ3, FieldSample, LatticeDomain

__all__ = [
    "InvariantViolation",
    "JumpReport",
    "LevelLine",
    "StartEdgeError",
    "default_level",
    "extract_level_line",
    "measure_jump",
    "mirror_field",
]

PROBE_DISTANCES = (1, 2, 4, 8)


class StartEdgeError(ValueError):
    """Boundary values at the origin do not straddle the requested level."""


class InvariantViolation(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class LevelLine:
    level: float
    lower: np.ndarray  # site index left of each crossed edge
    upper: np.ndarray  # site index right of each crossed edge
    domain: LatticeDomain = field(repr=False)
    end: str = "arc"

    def __len__(self) -> int:
        return self.lower.size

    @property
    def edges(self) -> list[tuple[int, int]]:
        return list(zip(self.lower.tolist(), self.upper.tolist()))

    @property
    def midpoints(self) -> np.ndarray:
        z = self.domain.z
        return 0.5 * (z[self.lower] + z[self.upper])

    @property
    def as_curve(self) -> np.ndarray:
        """Edge midpoints from the origin; a final real-axis crossing is dropped."""
        pts = self.midpoints
        body = pts[1:]
        cut = np.flatnonzero(body.imag <= 0)
        if cut.size:
            body = body[: cut[0]]
        return np.concatenate([[0j], body])

    def truncated(self, radius: float) -> np.ndarray:
        """Curve up to (excluding) the first point with ``|z| > radius``."""
        pts = self.as_curve
        out = np.flatnonzero(np.abs(pts) > radius)
        return pts if out.size == 0 else pts[: out[0]]

    def sides(self) -> np.ndarray:
        """-1 for sites left of the line, +1 right of it, 0 for any site cut off from both.

        Components of the lattice graph with the crossed edges removed.
        """
        dom = self.domain
        nb = dom.neighbors
        rows = np.repeat(np.arange(dom.size), nb.shape[1])
        cols = nb.ravel()
        ok = cols >= 0
        rows, cols = rows[ok], cols[ok]
        n = dom.size
        crossed = set((self.lower * n + self.upper).tolist()) | set((self.upper * n + self.lower).tolist())
        keep = ~np.isin(rows * n + cols, np.fromiter(crossed, dtype=np.int64, count=len(crossed)))
        adj = sps.coo_matrix((np.ones(int(keep.sum())), (rows[keep], cols[keep])), shape=(n, n))
        _, lab = connected_components(adj, directed=False)
        out = np.zeros(n, dtype=np.int8)
        out[lab == lab[self.lower[0]]] = -1
        out[lab == lab[self.upper[0]]] = 1
        return out

    def separation_holds(self, values: np.ndarray) -> bool:
        return bool(np.all(values[self.lower] < self.level) and np.all(values[self.upper] >= self.level))

    def __eq__(self, other):
        if not isinstance(other, LevelLine):
            return NotImplemented
        return (
            self.level == other.level
            and np.array_equal(self.lower, other.lower)
            and np.array_equal(self.upper, other.upper)
        )


def default_level(sample: FieldSample) -> float:
    """Midpoint of the boundary values on either side of the origin."""
    dom = sample.domain
    phi = sample.total
    return 0.5 * (phi[dom.site(-1, 0)] + phi[dom.site(0, 0)])


def _ahead(dom: LatticeDomain, lo: int, hi: int) -> int:
    """Third vertex of the triangle ahead of the edge (lo on the left, hi on the right)."""
    zl, zh = dom.z[lo], dom.z[hi]
    v = 0.5 * (zl + zh) + 0.5j * SQ3 * (zh - zl)
    b = int(round(v.imag / (SQ3 / 2)))
    a = int(round(v.real - (b + 1) / 2))
    return dom._index.get((a, b), -1)


def extract_level_line(sample: FieldSample, level: float | None = None, values: np.ndarray | None = None) -> LevelLine:
    """Walk the interface from the origin's boundary edge until it leaves the domain."""
    dom = sample.domain
    phi = sample.total if values is None else np.asarray(values, dtype=float)
    level = default_level(sample) if level is None else float(level)
    lo, hi = dom.site(-1, 0), dom.site(0, 0)
    if not (phi[lo] < level <= phi[hi]):
        raise StartEdgeError(
            f"boundary values {phi[lo]:.6g} | {phi[hi]:.6g} at the origin do not straddle {level:.6g}"
        )
    lower, upper = [lo], [hi]
    seen: set[tuple[int, int, int]] = set()
    cap = 10 * dom.size
    end = "arc"
    for _ in range(cap):
        v = _ahead(dom, lo, hi)
        if v < 0:
            end = "axis" if dom.is_boundary[lo] and dom.is_boundary[hi] and dom.z[lo].imag == 0 and dom.z[hi].imag == 0 else "arc"
            break
        tri = tuple(sorted((lo, hi, v)))
        if tri in seen:
            raise InvariantViolation("level line revisited a dual vertex")
        seen.add(tri)
        if phi[v] >= level:
            hi = v
        else:
            lo = v
        lower.append(lo)
        upper.append(hi)
    else:
        raise InvariantViolation(f"level line did not terminate within {cap} steps")
    return LevelLine(level, np.array(lower), np.array(upper), dom, end)


def mirror_field(dom: LatticeDomain, values: np.ndarray) -> np.ndarray:
    """``-phi(-conj z)``: reflection through the imaginary axis combined with negation."""
    mirror = np.array([dom.site(-int(a) - int(b) - 1, int(b)) for a, b in zip(dom.a, dom.b)])
    return -np.asarray(values)[mirror]


@dataclass
class JumpReport:
    mean: float
    stderr: float
    probe_distance: int
    profile: dict[int, tuple[float, float]]
    n_samples: int
    n_waypoints: int
    excluded_waypoints: int
    misplaced_probes: int = 0

    def to_dict(self) -> dict:
        return {
            "mean_jump": self.mean,
            "stderr": self.stderr,
            "mean_jump_over_2pi": self.mean / (2 * np.pi),
            "stderr_over_2pi": self.stderr / (2 * np.pi),
            "probe_distance": self.probe_distance,
            "profile": {str(k): {"mean": m, "stderr": s} for k, (m, s) in self.profile.items()},
            "n_samples": self.n_samples,
            "n_waypoints": self.n_waypoints,
            "excluded_waypoints": self.excluded_waypoints,
            "misplaced_probes": self.misplaced_probes,
        }


def _line_jumps(values, dom: LatticeDomain, curve: np.ndarray, deltas, n_waypoints: int, sides=None):
    """Per-delta mean of phi(right probe) - phi(left probe) over waypoints, excluded and misplaced counts.

    With ``sides`` given, a probe pair is dropped unless each site lies in the
    component it is meant to probe: on a rough line the normal offset often
    lands across a nearby fold.
    """
    m = curve.size
    idx = np.unique(np.linspace(1, m - 2, n_waypoints).round().astype(int)) if m >= 3 else np.array([], int)
    out = {}
    excluded = misplaced = 0
    for d in deltas:
        jumps = []
        for k in idx:
            a, b = max(k - d, 0), min(k + d, m - 1)
            tangent = curve[b] - curve[a]
            if tangent == 0:
                excluded += 1
                continue
            normal = -1j * tangent / abs(tangent)  # right-hand side
            zr, zl = curve[k] + d * normal, curve[k] - d * normal
            if zl.imag <= 0 or zr.imag <= 0 or max(abs(zr), abs(zl)) >= dom.radius - 1:
                excluded += 1
                continue
            sr, sl = dom.nearest_site(np.array([zr, zl]))
            if dom.is_boundary[sr] or dom.is_boundary[sl]:
                excluded += 1
                continue
            if sides is not None and (sides[sr] != 1 or sides[sl] != -1):
                misplaced += 1
                continue
            jumps.append(values[sr] - values[sl])
        out[d] = float(np.mean(jumps)) if jumps else np.nan
    return out, excluded, misplaced, idx.size


def measure_jump(
    samples: Sequence[FieldSample],
    lines: Sequence[LevelLine],
    probe_distance: int = 2,
    n_waypoints: int = 20,
    radius_fraction: float = 0.5,
    deltas: Sequence[int] = PROBE_DISTANCES,
    side_check: bool = True,
) -> JumpReport:
    """Mean field difference across the line, right probe minus left probe.

    Waypoints are equally spaced along each line truncated at
    ``radius_fraction * R``; probes sit at the nearest lattice sites to the
    points offset by ``delta`` along the local normal. The profile covers
    ``deltas`` plus ``probe_distance``. With ``side_check`` a pair counts
    only if both sites lie on their intended sides of the whole line.
    """
    if probe_distance < 1:
        raise ValueError("probe distance must be at least 1")
    if len(samples) != len(lines) or not samples:
        raise ValueError("need one line per sample")
    deltas = sorted(set(deltas) | {probe_distance})
    per_sample = {d: [] for d in deltas}
    excluded = misplaced = 0
    used = 0
    for s, line in zip(samples, lines):
        curve = line.truncated(radius_fraction * s.domain.radius)
        if curve.size < 12:
            raise ValueError("level line has fewer than 10 interior waypoints")
        sides = line.sides() if side_check else None
        res, ex, mis, nwp = _line_jumps(s.total, s.domain, curve, deltas, n_waypoints, sides)
        excluded += ex
        misplaced += mis
        used += nwp
        for d in deltas:
            if np.isfinite(res[d]):
                per_sample[d].append(res[d])
    profile = {}
    for d in deltas:
        arr = np.array(per_sample[d])
        if arr.size == 0:
            profile[d] = (np.nan, np.nan)
        elif arr.size == 1:
            profile[d] = (float(arr[0]), np.nan)
        else:
            profile[d] = (float(arr.mean()), float(arr.std(ddof=1) / np.sqrt(arr.size)))
    mean, err = profile[probe_distance]
    return JumpReport(mean, err, probe_distance, profile, len(samples), used, excluded, misplaced)
