"""From a lattice free field to a level line to its driving function.

Run: python3 demos/levelline_to_driving.py [output-dir]
"""

# %%
import sys
from pathlib import Path

from slerho.gff import BoundaryData, LatticeDomain, lambda_star, sample_field, sample_fields
from slerho.levelline import extract_level_line
from slerho.svg import Figure
from slerho.zipper import decimate_midpoints, estimate_kappa, extract_driving

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo-out")
out.mkdir(exist_ok=True)

# %% half-disk of radius 64 with a boundary jump of 2 pi lambda* at the origin
dom = LatticeDomain(64)
bc = BoundaryData(((0.0, lambda_star(1.0)),))
s = sample_field(dom, bc, seed=1)
print(f"{dom.size} sites, kappa_lat = {s.kappa_lat:.3f}")

# %% the interface separating values above and below the midpoint level
line = extract_level_line(s)
curve = line.as_curve
print(f"{len(line)} edges, ends on the {line.end}")

# %% unzip after removing lattice zigzag
path = extract_driving(decimate_midpoints(curve))
print(f"capacity {path.t_total:.1f}")

# %% a small ensemble: the variance of W_t grows like kappa t
paths = []
for f in sample_fields(dom, bc, seed=2, n=100):
    paths.append(extract_driving(decimate_midpoints(extract_level_line(f).as_curve)))
est = estimate_kappa(paths, t_max=dom.radius**2 / 64)
print(f"kappa-hat = {est.kappa:.2f} +- {est.stderr:.2f}")

# %%
fig = Figure("level line", "Re", "Im", equal_aspect=True)
fig.line(curve.real, curve.imag)
fig.save(out / "levelline.svg")
t = est.grid
Figure("variance of W_t", "t", "Var W").scatter(t, est.variance, "measured").line(t, 4 * t, "4 t", dashed=True).save(
    out / "variance.svg"
)
print("figures written to", out)
