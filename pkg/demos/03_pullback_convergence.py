"""Pulling back: start further and further in the past, look at the same time.

For a fixed noise path, start the system at time tau - t from very different
initial data and observe the state at tau. As t grows the observed states
(i) land inside the absorbing ball ||grad u(tau)||^2 <= R_V, and
(ii) forget where they started: they converge to one point of the random
attractor at (tau, omega).

Run:  python demos/03_pullback_convergence.py    (a few seconds)
"""
import itertools

import numpy as np

from calmedns.calming import CalmingSpec
from calmedns.integrator import StepperConfig
from calmedns.model import ForcingSpec, ModelParams, preset_field
from calmedns.noise import ou_path, sample_wiener
from calmedns.rds import absorbing_radius, pullback_family
from calmedns.spectral import WaveGrid, random_field

grid = WaveGrid(8)
h = preset_field(grid, "taylor_green")
f = preset_field(grid, "kolmogorov")
model = ModelParams(grid=grid, nu=1.0, calming=CalmingSpec("z1", 2.0), h=h / h.norm(1),
                    forcing=ForcingSpec("constant", f / f.norm()))
omega = ou_path(sample_wiener(seed=3, t_min=-40.0, t_max=1.0, dt=1.25e-3), model.gamma)

est = absorbing_radius(0.0, omega, model)
print(f"absorbing radius R_V = {est.R_V:.3f}  (bound on ||grad u(0)||^2)")

rng = np.random.default_rng(0)
initials = []
for scale in (0.1, 10.0):
    u = random_field(grid, rng)
    initials.append(u * (scale * np.sqrt(est.R_V) / u.norm(1)))

horizons = (2.0, 4.0, 8.0, 16.0)
fam = pullback_family(0.0, horizons, omega, initials, model, StepperConfig(dt=5e-3, snapshot_stride=50))
print("\n   t   ||grad u(0)||^2 (small start, large start)   gap between them")
for t in horizons:
    a, b = fam.states[(t, 0)], fam.states[(t, 1)]
    print(f"{t:5g}   {a.norm(1) ** 2:9.4f} {b.norm(1) ** 2:12.4f}        {(a - b).norm(1):.3e}")

print("\nconsecutive horizons, same initial datum:")
for (s, t) in itertools.pairwise(horizons):
    print(f"  ||U({t:g}) - U({s:g})||_V = {(fam.states[(t, 1)] - fam.states[(s, 1)]).norm(1):.3e}")
