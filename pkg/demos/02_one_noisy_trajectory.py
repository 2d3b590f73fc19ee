"""A single trajectory of the calmed equations driven by additive noise.

The noise enters as h dW. Subtracting h z(t), with z an Ornstein-Uhlenbeck
process, leaves a random PDE for v = u - h z that we integrate pathwise. Along
the way we record ||grad v||^2 and compare it with the Gronwall envelope built
from explicit constants; the envelope must never be exceeded.

Run:  python demos/02_one_noisy_trajectory.py
"""
import numpy as np

from calmedns.calming import CalmingSpec
from calmedns.diagnostics import build_ledger, gronwall_monitor
from calmedns.integrator import StepperConfig, integrate
from calmedns.model import ModelParams, preset_field
from calmedns.noise import ou_path, sample_wiener
from calmedns.spectral import WaveGrid, random_field

grid = WaveGrid(8)
h = preset_field(grid, "taylor_green")
h = h / h.norm(1)
model = ModelParams(grid=grid, nu=1.0, calming=CalmingSpec("z1", 2.0), h=h)
ledger = build_ledger(model)
print(f"kappa = {ledger.kappa:.3f}  (positive: the dissipation beats the calmed nonlinearity)")
print(f"M1 = {ledger.M1:.3f}, beta_z = {ledger.beta_z:.3f}")

# A Brownian path on [-1, 5], and the stationary OU process it drives.
omega = sample_wiener(seed=7, t_min=-1.0, t_max=5.0, dt=1.25e-3)
z = ou_path(omega, gamma=model.gamma)
print(f"z(0) = {z.value_at(0.0):+.3f}")

u0 = random_field(grid, np.random.default_rng(1))
u0 = u0 * (4.0 / u0.norm(1))
v0 = u0 - h * z.value_at(0.0)

rec = integrate(v0, StepperConfig("exp_euler", dt=5e-3, t_span=(0.0, 4.0), snapshot_stride=40), model, z)
mon = gronwall_monitor(rec, ledger)
env = rec["norm_grad_v"] ** 2 + mon.slack
print("\n    t   ||grad v||^2   envelope")
for t, e, b in zip(rec.times, rec["norm_grad_v"] ** 2, env):
    print(f"{t:5.2f}  {e:12.5f}  {b:10.5f}")
print(f"\nGronwall monitor passed: {mon.passed} (worst slack {mon.worst_slack:.3e} at t={mon.worst_time:g})")
