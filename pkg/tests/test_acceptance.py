"""Acceptance suite: one printed PASS/FAIL line per criterion, at full size.

Run with ``pytest tests/test_acceptance.py -v``; each test writes a line of the
form ``PASS criterion N: ...`` directly to the terminal. The heavier criteria
(4-7) take a few minutes in total.
"""
import json
import time

import numpy as np
import pytest
import scipy.fft as sfft

from calmedns.calming import CalmingSpec, verify_calming_axioms
from calmedns.cli import main
from calmedns.config import parse_config
from calmedns.experiments import run_experiment
from calmedns.integrator import StepperConfig, continuous_dependence_experiment, integrate
from calmedns.model import ForcingSpec, ModelParams, preset_field, rhs_v, rotational_bilinear
from calmedns.noise import ou_path, sample_wiener
from calmedns.spectral import (
    WaveGrid,
    SpectralField,
    divergence,
    fourier_mode,
    inner,
    leray_project,
    sobolev_norm,
    to_physical,
)

from conftest import unit_h


@pytest.fixture
def report(pytestconfig):
    """report(n, ok, text): print the criterion line to the terminal and assert."""
    capman = pytestconfig.pluginmanager.getplugin("capturemanager")

    def _report(number, ok, text, started):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {text} [{time.perf_counter() - started:.1f}s]"
        with capman.global_and_fixture_disabled():
            print("\n" + line, flush=True)
        assert ok, line

    return _report


def test_criterion_1_calming_axioms(report):
    t0 = time.perf_counter()
    bad = []
    for variant in ("z1", "z2", "z3", "z4"):
        for eps in (0.5, 1.0, 2.0, 4.0):
            rep = verify_calming_axioms(CalmingSpec(variant, eps), sample_count=100_000, radius=10.0,
                                        seed=0, lipschitz_tol=1e-9, bound_tol=1e-12)
            if not rep.passed:
                bad.append(f"{variant}:{eps:g}")
    elapsed = time.perf_counter() - t0
    ok = not bad and elapsed < 10
    report(1, ok, f"16 cases x 1e5 samples, failures={bad or 'none'}, runtime<10s={elapsed < 10}", t0)


def _raw_batch(grid, rng, count):
    """``count`` random real fields (not projected) as coefficients (count, 3, n, n, n/2+1)."""
    x = rng.standard_normal((count,) + grid.physical_shape)
    c = sfft.rfftn(x, axes=(-3, -2, -1)) / grid.n**3
    return np.where(grid.active_mask(), c, 0.0)


def test_criterion_2_spectral_invariants(report):
    t0 = time.perf_counter()
    g = WaveGrid(16)
    f = preset_field(g, "kolmogorov")
    model = ModelParams(grid=g, h=unit_h(g), forcing=ForcingSpec("constant", f))
    rng = np.random.default_rng(2024)
    shells = np.array([float(x) for x in g.eigenvalues if g.next_eigenvalue(x) is not None])
    nxt = np.array([g.next_eigenvalue(x) for x in shells])
    k2 = g.k2.ravel()
    above = (k2[:, None] > shells[None, :]).astype(float)
    kabs = np.sqrt(g.k2)
    worst = dict(leray=0.0, adjoint=0.0, parseval=0.0, div=0.0, cancel=0.0)
    tail_violations = 0
    total, batch = 10_000, 50
    for _ in range(total // batch):
        a, b = _raw_batch(g, rng, batch), _raw_batch(g, rng, batch)
        u, w = leray_project(a, g), leray_project(b, g)
        nu_ = sobolev_norm(u, 0.0, g)
        worst["leray"] = max(worst["leray"], float(np.max(sobolev_norm(leray_project(u, g) - u, 0.0, g) / nu_)))
        scale = sobolev_norm(a, 0.0, g) * sobolev_norm(b, 0.0, g)
        worst["adjoint"] = max(worst["adjoint"], float(np.max(np.abs(inner(u, b, g) - inner(a, w, g)) / scale)))
        phys = to_physical(u, g)
        ms = np.mean(np.sum(phys**2, axis=-4), axis=(-3, -2, -1))
        worst["parseval"] = max(worst["parseval"], float(np.max(np.abs(ms - nu_**2) / nu_**2)))
        # ||(I-P)u||^2 <= lambda_next^-s ||u||_{H^s}^2 for s = 1, 2 at every shell
        energy = np.sum(g.weights * np.abs(u) ** 2, axis=-4).reshape(batch, -1)
        tail = energy @ above
        for s in (1.0, 2.0):
            hs = energy @ k2**s
            tail_violations += int(np.sum(tail > hs[:, None] * nxt[None, :] ** (-s) * (1 + 1e-12)))
        U, W = SpectralField(g, u), SpectralField(g, w)
        r = rhs_v(model, U, 0.3, float(rng.standard_normal())).coeffs
        div = np.max(np.abs(divergence(r, g)), axis=(-3, -2, -1))
        worst["div"] = max(worst["div"], float(np.max(div / np.max(kabs * np.abs(r), axis=(-4, -3, -2, -1)))))
        bw = rotational_bilinear(U, W).coeffs
        cancel = np.abs(inner(bw, u, g)) / (sobolev_norm(bw, 0.0, g) * nu_)
        worst["cancel"] = max(worst["cancel"], float(np.max(cancel)))
    elapsed = time.perf_counter() - t0
    ok = (worst["leray"] <= 1e-10 and worst["adjoint"] <= 1e-10 and worst["parseval"] <= 1e-12
          and worst["div"] <= 1e-12 and worst["cancel"] <= 1e-10 and tail_violations == 0 and elapsed < 60)
    text = ", ".join(f"{k}={v:.1e}" for k, v in worst.items())
    report(2, ok, f"1e4 fields at 16^3: {text}, tail violations={tail_violations}, runtime<60s={elapsed < 60}", t0)


def test_criterion_3_integrator_order(report):
    t0 = time.perf_counter()
    g = WaveGrid(16)
    stokes = ModelParams(grid=g, nonlinear=False)
    u = leray_project(fourier_mode(g, (1, 2, 0), np.array([2.0, -1.0, 0.3])))
    errs = []
    for scheme in ("exp_euler", "etdrk2"):
        rec = integrate(u, StepperConfig(scheme, dt=0.01, t_span=(0, 1)), stokes)
        exact = u.norm(1) * np.exp(-5.0)
        errs.append(abs(rec["norm_grad_v"][-1] - exact) / exact)
    stokes_ok = max(errs) <= 1e-9

    model = ModelParams(grid=g, forcing=ForcingSpec("constant", preset_field(g, "kolmogorov")))
    from calmedns.spectral import random_field

    u0 = random_field(g, np.random.default_rng(3), cutoff=6, slope=2.0)
    u0 = u0 * (3 / u0.norm(1))
    dts = [0.02, 0.01, 0.005, 0.0025]
    big = 10**6
    ref = integrate(u0, StepperConfig("etdrk2", dt=dts[-1] / 32, t_span=(0, 1), snapshot_stride=big), model)
    e = [(integrate(u0, StepperConfig("etdrk2", dt=dt, t_span=(0, 1), snapshot_stride=big), model).final_state
          - ref.final_state).norm(1) for dt in dts]
    slopes = np.log2(np.array(e[:-1]) / np.array(e[1:]))
    slope_ok = bool(np.all(np.abs(slopes - 2) <= 0.3))
    elapsed = time.perf_counter() - t0
    ok = stokes_ok and slope_ok and elapsed < 120
    report(3, ok, f"Stokes rel err={max(errs):.1e}, etdrk2 slopes={np.round(slopes, 3).tolist()}, "
                  f"runtime<120s={elapsed < 120}", t0)


_BASE = """
grid.n = 16
model.nu = 1.0
calming.variant = "z1"
calming.eps = 2.0
h.mode = "taylor_green"
h.amplitude = 1.0
noise.horizon = 50.0
noise.dt = 1.25e-3
stepper.dt = 5e-3
stepper.stride = 10
"""

_FORCED = _BASE + """
forcing.kind = "constant"
forcing.profile = "kolmogorov"
forcing.amplitude = 1.0
"""


def test_criterion_4_gronwall_monitor(report, tmp_path):
    t0 = time.perf_counter()
    cfg = parse_config(_BASE + 'experiment.kind = "simulate"\nstepper.span = [0.0, 20.0]\ninitial.norm = 3.0\n')
    shrinks, failures = [], []
    for seed in range(5):
        c = cfg.replace(**{"noise.seed": seed, "initial.seed": seed})
        res = run_experiment(c, tmp_path / f"s{seed}")
        shrinks.append(res.summary["tolerance_model"]["shrink"])
        if not (res.monitors["gronwall"] and res.monitors["energy_inequality"]):
            failures.append(seed)
    shrink_ok = all(abs(s - 2) <= 0.3 for s in shrinks)
    elapsed = time.perf_counter() - t0
    ok = not failures and shrink_ok and elapsed < 600
    report(4, ok, f"5 seeds, horizon 20: violating seeds={failures or 'none'}, tolerance shrink="
                  f"{[round(s, 3) for s in shrinks]}, runtime<600s={elapsed < 600}", t0)


def test_criterion_5_absorbing(report, tmp_path):
    t0 = time.perf_counter()
    cfg = parse_config(_FORCED + 'experiment.kind = "absorb"\nexperiment.seeds = [0, 1, 2]\n'
                       "experiment.horizons = [2.0, 4.0, 8.0, 16.0]\n"
                       "experiment.initial_scales = [0.1, 1.0, 3.0, 10.0]\n")
    res = run_experiment(cfg, tmp_path)
    elapsed = time.perf_counter() - t0
    m = res.monitors
    ok = m["all_absorbed"] and m["entry_monotone"] and elapsed < 1200
    report(5, ok, f"3 seeds x 4 initials x 4 horizons: absorbed={m['all_absorbed']}, "
                  f"entry monotone={m['entry_monotone']}, runtime<1200s={elapsed < 1200}", t0)


def test_criterion_6_flattening(report, tmp_path):
    t0 = time.perf_counter()
    cfg = parse_config(_FORCED + 'experiment.kind = "flatten"\nexperiment.seeds = [0, 1, 2]\n'
                       "experiment.delta = 1e-2\n")
    res = run_experiment(cfg, tmp_path)
    elapsed = time.perf_counter() - t0
    m = res.monitors
    slopes = [round(r.get("envelope_slope", float("nan")), 3) for r in res.summary["reports"].values()]
    ok = (m["tail_monotone"] and m["delta_reached"] and m["seed_stability"] and m["envelope_slope"]
          and elapsed < 900)
    report(6, ok, f"tail monotone={m['tail_monotone']}, delta reached at Lambda="
                  f"{res.summary['smallest_passing']}, within one shell={m['seed_stability']}, "
                  f"envelope slopes={slopes}, runtime<900s={elapsed < 900}", t0)


def test_criterion_7_pullback_cauchy(report, tmp_path):
    t0 = time.perf_counter()
    cfg = parse_config(_FORCED + 'experiment.kind = "cauchy"\nexperiment.t_pairs = [[4.0, 8.0], [8.0, 16.0]]\n'
                       "experiment.initial_scales = [0.1, 10.0]\n")
    res = run_experiment(cfg, tmp_path)
    elapsed = time.perf_counter() - t0
    m = res.monitors
    (rep,) = res.summary["reports"].values()
    ok = m["horizon_monotone"] and m["initial_monotone"] and m["at_floor"] and elapsed < 1200
    report(7, ok, f"horizon gaps={ {k: f'{v:.1e}' for k, v in rep['horizon_gaps'].items()} }, "
                  f"initial gaps={ {k: f'{v:.1e}' for k, v in rep['initial_gaps'].items()} }, "
                  f"floor={rep['floor']:.1e}, at floor={m['at_floor']}, runtime<1200s={elapsed < 1200}", t0)


def test_criterion_8_continuous_dependence(report):
    t0 = time.perf_counter()
    g = WaveGrid(16)
    model = ModelParams(grid=g, h=unit_h(g))
    st = StepperConfig("exp_euler", dt=5e-3, t_span=(0.0, 2.0), snapshot_stride=1)
    from calmedns.spectral import random_field

    failures, factors = [], []
    for pair in range(10):
        rng = np.random.default_rng([8, pair])
        ou = ou_path(sample_wiener(pair, -1.0, 3.0, 1.25e-3), model.gamma)
        v0 = random_field(g, rng, cutoff=model.threshold)
        v0 = v0 * (3.0 / v0.norm(1))
        d = random_field(g, rng, cutoff=model.threshold)
        d = d / d.norm()
        reps = [continuous_dependence_experiment(v0 + d * a, v0, st, model, ou) for a in (1e-2, 1e-4)]
        if not all(r.satisfied for r in reps):
            failures.append(pair)
        ratios = [r.gap_ratio for r in reps]
        factors.append(max(ratios) / min(ratios))
    elapsed = time.perf_counter() - t0
    ok = not failures and max(factors) <= 3 and elapsed < 600
    report(8, ok, f"10 pairs, |d|=1e-2/1e-4: bound violations={failures or 'none'}, worst gap-ratio factor="
                  f"{max(factors):.3f}, runtime<600s={elapsed < 600}", t0)


_DETERMINISM = {
    "simulate": "grid.n = 8\nstepper.span = [0.0, 1.0]\noutput.snapshots = true\n",
    "pullback": "grid.n = 8\nnoise.horizon = 5.0\nexperiment.horizons = [1.0, 2.0, 4.0]\n",
    "verify-calming": "experiment.samples = 10000\n",
    "validate": "grid.n = 8\n",
}


def test_criterion_9_determinism(report, tmp_path):
    t0 = time.perf_counter()
    differing = []
    for kind, body in _DETERMINISM.items():
        cfgfile = tmp_path / f"{kind}.toml"
        cfgfile.write_text(body)
        outs = []
        for rep in ("a", "b"):
            out = tmp_path / f"{kind}-{rep}"
            main([kind, "--config", str(cfgfile), "--out", str(out)])
            outs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
        if outs[0] != outs[1] or not outs[0]:
            differing.append(kind)
        assert json.loads(outs[0]["summary.json"])["experiment"] == kind
    report(9, not differing, f"byte-identical reruns for {list(_DETERMINISM)}: differing={differing or 'none'}", t0)
