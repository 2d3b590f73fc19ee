"""Experiment orchestration behind the command line.

Each experiment turns a validated :class:`~calmedns.config.RunConfig` into a
summary dict, one CSV table and a set of named pass/fail monitors. Files are
written by :class:`OutputWriter` only; every file carries the config hash, and
nothing time- or machine-dependent is recorded, so re-running a config
reproduces every byte.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .calming import CalmingSpec, verify_calming_axioms
from .diagnostics import (
    build_ledger,
    dt_tolerance,
    energy_inequality_monitor,
    export_ledger,
    gronwall_monitor,
)
from .exceptions import TheoryRangeError
from .integrator import StepperConfig, integrate
from .io import dumps_json, read_snapshot, save_checkpoint, write_csv
from .model import ForcingSpec, ModelParams, preset_field, validate_assumptions
from .noise import ou_path, sample_wiener
from .rds import (
    absorbing_radius,
    absorbing_experiment,
    attractor_cauchy_test,
    flattening_analysis,
    pullback_family,
)
from .spectral import SpectralField, WaveGrid, random_field, sobolev_norm

__all__ = [
    "ExperimentResult",
    "OutputWriter",
    "build_model",
    "build_noise",
    "build_stepper",
    "make_initial",
    "run_experiment",
]


@dataclass
class ExperimentResult:
    kind: str
    summary: dict
    columns: list
    rows: list
    monitors: dict = field(default_factory=dict)
    extra_files: dict = field(default_factory=dict)  # name -> text

    @property
    def passed(self) -> bool:
        return all(self.monitors.values())

    @property
    def exit_status(self) -> int:
        return 0 if self.passed else 1


class OutputWriter:
    """Single writer for an experiment's output directory."""

    def __init__(self, directory, config):
        self.dir = Path(directory)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.config = config

    @property
    def meta(self) -> dict:
        return {"config_hash": self.config.hash, "calmedns_version": __version__}

    def json(self, name, obj) -> Path:
        p = self.dir / name
        p.write_text(dumps_json({**obj, "config_hash": self.config.hash}))
        return p

    def csv(self, name, columns, rows) -> Path:
        p = self.dir / name
        write_csv(p, columns, rows, self.meta)
        return p

    def text(self, name, body) -> Path:
        p = self.dir / name
        p.write_text(f"<!-- config_hash={self.config.hash} -->\n{body}")
        return p


# --------------------------------------------------------------------------- builders


def build_model(cfg) -> ModelParams:
    grid = WaveGrid(cfg["grid.n"])
    if cfg["h.mode"].endswith(".cnsf"):
        (h,) = read_snapshot(cfg["h.mode"], grid)[:1]
    else:
        h = preset_field(grid, cfg["h.mode"])
        nh = float(sobolev_norm(h, 1.0))
        h = h * (cfg["h.amplitude"] / nh) if nh > 0 else h
    forcing = ForcingSpec()
    if cfg["forcing.kind"] != "zero":
        prof = preset_field(grid, cfg["forcing.profile"])
        nf = prof.norm()
        prof = prof * (cfg["forcing.amplitude"] / nf) if nf > 0 else prof
        forcing = ForcingSpec(cfg["forcing.kind"], prof, cfg["forcing.sigma"])
    return ModelParams(
        grid=grid,
        nu=cfg["model.nu"],
        calming=CalmingSpec(cfg["calming.variant"], cfg["calming.eps"]),
        gamma=cfg["noise.gamma"],
        h=h,
        forcing=forcing,
        threshold=cfg["grid.threshold"],
        alpha=cfg["model.alpha"],
        nonlinear=cfg["model.nonlinear"],
    )


def build_noise(cfg, seed):
    T = cfg["noise.horizon"]
    w = sample_wiener(seed, -T, T, cfg["noise.dt"])
    return ou_path(w, cfg["noise.gamma"], cfg["noise.init"])


def build_stepper(cfg, dt=None) -> StepperConfig:
    return StepperConfig(
        scheme=cfg["stepper.scheme"],
        dt=cfg["stepper.dt"] if dt is None else dt,
        t_span=tuple(cfg["stepper.span"]),
        snapshot_stride=cfg["stepper.stride"],
    )


def make_initial(cfg, model, v_norm, index=0) -> SpectralField:
    """Initial velocity with V-norm ``v_norm``; random data use (initial.seed, index)."""
    grid = model.grid
    kind = cfg["initial.kind"]
    if kind == "random":
        rng = np.random.default_rng([cfg["initial.seed"], index])
        u = random_field(grid, rng, cutoff=model.threshold, slope=cfg["initial.slope"])
    else:
        u = preset_field(grid, kind)
    n = float(sobolev_norm(u, 1.0))
    return u * (v_norm / n) if n > 0 else u


def _ledger_files(model, cfg):
    try:
        ledger = build_ledger(model)
    except TheoryRangeError:
        return None, {}
    md, js = export_ledger(ledger)
    return ledger, {"ledger.md": md, "ledger.json": js}


# --------------------------------------------------------------------------- experiments


def _simulate(cfg, out: OutputWriter):
    model = build_model(cfg)
    seed = cfg.seeds[0]
    ou = build_noise(cfg, seed)
    st = build_stepper(cfg)
    t0 = st.t_span[0]
    u0 = make_initial(cfg, model, cfg["initial.norm"])
    v0 = u0 - model.h * ou.value_at(t0)
    thresholds = cfg["experiment.thresholds"] or []
    rec = integrate(v0, st, model, ou, tail_thresholds=thresholds, weak_residual=True)
    ledger, files = _ledger_files(model, cfg)
    monitors = {"divergence_free": rec.final_state.divergence_defect() <= 1e-12 * max(1.0, rec.final_state.norm())}
    summary = {
        "seed": seed,
        "final_time": rec.final_time,
        "final_norm_grad_v": float(rec["norm_grad_v"][-1]),
        "weak_residual": rec.weak_residual,
        "dvdt_sq_integral": rec.dvdt_sq_integral,
        "kappa": model.kappa,
    }
    if ledger is not None:
        tol_info = None
        tol = 0.0
        ratio = st.dt / 4 / cfg["noise.dt"]
        if cfg["experiment.measure_tolerance"] and abs(ratio - round(ratio)) < 1e-9 and round(ratio) >= 1:
            pilots = [rec] + [
                integrate(v0, st.replace(dt=st.dt / f, snapshot_stride=st.snapshot_stride * f), model, ou)
                for f in (2, 4)
            ]
            tm = dt_tolerance(*pilots, st.dt)
            tol, tol_info = tm.tolerance, tm.to_dict()
        gm = gronwall_monitor(rec, ledger, tol)
        em = energy_inequality_monitor(rec, ledger, tol)
        monitors["gronwall"] = gm.passed
        monitors["energy_inequality"] = em.passed
        summary.update(gronwall=gm.to_dict(), energy_inequality=em.to_dict(), tolerance_model=tol_info,
                       ledger_hash=ledger.hash)
    linear_free = (not model.nonlinear and model.forcing.kind == "zero"
                   and float(np.abs(model.h.coeffs).max()) == 0.0)
    if linear_free:
        exact = np.exp(-model.nu * model.grid.k2 * (st.t_span[1] - t0)) * np.where(model.mask, v0.coeffs, 0.0)
        ref = float(sobolev_norm(SpectralField(model.grid, exact), 1.0))
        err = abs(float(rec["norm_grad_v"][-1]) - ref) / max(ref, 1e-300)
        summary["stokes_exact_norm"] = ref
        summary["stokes_relative_error"] = err
        monitors["stokes_exact"] = err <= 1e-9
    if cfg["output.snapshots"]:
        save_checkpoint(out.dir / "final.cnsf", rec.final_state, rec.final_time, seed, cfg.hash)
    rows = rec.table().tolist()
    return ExperimentResult("simulate", summary, rec.column_names, rows, monitors, files)


def _initial_family(cfg, model, radius_sq):
    return [make_initial(cfg, model, s * np.sqrt(radius_sq), i)
            for i, s in enumerate(cfg["experiment.initial_scales"])]


def _pullback(cfg, out):
    model = build_model(cfg)
    st = build_stepper(cfg)
    ledger, files = _ledger_files(model, cfg)
    tau = cfg["experiment.tau"]
    rows, per_seed, ok_all = [], {}, True
    for seed in cfg.seeds:
        ou = build_noise(cfg, seed)
        inits = [make_initial(cfg, model, s * cfg["initial.norm"], i)
                 for i, s in enumerate(cfg["experiment.initial_scales"])]
        fam = pullback_family(tau, cfg["experiment.horizons"], ou, inits, model, st)
        norms = fam.terminal_grad_norms()
        ok = True
        for (t, i), nv in sorted(norms.items()):
            g_ok = True
            if ledger is not None and fam.records[(t, i)] is not None:
                g_ok = gronwall_monitor(fam.records[(t, i)], ledger).passed
            ok &= g_ok
            rows.append([seed, t, i, nv, g_ok])
        per_seed[str(seed)] = {f"t={t:g},i={i}": v for (t, i), v in sorted(norms.items())}
        ok_all &= ok
    summary = {"tau": tau, "terminal_norm_grad_u": per_seed}
    monitors = {"gronwall": ok_all} if ledger is not None else {}
    return ExperimentResult("pullback", summary, ["seed", "t", "initial", "norm_grad_u_tau", "gronwall_ok"],
                            rows, monitors, files)


def _absorb(cfg, out):
    model = build_model(cfg)
    st = build_stepper(cfg)
    _, files = _ledger_files(model, cfg)
    tau = cfg["experiment.tau"]
    rows, reports = [], {}
    mons = {"all_absorbed": True, "entry_monotone": True, "gronwall": True}
    for seed in cfg.seeds:
        ou = build_noise(cfg, seed)
        est = absorbing_radius(tau, ou, model)
        rep = absorbing_experiment(tau, ou, model, _initial_family(cfg, model, est.R_V),
                                   cfg["experiment.horizons"], st)
        reports[str(seed)] = rep.to_dict()
        mons["all_absorbed"] &= rep.all_absorbed
        mons["entry_monotone"] &= rep.entry_monotone
        mons["gronwall"] &= all(rep.gronwall_ok.values())
        for (t, i) in sorted(rep.terminal):
            rows.append([seed, t, i, rep.terminal[(t, i)], est.R_V, rep.inside[(t, i)],
                         _nan(rep.entry_time[(t, i)]), _nan(rep.entry_elapsed[(t, i)])])
    cols = ["seed", "t", "initial", "norm_grad_u_tau_sq", "R_V", "inside", "entry_time", "entry_elapsed"]
    return ExperimentResult("absorb", {"tau": tau, "reports": reports}, cols, rows, mons, files)


def _nan(x):
    return float("nan") if x is None else float(x)


def _flatten(cfg, out):
    model = build_model(cfg)
    st = build_stepper(cfg)
    _, files = _ledger_files(model, cfg)
    tau = cfg["experiment.tau"]
    grid = model.grid
    thresholds = cfg["experiment.thresholds"]
    if thresholds is None:
        thresholds = [float(x) for x in grid.eigenvalues if x <= model.threshold]
    T = max(cfg["experiment.horizons"])
    rows, reports, smallest = [], {}, []
    mons = {"tail_monotone": True, "delta_reached": True, "split_bound": True, "envelope_slope": True}
    for seed in cfg.seeds:
        ou = build_noise(cfg, seed)
        est = absorbing_radius(tau, ou, model)
        rep = flattening_analysis(tau, ou, model, T, thresholds, cfg["experiment.delta"], st,
                                  _initial_family(cfg, model, est.R_V))
        d = rep.to_dict()
        reports[str(seed)] = d
        tails = np.array(rep.tail_u)
        mons["tail_monotone"] &= bool(np.all(np.diff(tails) <= 1e-15 * max(1.0, tails.max())))
        mons["delta_reached"] &= rep.smallest_passing is not None
        mons["split_bound"] &= all(s["holds"] for s in rep.split_terms)
        fin = [k for k, x in enumerate(rep.lambda_next) if np.isfinite(x)]
        if len(fin) >= 2:
            lx = np.log(model.nu * np.array(rep.lambda_next)[fin] - model.kappa)
            ly = np.log(np.array(rep.envelope)[fin])
            slope = float(np.polyfit(lx, ly, 1)[0])
            d["envelope_slope"] = slope
            mons["envelope_slope"] &= abs(slope + 1) <= 0.15
        smallest.append(rep.smallest_passing)
        for k, lam in enumerate(rep.thresholds):
            s = rep.split_terms[k]
            rows.append([seed, lam, rep.lambda_next[k], rep.tail_u[k], rep.tail_v[k], rep.tail_noise[k],
                         rep.envelope[k], s["I1"], s["I2"], s["I3"], s["I4"], s["measured"]])
    shells = sorted(float(x) for x in grid.eigenvalues)
    idx = [shells.index(x) for x in smallest if x is not None]
    mons["seed_stability"] = bool(idx) and len(idx) == len(smallest) and max(idx) - min(idx) <= 1
    cols = ["seed", "threshold", "lambda_next", "tail_u", "tail_v", "tail_noise", "envelope",
            "I1", "I2", "I3", "I4", "measured_tail_sq"]
    return ExperimentResult("flatten", {"tau": tau, "horizon": T, "smallest_passing": smallest,
                                        "reports": reports}, cols, rows, mons, files)


def _cauchy(cfg, out):
    model = build_model(cfg)
    st = build_stepper(cfg)
    _, files = _ledger_files(model, cfg)
    tau = cfg["experiment.tau"]
    rows, reports = [], {}
    mons = {"horizon_monotone": True, "initial_monotone": True, "at_floor": True}
    for seed in cfg.seeds:
        ou = build_noise(cfg, seed)
        est = absorbing_radius(tau, ou, model)
        rep = attractor_cauchy_test(tau, ou, model, _initial_family(cfg, model, est.R_V),
                                    cfg["experiment.t_pairs"], st)
        reports[str(seed)] = rep.to_dict()
        mons["horizon_monotone"] &= rep.horizon_monotone
        mons["initial_monotone"] &= rep.initial_monotone
        mons["at_floor"] &= bool(rep.at_floor)
        for (a, b), gap in sorted(rep.horizon_gaps.items()):
            rows.append([seed, "horizon", a, b, gap])
        for t, gap in sorted(rep.initial_gaps.items()):
            rows.append([seed, "initial", t, t, gap])
        rows.append([seed, "floor", rep.horizons[-1], rep.horizons[-1], rep.floor])
    return ExperimentResult("cauchy", {"tau": tau, "reports": reports},
                            ["seed", "kind", "t_a", "t_b", "gap_V"], rows, mons)


def _verify_calming(cfg, out):
    blocks, rows, mons = {}, [], {}
    for var in cfg["experiment.variants"]:
        for eps in cfg["experiment.eps_list"]:
            rep = verify_calming_axioms(CalmingSpec(var, eps), sample_count=cfg["experiment.samples"],
                                        seed=cfg["noise.seed"])
            key = f"{var}:eps={eps:g}"
            blocks[key] = rep.to_dict()
            mons[key] = rep.passed
            w = rep.worst_ratios
            rows.append([var, eps, rep.lipschitz_ok, rep.bounded_ok, rep.residual_ok,
                         w["lipschitz"], w["bounded"], w["residual"]])
    cols = ["variant", "eps", "lipschitz_ok", "bounded_ok", "residual_ok",
            "worst_lipschitz", "worst_bounded_ratio", "worst_residual_ratio"]
    return ExperimentResult("verify-calming", {"cases": blocks}, cols, rows, mons)


def _validate(cfg, out):
    model = build_model(cfg)
    rep = validate_assumptions(model)
    _, files = _ledger_files(model, cfg)
    d = rep.to_dict()
    rows = [[k, d[k]] for k in ("a1", "a2", "a3", "kappa", "a3_margin", "alpha")]
    mons = {"a1": rep.a1, "a2": rep.a2, "a3": rep.a3}
    return ExperimentResult("validate", {"assumptions": d}, ["quantity", "value"], rows, mons, files)


_RUNNERS = {
    "simulate": _simulate,
    "pullback": _pullback,
    "absorb": _absorb,
    "flatten": _flatten,
    "cauchy": _cauchy,
    "verify-calming": _verify_calming,
    "validate": _validate,
}


def run_experiment(cfg, out_dir=None) -> ExperimentResult:
    """Run ``cfg.experiment`` and write summary.json, <kind>.csv and extras to ``out_dir``."""
    out = OutputWriter(cfg.output_dir if out_dir is None else out_dir, cfg)
    res = _RUNNERS[cfg.experiment](cfg, out)
    stem = res.kind.replace("-", "_")
    out.csv(f"{stem}.csv", res.columns, res.rows)
    for name, body in sorted(res.extra_files.items()):
        if name.endswith(".json"):
            import json

            out.json(name, json.loads(body))
        else:
            out.text(name, body)
    out.json("summary.json", {
        "experiment": res.kind,
        "seeds": cfg.seeds,
        "config": cfg.semantic(),
        "monitors": res.monitors,
        "passed": res.passed,
        "summary": res.summary,
    })
    return res
