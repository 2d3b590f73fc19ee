"""Run configuration: a flat, dotted-key TOML document validated against a schema.

Every key has a type, a default and a validator; unknown keys are rejected and
all problems are reported together. The config hash is the SHA-256 of the
canonical JSON of every semantic field (``output.dir`` excluded), so any two
configs that would compute different things hash differently.
"""
from __future__ import annotations

import hashlib
import json
import math
import sys
from dataclasses import dataclass

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10 only
    import tomli as tomllib

from .calming import CalmingSpec, Variant, calm_sup_norm
from .exceptions import ConfigError

__all__ = ["EXPERIMENTS", "SCHEMA", "RunConfig", "parse_config", "load_config", "config_hash"]

EXPERIMENTS = ("simulate", "pullback", "absorb", "flatten", "cauchy", "verify-calming", "validate")
_VARIANTS = tuple(v.value for v in Variant)
_PRESETS = ("taylor_green", "abc", "kolmogorov", "zero")


def _positive(x):
    return None if x > 0 else "must be positive"


def _nonneg(x):
    return None if x >= 0 else "must be non-negative"


def _one_of(options):
    def check(x):
        return None if x in options else f"must be one of {', '.join(map(str, options))}"

    return check


def _pos_list(xs):
    return None if all(x > 0 for x in xs) else "entries must be positive"


def _increasing(xs):
    if not all(x > 0 for x in xs):
        return "entries must be positive"
    return None if all(b > a for a, b in zip(xs, xs[1:])) else "must be strictly increasing"


def _span(xs):
    return None if len(xs) == 2 and xs[1] >= xs[0] else "must be [t0, t1] with t1 >= t0"


def _pairs(xs):
    for p in xs:
        if not (isinstance(p, list) and len(p) == 2 and all(isinstance(v, (int, float)) for v in p)
                and 0 < p[0] < p[1]):
            return "must be a list of [t_a, t_b] pairs with 0 < t_a < t_b"
    return None


def _h_mode(x):
    return None if (x in _PRESETS or x.endswith(".cnsf")) else \
        f"must be one of {', '.join(_PRESETS)} or a path to a .cnsf snapshot"


def _variants(xs):
    bad = [x for x in xs if x not in _VARIANTS]
    return None if not bad else f"unknown variant(s) {bad}; valid: {', '.join(_VARIANTS)}"


# key -> (type tag, default, validator or None, description)
SCHEMA = {
    "grid.n": ("int", 16, lambda n: None if n >= 4 and n % 2 == 0 else "must be an even integer >= 4",
               "points per axis"),
    "grid.threshold": ("float?", None, _nonneg, "Galerkin eigenvalue cutoff (default: largest dealiased shell)"),
    "model.nu": ("float", 1.0, _positive, "viscosity"),
    "model.alpha": ("float?", None, _positive, "(A1)/(A2) weight, in (0, nu lambda_1); default nu/2"),
    "model.nonlinear": ("bool", True, None, "false switches advection off (linear test hook)"),
    "calming.variant": ("str", "z1", _one_of(_VARIANTS), "calming function"),
    "calming.eps": ("float", 2.0, _positive, "calming parameter"),
    "forcing.kind": ("str", "zero", _one_of(("zero", "constant", "exp_window")), "forcing time profile"),
    "forcing.sigma": ("float", 0.0, None, "rate of the exp_window profile"),
    "forcing.profile": ("str", "kolmogorov", _one_of(_PRESETS), "spatial forcing profile"),
    "forcing.amplitude": ("float", 1.0, _nonneg, "L2 norm of the projected forcing profile"),
    "h.mode": ("str", "taylor_green", _h_mode, "noise profile: preset or .cnsf snapshot path"),
    "h.amplitude": ("float", 1.0, _nonneg, "V-norm of h (presets only)"),
    "noise.seed": ("int", 0, lambda s: None if 0 <= s < 2**64 else "must be a u64", "noise seed"),
    "noise.gamma": ("float", 1.0, _positive, "OU rate"),
    "noise.dt": ("float", 1.25e-3, _positive, "noise grid spacing"),
    "noise.horizon": ("float", 50.0, _positive, "paths are sampled on [-T, T]"),
    "noise.init": ("str", "stationary_sample", _one_of(("stationary_sample", "zero")), "OU start"),
    "stepper.scheme": ("str", "exp_euler", _one_of(("exp_euler", "etdrk2")), "time stepper"),
    "stepper.dt": ("float", 5e-3, _positive, "step size (a multiple of noise.dt)"),
    "stepper.span": ("list[float]", [0.0, 1.0], _span, "simulate: [t0, t1]"),
    "stepper.stride": ("int", 10, _positive, "record every stride steps"),
    "initial.kind": ("str", "random", _one_of(("random",) + _PRESETS), "initial data"),
    "initial.norm": ("float", 1.0, _nonneg, "V-norm of the initial datum (simulate)"),
    "initial.slope": ("float", 0.0, None, "spectral slope of random initial data"),
    "initial.seed": ("int", 0, lambda s: None if 0 <= s < 2**64 else "must be a u64", "initial-data seed"),
    "experiment.kind": ("str", "simulate", _one_of(EXPERIMENTS), "experiment"),
    "experiment.tau": ("float", 0.0, None, "observation time"),
    "experiment.seeds": ("list[int]?", None, None, "seed ensemble (default: [noise.seed])"),
    "experiment.horizons": ("list[float]", [2.0, 4.0, 8.0, 16.0], _increasing, "pullback horizons"),
    "experiment.initial_scales": ("list[float]", [0.1, 1.0, 3.0, 10.0], _pos_list,
                                  "initial V-norms as multiples of sqrt(R_V) (absorb, flatten, cauchy)"),
    "experiment.thresholds": ("list[float]?", None, None, "flatten: thresholds (default: every resolved shell)"),
    "experiment.delta": ("float", 1e-2, _positive, "flatten: tail target"),
    "experiment.t_pairs": ("list[list]", [[4.0, 8.0], [8.0, 16.0]], _pairs, "cauchy: horizon pairs"),
    "experiment.measure_tolerance": ("bool", True, None, "simulate: dt-halving pilot for the monitor tolerance"),
    "experiment.variants": ("list[str]", ["z1", "z2", "z3", "z4"], _variants, "verify-calming: variants"),
    "experiment.eps_list": ("list[float]", [0.5, 1.0, 2.0, 4.0], _pos_list, "verify-calming: eps values"),
    "experiment.samples": ("int", 100_000, lambda s: None if s >= 10_000 else "must be at least 1e4",
                           "verify-calming: samples per case"),
    "output.dir": ("str", "out", None, "output directory (not part of the hash)"),
    "output.snapshots": ("bool", False, None, "write the final state as a checkpoint"),
}

_NON_SEMANTIC = {"output.dir"}


def _flatten(doc, prefix=""):
    out = {}
    for k, v in doc.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


def _coerce(tag, value):
    """Return (value, error)."""
    optional = tag.endswith("?")
    base = tag.rstrip("?")
    if value is None and optional:
        return None, None
    if base == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            return None, f"expected an integer, got {value!r}"
        return value, None
    if base == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            return None, f"expected a number, got {value!r}"
        return float(value), None
    if base == "bool":
        if not isinstance(value, bool):
            return None, f"expected true/false, got {value!r}"
        return value, None
    if base == "str":
        if not isinstance(value, str):
            return None, f"expected a string, got {value!r}"
        return value, None
    if base.startswith("list"):
        if not isinstance(value, list):
            return None, f"expected a list, got {value!r}"
        inner = base[5:-1]
        if inner == "float":
            if not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in value):
                return None, "expected a list of numbers"
            return [float(x) for x in value], None
        if inner == "int":
            if not all(isinstance(x, int) and not isinstance(x, bool) for x in value):
                return None, "expected a list of integers"
            return list(value), None
        if inner == "str":
            if not all(isinstance(x, str) for x in value):
                return None, "expected a list of strings"
            return list(value), None
        return [[float(y) for y in x] if isinstance(x, list) else x for x in value], None
    raise AssertionError(tag)


@dataclass(frozen=True)
class RunConfig:
    """Validated configuration; ``values`` maps every schema key to its value."""

    values: dict
    hash: str

    def __getitem__(self, key):
        return self.values[key]

    @property
    def experiment(self) -> str:
        return self.values["experiment.kind"]

    @property
    def output_dir(self) -> str:
        return self.values["output.dir"]

    @property
    def seeds(self) -> list:
        s = self.values["experiment.seeds"]
        return [self.values["noise.seed"]] if s is None else list(s)

    def semantic(self) -> dict:
        return {k: v for k, v in sorted(self.values.items()) if k not in _NON_SEMANTIC}

    def replace(self, **dotted) -> "RunConfig":
        """New validated config with some keys changed (``replace(**{"noise.seed": 3})``)."""
        vals = dict(self.values)
        vals.update(dotted)
        return _validate(vals)

    def to_toml(self) -> str:
        lines = []
        for k, v in sorted(self.values.items()):
            if v is None:
                continue
            lines.append(f"{k} = {_toml_value(v)}")
        return "\n".join(lines) + "\n"


def _toml_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, list):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    return repr(v)


def config_hash(values: dict) -> str:
    sem = {k: v for k, v in sorted(values.items()) if k not in _NON_SEMANTIC}
    return hashlib.sha256(json.dumps(sem, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def _validate(raw: dict) -> RunConfig:
    errors = []
    values = {}
    for key in sorted(raw):
        if key not in SCHEMA:
            errors.append(f"{key}: unknown key")
    for key, (tag, default, check, _) in SCHEMA.items():
        if key not in raw:
            values[key] = default
            continue
        val, err = _coerce(tag, raw[key])
        if err is None and check is not None and val is not None:
            err = check(val)
        if err is not None:
            errors.append(f"{key}: {err}")
        else:
            values[key] = val
    if not errors:
        errors += _cross_checks(values)
    if errors:
        raise ConfigError(errors)
    return RunConfig(values=values, hash=config_hash(values))


def _cross_checks(v) -> list:
    errs = []
    ratio = v["stepper.dt"] / v["noise.dt"]
    if abs(ratio - round(ratio)) > 1e-9 * ratio or round(ratio) < 1:
        errs.append("stepper.dt: must be an integer multiple of noise.dt")
    alpha = v["model.alpha"]
    if alpha is not None and not alpha < v["model.nu"]:  # lambda_1 = 1 on the unit torus
        errs.append("model.alpha: must lie in (0, nu * lambda_1)")
    if v["forcing.kind"] == "exp_window":
        a = v["model.nu"] / 2 if alpha is None else alpha
        if not a + 2 * v["forcing.sigma"] > 0:
            errs.append("forcing.sigma: exp_window forcing needs alpha + 2 sigma > 0 for (A1)")
    t0 = v["stepper.span"][0]
    if abs(t0 / v["noise.dt"] - round(t0 / v["noise.dt"])) > 1e-9 * max(1.0, abs(t0 / v["noise.dt"])):
        errs.append("stepper.span: t0 must lie on the noise grid")
    if v["stepper.span"][1] > v["noise.horizon"] or -v["noise.horizon"] > min(0.0, t0):
        errs.append("noise.horizon: must cover stepper.span")
    if v["experiment.kind"] in ("pullback", "absorb", "flatten", "cauchy"):
        if v["experiment.kind"] == "cauchy":
            need = max(max(p) for p in v["experiment.t_pairs"])
        else:
            need = max(v["experiment.horizons"])
        if v["noise.horizon"] < need - v["experiment.tau"]:
            errs.append(f"noise.horizon: pullback experiments need at least {need:g}")
    if v["experiment.kind"] in ("absorb", "flatten", "cauchy"):
        m = calm_sup_norm(CalmingSpec(v["calming.variant"], v["calming.eps"]), strict=False)
        kappa = v["model.nu"] - 2 * m * m / v["model.nu"]
        if not kappa > 0:
            errs.append(f"calming.eps: (A3) fails (kappa = {kappa:g} <= 0); "
                        f"{v['experiment.kind']} needs the absorbing-set regime")
        else:
            # the absorbing radius integrates the noise back to where e^{-kappa s} < 1e-6
            trunc = math.log(1e6) / kappa
            # absorb also needs the fibre radius along each whole pullback trajectory
            back = (need + trunc if v["experiment.kind"] == "absorb" else max(trunc, need)) - v["experiment.tau"]
            if v["noise.horizon"] < back:
                errs.append(f"noise.horizon: the absorbing radius at kappa = {kappa:g} needs at least {back:g}")
    dealias_kmax = v["grid.n"] // 3
    max_thr = (dealias_kmax + 1) ** 2 - 1
    if v["grid.threshold"] is not None and v["grid.threshold"] > max_thr:
        errs.append(f"grid.threshold: exceeds the largest resolved shell ({max_thr}) for n={v['grid.n']}")
    return errs


def parse_config(text: str) -> RunConfig:
    """Parse and validate a TOML document (dotted keys or tables)."""
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError([f"syntax: {e}"]) from None
    return _validate(_flatten(doc))


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
