"""Energy functionals, the explicit-constants ledger and inequality monitors.

The ledger turns every generic constant of the a-priori estimates into a number
computed from (nu, lambda_1, M_eps, h, threshold), together with the chain of
elementary inequalities it came from. Monitors compare recorded trajectory
columns (``t``, ``norm_grad_v``, ``norm_f``, ``z``) against those bounds; they
read nothing else, so re-running them on a CSV file reproduces the verdict.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .exceptions import TheoryRangeError
from .model import ModelParams
from .spectral import SpectralField, sobolev_norm

__all__ = [
    "energy_record",
    "LedgerEntry",
    "ConstantsLedger",
    "build_ledger",
    "export_ledger",
    "sobolev_sum",
    "uniqueness_constant",
    "discounted_integral",
    "gronwall_envelope",
    "MonitorResult",
    "gronwall_monitor",
    "energy_inequality_monitor",
    "ToleranceModel",
    "dt_tolerance",
]


def energy_record(state: SpectralField, t, z, model: ModelParams, thresholds=(), tau=0.0) -> dict:
    """||v||, ||grad v||, ||A v||, |z|, ||f(tau + t)|| and tail V-norms of ``state``."""
    g = state.grid
    p = g.weights * np.sum(np.abs(state.coeffs) ** 2, axis=0)
    pk = p * g.k2
    rec = {
        "t": float(t),
        "norm_v": float(np.sqrt(p.sum())),
        "norm_grad_v": float(np.sqrt(pk.sum())),
        "norm_Av": float(np.sqrt((pk * g.k2).sum())),
        "z": abs(float(z)),
        "norm_f": float(np.sqrt(model.forcing_norm_sq(tau + t))),
    }
    for lam in thresholds:
        rec[f"tail_{float(lam):g}"] = float(np.sqrt(pk[g.k2 > lam].sum()))
    return rec


# --------------------------------------------------------------------------- ledger


@dataclass(frozen=True)
class LedgerEntry:
    name: str
    value: float
    formula: str
    inequality: str
    derivation: tuple

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "value": self.value,
            "formula": self.formula,
            "inequality": self.inequality,
            "derivation": list(self.derivation),
        }


@dataclass
class ConstantsLedger:
    """Named constants with provenance; ``inputs`` records what they were computed from."""

    inputs: dict
    entries: dict = field(default_factory=dict)

    def __getitem__(self, name) -> float:
        return self.entries[name].value

    @property
    def kappa(self) -> float:
        return self["kappa"]

    @property
    def beta_f(self) -> float:
        return self["beta_f"]

    @property
    def beta_z(self) -> float:
        return self["beta_z"]

    @property
    def M1(self) -> float:
        return self["M1"]

    @property
    def a3_holds(self) -> bool:
        return self.inputs["sup_norm"] ** 2 < self.inputs["nu"] ** 2 * self.inputs["lambda1"] / 2

    def to_dict(self) -> dict:
        return {
            "inputs": dict(sorted(self.inputs.items())),
            "entries": {k: self.entries[k].to_dict() for k in sorted(self.entries)},
        }

    @property
    def hash(self) -> str:
        return hashlib.sha256(_canonical_json(self.to_dict()).encode()).hexdigest()


def _canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=True)


def sobolev_sum(grid, threshold) -> float:
    """S = (sum over active k != 0 of |k|^{-2})^{1/2}.

    By Cauchy-Schwarz, sup_x |curl u(x)| <= sum_k |k| |u_k| <= S ||A u|| for any
    field supported on the active modes; S grows with the threshold.
    """
    mask = grid.valid & (grid.k2 <= threshold)
    return float(np.sqrt(np.sum(np.where(mask, grid.weights / grid._k2_safe, 0.0))))


def uniqueness_constant(model: ModelParams) -> float:
    """C_{nu,eps} = (3/2) nu^{-1/3} S^{4/3} of the difference estimate."""
    s = sobolev_sum(model.grid, model.threshold)
    return 1.5 * model.nu ** (-1.0 / 3.0) * s ** (4.0 / 3.0)


def build_ledger(model: ModelParams) -> ConstantsLedger:
    """Explicit constants for the energy, absorbing, flattening and uniqueness estimates."""
    m = model.sup_norm
    if not np.isfinite(m):
        raise TheoryRangeError("the un-calmed (identity) model has no finite sup-norm constant")
    nu, lam1, gamma = model.nu, model.lambda1, model.gamma
    h = model.h
    grad_h = float(sobolev_norm(h, 1.0))
    lin_h = float(SpectralField(h.grid, (gamma - nu * h.grid.k2) * h.coeffs).norm())
    c_h = m * grad_h + lin_h
    kappa = nu * lam1 - 2 * m * m / nu
    beta_f = 4.0 / nu
    beta_z = 4.0 * c_h * c_h / nu
    m1 = max(2.0, 2 * beta_f, 2 * beta_z, 2 * grad_h**2)
    s = sobolev_sum(model.grid, model.threshold)
    c_uniq = uniqueness_constant(model)
    flat = 2 * m * m / nu * max(1.0, beta_f, beta_z)

    inputs = {
        "nu": nu,
        "lambda1": lam1,
        "gamma": gamma,
        "sup_norm": m,
        "calming": f"{model.calming.variant.value}:{model.calming.eps!r}",
        "threshold": model.threshold,
        "grad_h_norm": grad_h,
        "h_linear_norm": lin_h,
        "grid_n": model.grid.n,
    }
    E = {}

    def add(name, value, formula, inequality, *steps):
        E[name] = LedgerEntry(name, float(value), formula, inequality, tuple(steps))

    add("M_eps", m, "sup_x |Z(x)|", "calming bound",
        f"closed-form supremum for variant {model.calming.variant.value} at eps={model.calming.eps!r}")
    add("c_h", c_h, "M_eps ||grad h|| + ||gamma h - nu A h||", "energy inequality (noise source)",
        "<B(Z(u),u), Av> <= M_eps ||grad u|| ||Av|| (pointwise |Z| <= M_eps, ||curl u|| = ||grad u||)",
        "||grad u|| <= ||grad v|| + |z| ||grad h||",
        "noise terms: z <gamma h - nu A h, Av> <= |z| ||gamma h - nu A h|| ||Av||")
    add("kappa", kappa, "nu lambda_1 - 2 M_eps^2 / nu", "energy inequality / Gronwall decay rate",
        "Young: M ||grad v|| ||Av|| <= (nu/4)||Av||^2 + (M^2/nu)||grad v||^2",
        "Poincare: ||Av||^2 >= lambda_1 ||grad v||^2",
        "(A3) M_eps^2 < nu^2 lambda_1 / 2  <=>  kappa > 0 (exact algebra)",
        f"(A3) holds: {m * m < nu * nu * lam1 / 2}")
    add("beta_f", beta_f, "4 / nu", "energy inequality (forcing coefficient)",
        "Young: ||f|| ||Av|| <= (nu/8)||Av||^2 + (2/nu)||f||^2, doubled",
        "f is the Leray- and Galerkin-projected forcing")
    add("beta_z", beta_z, "4 c_h^2 / nu", "energy inequality (noise coefficient)",
        "Young: |z| c_h ||Av|| <= (nu/8)||Av||^2 + (2 c_h^2/nu) z^2, doubled",
        "total ||Av||^2 weight used: nu/4 + nu/8 + nu/8 = nu/2, leaving nu ||Av||^2 after doubling",
        "result: d/dt ||grad v||^2 + kappa ||grad v||^2 <= beta_f ||f||^2 + beta_z z^2")
    add("M1", m1, "max(2, 2 beta_f, 2 beta_z, 2 ||grad h||^2)", "absorbing radius calibration",
        "Gronwall from tau - t: ||grad v(tau)||^2 <= e^{-kappa t}||grad v_0||^2 + int e^{kappa r}(beta_f||f||^2 + beta_z z^2)",
        "u = v + h z(omega): ||grad u||^2 <= 2||grad v||^2 + 2 z^2 ||grad h||^2",
        "e^{-kappa t}||grad v_0||^2 <= 1 beyond the entry time; every bracket term then carries a factor <= M1")
    add("S_Lambda", s, "(sum_{active k} |k|^{-2})^{1/2}", "uniqueness estimate (sup-norm of vorticity)",
        "sup |curl w| <= sum |k||w_k| <= S ||A w|| (Cauchy-Schwarz over the active modes)")
    add("C_uniq", c_uniq, "(3/2) nu^{-1/3} S_Lambda^{4/3}", "uniqueness / continuous-dependence estimate",
        "difference equation tested with w = u_a - u_b",
        "<(curl w) x Z(u_a), w> <= M ||grad w|| ||w|| <= (nu/2)||grad w||^2 + (M^2/2nu)||w||^2",
        "<(curl u_b) x (Z(u_a)-Z(u_b)), w> <= sup|curl u_b| ||w||^2 <= S ||A u_b|| ||w||^{3/2} ||grad w||^{1/2}",
        "Young (4, 4/3) with weight nu/4: <= (nu/4)||grad w||^2 + (3/4) nu^{-1/3} S^{4/3} ||A u_b||^{4/3} ||w||^2",
        "remaining -(nu/2)||grad w||^2 <= -(nu lambda_1/2)||w||^2 absorbs M^2/nu when kappa > 0",
        "d/dt ||w||^2 <= (-kappa/2 + C_uniq ||A u_b||^{4/3}) ||w||^2")
    add("flattening_prefactor", flat, "(2 M_eps^2 / nu) max(1, beta_f, beta_z)", "flattening tail estimate",
        "tail equation tested with A Q v gives d/dt||grad Qv||^2 + nu lambda_next ||grad Qv||^2 <= (2M^2/nu)||grad v||^2 + beta_f||Qf||^2 + beta_z z^2",
        "I2 = (2M^2/nu) int e^{-nu lambda_next (tau-s)} ||grad v(s)||^2 ds <= prefactor * bracket / (nu lambda_next - kappa)")
    return ConstantsLedger(inputs=inputs, entries=E)


def export_ledger(ledger: ConstantsLedger) -> tuple[str, str]:
    """(markdown, json) renderings; both deterministic."""
    d = ledger.to_dict()
    js = json.dumps({**d, "hash": ledger.hash}, sort_keys=True, indent=2)
    lines = ["# Constants ledger", "", f"hash: `{ledger.hash}`", "", "## Inputs", ""]
    for k, v in d["inputs"].items():
        lines.append(f"- `{k}` = {v!r}")
    for name, e in d["entries"].items():
        lines += ["", f"## {name} = {e['value']:.12g}", "", f"formula: `{e['formula']}`",
                  f"used in: {e['inequality']}", ""]
        lines += [f"{i + 1}. {step}" for i, step in enumerate(e["derivation"])]
    return "\n".join(lines) + "\n", js + "\n"


# --------------------------------------------------------------------------- monitors


def discounted_integral(times, g, rate) -> np.ndarray:
    """J(t_i) = int_{t_0}^{t_i} e^{-rate (t_i - s)} g(s) ds, trapezoid on possibly uneven times."""
    t = np.asarray(times, dtype=float)
    g = np.asarray(g, dtype=float)
    out = np.zeros_like(t)
    for i in range(1, t.size):
        d = t[i] - t[i - 1]
        a = np.exp(-rate * d)
        out[i] = a * out[i - 1] + 0.5 * d * (a * g[i - 1] + g[i])
    return out


def gronwall_envelope(rec, ledger: ConstantsLedger) -> np.ndarray:
    """Right side of the integrated energy bound at every record."""
    t = np.asarray(rec["t"], dtype=float)
    g0 = float(rec["norm_grad_v"][0]) ** 2
    src = ledger.beta_f * np.asarray(rec["norm_f"]) ** 2 + ledger.beta_z * np.asarray(rec["z"]) ** 2
    return np.exp(-ledger.kappa * (t - t[0])) * g0 + discounted_integral(t, src, ledger.kappa)


@dataclass
class MonitorResult:
    name: str
    passed: bool
    slack: np.ndarray
    worst_slack: float
    worst_index: int
    worst_time: float
    tolerance: float
    n_records: int
    details: dict = field(default_factory=dict)
    allowance: np.ndarray | None = None  # per-record tolerance plus round-off floor

    @property
    def violations(self) -> int:
        allow = self.tolerance if self.allowance is None else self.allowance
        return int(np.sum(self.slack < -allow))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "worst_slack": self.worst_slack,
            "worst_index": self.worst_index,
            "worst_time": self.worst_time,
            "tolerance": self.tolerance,
            "violations": self.violations,
            "n_records": self.n_records,
            "details": self.details,
        }


_ROUNDOFF = 1e-12


def _result(name, t, slack, tol, details, scale):
    """A record passes when slack >= -(tol + 1e-12 * scale): the relative floor keeps
    round-off from failing records that sit exactly on the bound."""
    i = int(np.argmin(slack))
    allow = tol + _ROUNDOFF * np.abs(scale)
    return MonitorResult(
        name=name,
        passed=bool(np.all(slack >= -allow)),
        slack=slack,
        worst_slack=float(slack[i]),
        worst_index=i,
        worst_time=float(t[i]),
        tolerance=float(tol),
        n_records=int(t.size),
        details=details,
        allowance=np.broadcast_to(allow, slack.shape).copy(),
    )


def gronwall_monitor(rec, ledger: ConstantsLedger, tolerance: float = 0.0) -> MonitorResult:
    """Integrated energy bound checked at every record; slack = bound - ||grad v||^2.

    ``rec`` is anything indexable by column name (a TrajectoryRecord or a dict
    of arrays read back from CSV). A record passes when slack >= -tolerance.
    """
    t = np.asarray(rec["t"], dtype=float)
    if t.size < 2:
        raise ValueError("the Gronwall monitor needs at least two records")
    bound = gronwall_envelope(rec, ledger)
    slack = bound - np.asarray(rec["norm_grad_v"], dtype=float) ** 2
    return _result("gronwall", t, slack, tolerance,
                   {"kappa": ledger.kappa, "beta_f": ledger.beta_f, "beta_z": ledger.beta_z}, bound)


def energy_inequality_monitor(rec, ledger: ConstantsLedger, tolerance: float = 0.0) -> MonitorResult:
    """Differential form between consecutive records:

        Delta||grad v||^2 / Delta t <= mean over the interval of
            (-kappa ||grad v||^2 + beta_f ||f||^2 + beta_z z^2)

    with the mean taken by the trapezoid rule. Slack is right minus left.
    """
    t = np.asarray(rec["t"], dtype=float)
    if t.size < 2:
        raise ValueError("the energy-inequality monitor needs at least two records")
    e = np.asarray(rec["norm_grad_v"], dtype=float) ** 2
    rhs = (-ledger.kappa * e + ledger.beta_f * np.asarray(rec["norm_f"]) ** 2
           + ledger.beta_z * np.asarray(rec["z"]) ** 2)
    lhs = np.diff(e) / np.diff(t)
    slack = 0.5 * (rhs[1:] + rhs[:-1]) - lhs
    scale = np.maximum(np.abs(lhs), 0.5 * (np.abs(rhs[1:]) + np.abs(rhs[:-1])))
    return _result("energy_inequality", t[1:], slack, tolerance, {"kappa": ledger.kappa}, scale)


@dataclass
class ToleranceModel:
    """Additive O(dt) slack measured by step halving.

    ``d1 = max |E_dt - E_{dt/2}|`` and ``d2 = max |E_{dt/2} - E_{dt/4}|`` over
    common record times, with E = ||grad v||^2. For a first-order scheme the
    error of the dt run is about d1, so the tolerance is ``2 d1`` (coefficient
    ``2 d1 / dt``); ``shrink = d1 / d2`` should be close to 2.
    """

    dt: float
    d1: float
    d2: float

    @property
    def coefficient(self) -> float:
        return 2.0 * self.d1 / self.dt

    @property
    def tolerance(self) -> float:
        return 2.0 * self.d1

    @property
    def tolerance_half(self) -> float:
        return 2.0 * self.d2

    @property
    def shrink(self) -> float:
        return self.d1 / self.d2 if self.d2 > 0 else float("inf")

    def to_dict(self) -> dict:
        return {"dt": self.dt, "d1": self.d1, "d2": self.d2, "coefficient": self.coefficient,
                "tolerance": self.tolerance, "tolerance_half": self.tolerance_half,
                "shrink": self.shrink}


def _common(a, b, column):
    ta, tb = np.round(np.asarray(a["t"]) * 1e9), np.round(np.asarray(b["t"]) * 1e9)
    _, ia, ib = np.intersect1d(ta, tb, return_indices=True)
    if ia.size == 0:
        raise ValueError("records share no snapshot times")
    return np.asarray(a[column])[ia], np.asarray(b[column])[ib]


def dt_tolerance(rec_dt, rec_half, rec_quarter, dt) -> ToleranceModel:
    """Tolerance model from three runs at dt, dt/2, dt/4 on the same noise path."""
    a, b = _common(rec_dt, rec_half, "norm_grad_v")
    c, d = _common(rec_half, rec_quarter, "norm_grad_v")
    d1 = float(np.max(np.abs(a**2 - b**2)))
    d2 = float(np.max(np.abs(c**2 - d**2)))
    return ToleranceModel(float(dt), d1, d2)
