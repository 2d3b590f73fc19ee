"""Time stepping of the v-form Galerkin system.

Both schemes treat the Stokes term exactly through the integrating factor
``E = exp(-nu |k|^2 dt)`` and the rest (advection, forcing, noise terms) explicitly:

* ``exp_euler``:  v+ = E (v + dt N(v, t; zbar))
* ``etdrk2``:     a  = E v + dt phi1 N(v, t)
                  v+ = a + dt phi2 (N(a, t + dt) - N(v, t))

with phi1(x) = (e^x - 1)/x and phi2(x) = (e^x - 1 - x)/x^2 at x = -nu |k|^2 dt.

In ``exp_euler`` the noise enters through ``zbar``, the trapezoid mean of the
stored z samples over the step, rather than the left-point value z(t). Both are
first order, but the left-point sum of a rough path carries a random O(dt)
error whose size fluctuates from one step size to the next; with the mean the
error is deterministic and halves cleanly with dt. ``etdrk2`` uses the
endpoint values z(t) and z(t + dt).

Time is tracked as an integer index on the noise grid, so a run resumed from a
checkpoint visits exactly the same step times as an uninterrupted one.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import BlowUpError, GridMismatchError
from .model import ModelParams, nonlinear_part
from .noise import OUPath, zero_ou_path
from .spectral import SpectralField, fourier_mode, leray_project

__all__ = [
    "SCHEMES",
    "StepperConfig",
    "TrajectoryRecord",
    "tail_label",
    "step",
    "integrate",
    "weak_test_fields",
    "DependenceReport",
    "continuous_dependence_experiment",
]

SCHEMES = ("exp_euler", "etdrk2")
_ALIGN_TOL = 1e-9


@dataclass(frozen=True)
class StepperConfig:
    scheme: str = "exp_euler"
    dt: float = 5e-3
    t_span: tuple = (0.0, 1.0)
    snapshot_stride: int = 1

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; valid: {', '.join(SCHEMES)}")
        if not self.dt > 0:
            raise ValueError("stepper dt must be positive")
        t0, t1 = (float(x) for x in self.t_span)
        if not t1 >= t0:
            raise ValueError("t_span must satisfy t0 <= t1")
        object.__setattr__(self, "t_span", (t0, t1))
        if int(self.snapshot_stride) != self.snapshot_stride or self.snapshot_stride < 1:
            raise ValueError("snapshot_stride must be a positive integer")

    def replace(self, **changes) -> "StepperConfig":
        kw = dict(scheme=self.scheme, dt=self.dt, t_span=self.t_span,
                  snapshot_stride=self.snapshot_stride)
        kw.update(changes)
        return StepperConfig(**kw)


def _phi(x):
    """phi1, phi2 with a series branch near x = 0."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-3
    xs = np.where(small, 1.0, x)
    phi1 = np.where(small, 1 + x / 2 + x * x / 6 + x**3 / 24, np.expm1(xs) / xs)
    phi2 = np.where(small, 0.5 + x / 6 + x * x / 24 + x**3 / 120,
                    (np.expm1(xs) - xs) / (xs * xs))
    return phi1, phi2


class _Operators:
    """Per-(model, dt) cache of the linear factors."""

    def __init__(self, model: ModelParams, dt: float):
        x = -model.nu * model.grid.k2 * dt
        self.dt = dt
        self.E = np.exp(x)
        self.phi1, self.phi2 = _phi(x)


def _advance(model, ops, vc, t_force, z0, z1, scheme, zbar=None):
    """One step on raw coefficients; returns (v_next, N(v_n)).

    ``exp_euler`` uses ``zbar`` (falling back to z0); ``etdrk2`` uses z0 and z1.
    """
    g = model.grid
    if scheme == "exp_euler":
        zz = z0 if zbar is None else zbar
        n0 = nonlinear_part(model, SpectralField(g, vc), t_force, zz).coeffs
        return ops.E * (vc + ops.dt * n0), n0
    n0 = nonlinear_part(model, SpectralField(g, vc), t_force, z0).coeffs
    a = ops.E * vc + ops.dt * ops.phi1 * n0
    n1 = nonlinear_part(model, SpectralField(g, a), t_force + ops.dt, z1).coeffs
    return a + ops.dt * ops.phi2 * (n1 - n0), n0


def _check_finite(vc, t):
    if not np.isfinite(vc).all():
        raise BlowUpError(t)


def step(v: SpectralField, t, stepper: StepperConfig, model: ModelParams,
         ou: OUPath | None = None, tau: float = 0.0) -> SpectralField:
    """Advance ``v`` from local time ``t`` by one stepper dt.

    ``z`` is read from ``ou`` over [t, t + dt] (zero when ``ou`` is None);
    forcing is evaluated at ``tau + t``.
    """
    ops = _Operators(model, stepper.dt)
    if ou is None:
        z0 = z1 = zbar = 0.0
    else:
        z0, z1 = ou.value_at(t), ou.value_at(t + stepper.dt)
        zbar = _step_mean(ou, t, t + stepper.dt)
    out, _ = _advance(model, ops, v.coeffs, tau + t, z0, z1, stepper.scheme, zbar)
    _check_finite(out, t + stepper.dt)
    return SpectralField(model.grid, out)


def _step_mean(ou, a, b) -> float:
    """Trapezoid mean of z over [a, b]: stored nodes inside plus the (interpolated) ends."""
    k0, k1 = a / ou.dt, b / ou.dt
    inner = np.arange(int(np.floor(k0 + _ALIGN_TOL)) + 1, int(np.ceil(k1 - _ALIGN_TOL)))
    ts = np.concatenate([[a], inner * ou.dt, [b]])
    zs = np.array([ou.value_at(x) for x in ts])
    return float(np.sum(0.5 * (zs[1:] + zs[:-1]) * np.diff(ts)) / (b - a))


def weak_test_fields(grid):
    """Fixed battery of low-mode divergence-free test fields for the weak residual."""
    fields = []
    for k, a in (((1, 0, 0), (0, 1, 0)), ((0, 1, 0), (0, 0, 1)), ((0, 0, 1), (1, 0, 0)),
                 ((1, 1, 0), (0, 0, 1j)), ((1, 0, 1), (0, 1, 0)), ((0, 1, 1), (1, 0, 0))):
        w = leray_project(fourier_mode(grid, k, a))
        fields.append(w / w.norm())
    return fields


@dataclass
class TrajectoryRecord:
    """Per-snapshot diagnostics of one run plus the final state.

    ``columns`` holds (in order) ``norm_v``, ``norm_grad_v``, ``norm_Av``, ``z``,
    ``norm_f``, ``norm_grad_u`` (u = v + h z) and one ``tail_<threshold>`` column
    (V-norm of the spectral tail of v above that eigenvalue) per configured threshold.
    """

    times: np.ndarray
    columns: dict
    final_state: SpectralField
    final_time: float
    scheme: str
    dt: float
    tau: float = 0.0
    thresholds: tuple = ()
    snapshots: list | None = None
    weak_residual: float | None = None
    dvdt_sq_integral: float | None = None
    meta: dict = field(default_factory=dict)

    @property
    def column_names(self) -> list:
        return ["t", *self.columns]

    def table(self) -> np.ndarray:
        return np.column_stack([self.times, *self.columns.values()])

    def __getitem__(self, name) -> np.ndarray:
        if name == "t":
            return self.times
        return self.columns[name]

    def __len__(self):
        return self.times.size


def tail_label(threshold) -> str:
    return f"tail_{float(threshold):g}"


def _diagnostic_row(model, vc, z, t_force, thresholds, weights_k2):
    w, k2 = weights_k2
    p = w * np.sum(vc.real**2 + vc.imag**2, axis=0)
    pk = p * k2
    uc = vc + z * model.h.coeffs
    pu = w * k2 * np.sum(uc.real**2 + uc.imag**2, axis=0)
    row = [np.sqrt(p.sum()), np.sqrt(pk.sum()), np.sqrt((pk * k2).sum()), z,
           np.sqrt(model.forcing_norm_sq(t_force)), np.sqrt(pu.sum())]
    for lam in thresholds:
        row.append(np.sqrt(pk[k2 > lam].sum()))
    return row


def integrate(
    v0: SpectralField,
    stepper: StepperConfig,
    model: ModelParams,
    ou: OUPath | None = None,
    *,
    t_span=None,
    tau: float = 0.0,
    tail_thresholds=(),
    keep_snapshots: bool = False,
    weak_residual: bool = False,
) -> TrajectoryRecord:
    """Integrate the v-equation over local times ``t_span`` (default ``stepper.t_span``).

    z is taken from ``ou`` at local time t; forcing from ``tau + t``. The span
    start must lie on the noise grid; when its length is not a whole number of
    steps a final shorter step lands exactly on ``t1``. Diagnostics are recorded
    every ``snapshot_stride`` steps and at the final time.
    """
    if v0.grid != model.grid:
        raise GridMismatchError(f"{v0.grid} vs {model.grid}")
    t0, t1 = stepper.t_span if t_span is None else (float(t_span[0]), float(t_span[1]))
    if ou is None:
        ou = zero_ou_path(min(t0, 0.0), max(t1, 0.0) + stepper.dt, stepper.dt, model.gamma)
    base = ou.dt
    ratio = stepper.dt / base
    m = int(round(ratio))
    if m < 1 or abs(ratio - m) > _ALIGN_TOL * ratio:
        raise ValueError(f"stepper dt={stepper.dt} is not an integer multiple of noise dt={base}")
    i0 = int(round(t0 / base))
    if abs(t0 / base - i0) > _ALIGN_TOL * max(1.0, abs(i0)):
        raise ValueError(f"t0={t0} is not on the noise grid (dt={base})")
    span_steps = (t1 - t0) / stepper.dt
    n_full = int(np.floor(span_steps + _ALIGN_TOL))
    remainder = (t1 - t0) - n_full * stepper.dt
    if remainder < _ALIGN_TOL * stepper.dt:
        remainder = 0.0
    # validate the horizon up front (raises InsufficientHorizonError)
    ou.index(i0 * base)
    ou.value_at(t1)

    zvals = ou.values
    off = ou.path.origin - ou.path.start
    g = model.grid
    ops = _Operators(model, stepper.dt)
    weights_k2 = (g.weights, g.k2)
    thresholds = tuple(float(x) for x in tail_thresholds)
    stride = int(stepper.snapshot_stride)

    tests = weak_test_fields(g) if weak_residual else None
    worst_weak, dvdt_int = 0.0, 0.0

    vc = np.where(model.mask, v0.coeffs, 0.0)
    times, rows, snaps = [], [], []

    def record(t, z):
        times.append(t)
        rows.append(_diagnostic_row(model, vc, z, tau + t, thresholds, weights_k2))
        if keep_snapshots:
            snaps.append(SpectralField(g, vc.copy()))

    wmean = np.full(m + 1, 1.0 / m)
    wmean[0] = wmean[-1] = 0.5 / m
    i = i0
    t = i * base
    record(t, float(zvals[i + off]))
    for n in range(1, n_full + 1):
        z0 = float(zvals[i + off])
        z1 = float(zvals[i + m + off])
        zbar = float(wmean @ zvals[i + off: i + off + m + 1])
        new, n0 = _advance(model, ops, vc, tau + t, z0, z1, stepper.scheme, zbar)
        i += m
        t_new = i * base
        _check_finite(new, t_new)
        if weak_residual:
            dv = (new - vc) / stepper.dt
            r = dv - (n0 - model.nu * g.k2 * vc)
            for w in tests:
                worst_weak = max(worst_weak, abs(_inner_raw(g, r, w.coeffs)))
            dvdt_int += stepper.dt * _inner_raw(g, dv, dv)
        vc, t = new, t_new
        if n % stride == 0 or (n == n_full and remainder == 0.0):
            record(t, z1)
    if remainder > 0.0:
        ops_r = _Operators(model, remainder)
        z0 = float(zvals[i + off])
        z1 = ou.value_at(t1)
        new, _ = _advance(model, ops_r, vc, tau + t, z0, z1, stepper.scheme, _step_mean(ou, t, t1))
        _check_finite(new, t1)
        vc, t = new, t1
        record(t, z1)

    cols = np.asarray(rows, dtype=float).T
    names = ["norm_v", "norm_grad_v", "norm_Av", "z", "norm_f", "norm_grad_u"] + [tail_label(x) for x in thresholds]
    return TrajectoryRecord(
        times=np.asarray(times, dtype=float),
        columns=dict(zip(names, cols)),
        final_state=SpectralField(g, vc),
        final_time=float(t),
        scheme=stepper.scheme,
        dt=float(stepper.dt),
        tau=float(tau),
        thresholds=thresholds,
        snapshots=snaps if keep_snapshots else None,
        weak_residual=worst_weak if weak_residual else None,
        dvdt_sq_integral=dvdt_int if weak_residual else None,
    )


def _inner_raw(grid, a, b) -> float:
    return float(np.sum(grid.weights * np.sum((a * np.conj(b)).real, axis=0)))


@dataclass
class DependenceReport:
    times: np.ndarray
    gap_sq: np.ndarray
    bound: np.ndarray
    initial_gap_sq: float
    constant: float
    max_gap: float
    worst_ratio: float
    satisfied: bool

    @property
    def gap_ratio(self) -> float:
        """How much of the bound the gap uses: max over t > 0 of gap^2 / bound.

        Both sides are quadratic in the initial gap while the dynamics stay
        linearisable, so this should not depend on the perturbation size.
        """
        return self.worst_ratio

    @property
    def amplification(self) -> float:
        """max_t ||u_a - u_b||^2 / ||u_a(0) - u_b(0)||^2."""
        return self.max_gap / self.initial_gap_sq if self.initial_gap_sq > 0 else 0.0

    def to_dict(self) -> dict:
        return {
            "initial_gap_sq": self.initial_gap_sq,
            "constant": self.constant,
            "max_gap": self.max_gap,
            "gap_ratio": self.gap_ratio,
            "amplification": self.amplification,
            "worst_ratio": self.worst_ratio,
            "satisfied": self.satisfied,
        }


def continuous_dependence_experiment(
    v0_a: SpectralField,
    v0_b: SpectralField,
    stepper: StepperConfig,
    model: ModelParams,
    ou: OUPath | None = None,
    *,
    tau: float = 0.0,
) -> DependenceReport:
    """Run two trajectories on the same noise path and compare their gap with
    the uniqueness estimate

        ||u_a(t) - u_b(t)||^2 <= exp(int_0^t [max(0, -kappa/2) + C ||A u_b||^{4/3}] ds) ||u_a(0) - u_b(0)||^2

    where C is the ledger's uniqueness constant. Both sides are evaluated on
    the recorded snapshots (trapezoid rule in time).
    """
    from .diagnostics import uniqueness_constant

    if v0_a.grid != v0_b.grid:
        raise GridMismatchError(f"{v0_a.grid} vs {v0_b.grid}")
    ra = integrate(v0_a, stepper, model, ou, tau=tau, keep_snapshots=True)
    rb = integrate(v0_b, stepper, model, ou, tau=tau, keep_snapshots=True)
    t = rb.times
    gap_sq = np.array([(a - b).norm() ** 2 for a, b in zip(ra.snapshots, rb.snapshots)])
    h = model.h
    z = rb["z"]
    au = np.array([(s + h * zz).norm(2) for s, zz in zip(rb.snapshots, z)])
    c = uniqueness_constant(model)
    rate = max(0.0, -model.kappa / 2) + c * au ** (4.0 / 3.0)
    expo = np.concatenate([[0.0], np.cumsum(0.5 * (rate[1:] + rate[:-1]) * np.diff(t))])
    bound = np.exp(expo) * gap_sq[0]
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(bound > 0, gap_sq / bound, 0.0)
    worst = float(ratio[1:].max()) if len(ratio) > 1 else float(ratio.max())
    return DependenceReport(
        times=t,
        gap_sq=gap_sq,
        bound=bound,
        initial_gap_sq=float(gap_sq[0]),
        constant=float(c),
        max_gap=float(gap_sq.max()),
        worst_ratio=worst,
        satisfied=bool(np.all(gap_sq <= bound * (1 + 1e-12))),
    )

