"""Random-dynamical-system layer: cocycle, pullback runs and attractor diagnostics.

Noise paths are passed as :class:`~calmedns.noise.OUPath` objects; the
underlying Wiener path is ``ou.path``. The cocycle started at anchor ``tau``
on the fibre ``omega`` reads z(theta_r omega) at local time ``r`` and the
forcing at ``tau + r``; pulling back by ``t`` means using the fibre
``theta_{-t} omega`` and the anchor ``tau - t``.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .diagnostics import build_ledger, discounted_integral, gronwall_monitor
from .exceptions import BlowUpError, InsufficientHorizonError, TheoryRangeError
from .integrator import StepperConfig, TrajectoryRecord, integrate
from .model import ModelParams
from .noise import OUPath, discounted_running_integral, trapezoid_discounted
from .spectral import SpectralField, sobolev_norm, tail_part

__all__ = [
    "CocycleQuery",
    "cocycle",
    "pullback",
    "PullbackFamily",
    "pullback_family",
    "AbsorbingEstimate",
    "absorbing_radius",
    "fiber_radius_series",
    "AbsorbingReport",
    "absorbing_experiment",
    "tempered_radius_probe",
    "FlatteningReport",
    "flattening_analysis",
    "CauchyReport",
    "attractor_cauchy_test",
    "ConsistencyReport",
    "calming_consistency_probe",
    "worker_count",
]

TRUNCATION = 1e-6


def worker_count() -> int:
    """Thread count from ``CALMEDNS_THREADS`` (default 1)."""
    raw = os.environ.get("CALMEDNS_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"CALMEDNS_THREADS must be an integer, got {raw!r}") from None
    return max(1, n)


def _run_jobs(fn, keys, workers=None):
    """Evaluate ``fn(key)`` for each key; results returned in sorted-key order."""
    keys = sorted(keys)
    workers = worker_count() if workers is None else max(1, int(workers))
    if workers == 1 or len(keys) < 2:
        results = [fn(k) for k in keys]
    else:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(fn, keys))
    return dict(zip(keys, results))


# --------------------------------------------------------------------------- cocycle


@dataclass(frozen=True, eq=False)
class CocycleQuery:
    t: float
    tau: float
    omega: OUPath
    u_tau: SpectralField

    def __post_init__(self):
        if self.t < 0:
            raise ValueError("elapsed time t must be non-negative")


def _run(q: CocycleQuery, model, stepper, **kw):
    """(u at tau + t, v-record) for a cocycle query."""
    ou = q.omega
    z0 = ou.value_at(0.0)
    v0 = q.u_tau - model.h * z0
    rec = integrate(v0, stepper, model, ou, t_span=(0.0, q.t), tau=q.tau, **kw)
    zt = ou.value_at(q.t)
    return rec.final_state + model.h * zt, rec


def cocycle(q: CocycleQuery, model: ModelParams, stepper: StepperConfig) -> SpectralField:
    """Phi(t, tau, omega, u_tau): u_tau -> v_tau = u_tau - h z(omega), integrate the
    v-equation for a time t along omega, return v + h z(theta_t omega).

    ``stepper.t_span`` is ignored; only scheme and dt are used.
    """
    if q.t == 0:
        return q.u_tau.copy()
    u, _ = _run(q, model, stepper)
    return u


def pullback(t, tau, omega: OUPath, u0, model, stepper, **kw):
    """(u(tau), v-record) of Phi(t, tau - t, theta_{-t} omega, u0)."""
    if t == 0:
        return u0.copy(), None
    shifted = omega.shift(-t)
    return _run(CocycleQuery(t, tau - t, shifted, u0), model, stepper, **kw)


@dataclass
class PullbackFamily:
    tau: float
    t_list: tuple
    initials: list
    states: dict  # (t, initial index) -> SpectralField u(tau)
    records: dict  # (t, initial index) -> TrajectoryRecord | None

    def terminal_grad_norms(self) -> dict:
        return {k: float(sobolev_norm(s, 1.0)) for k, s in self.states.items()}


def pullback_family(tau, t_list, omega: OUPath, initials, model, stepper, *,
                    workers=None, snapshot_stride=None) -> PullbackFamily:
    """Phi(t, tau - t, theta_{-t} omega, u0) for every t in ``t_list`` and every initial."""
    t_list = tuple(float(t) for t in t_list)
    if any(b <= a for a, b in zip(t_list, t_list[1:])):
        raise ValueError("t_list must be strictly increasing")
    if t_list and omega.t_min > -t_list[-1] + 1e-12:
        raise InsufficientHorizonError(
            f"pullback by {t_list[-1]} needs the noise path from {-t_list[-1]}, have {omega.t_min}"
        )
    st = stepper if snapshot_stride is None else stepper.replace(snapshot_stride=snapshot_stride)

    def job(key):
        t, i = key
        return pullback(t, tau, omega, initials[i], model, st)

    out = _run_jobs(job, [(t, i) for t in t_list for i in range(len(initials))], workers)
    return PullbackFamily(
        tau=float(tau),
        t_list=t_list,
        initials=list(initials),
        states={k: v[0] for k, v in out.items()},
        records={k: v[1] for k, v in out.items()},
    )


# --------------------------------------------------------------------------- absorbing set


def _truncation_horizon(kappa) -> float:
    return float(np.log(1.0 / TRUNCATION) / kappa)


def _forcing_sq_series(model, tau, times):
    times = np.asarray(times, dtype=float)
    if model.forcing.kind == "constant":
        return np.full_like(times, model.forcing_norm_sq(tau))
    return np.array([model.forcing_norm_sq(tau + t) for t in times])


@dataclass
class AbsorbingEstimate:
    R_V: float
    M1: float
    bracket: float
    z_omega: float
    forcing_integral: float
    ou_integral: float
    kappa: float
    horizon: float
    truncation_factor: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def absorbing_radius(tau, omega: OUPath, model: ModelParams, horizon=None, stride=1) -> AbsorbingEstimate:
    """R_V(tau, omega) = M1 [1 + z(omega)^2 + int_{-T}^0 e^{kappa r}(||f(tau+r)||^2 + z(theta_r omega)^2) dr].

    R_V bounds the squared V-norm ||grad u(tau)||^2. ``horizon`` defaults to the
    T with e^{-kappa T} = 1e-6. ``stride`` > 1 evaluates the quadrature on a
    coarser sub-grid (refinement checks).
    """
    kappa = model.kappa
    if not kappa > 0:
        raise TheoryRangeError(f"kappa = {kappa:g} <= 0: the absorbing-radius bound does not apply")
    T = _truncation_horizon(kappa) if horizon is None else float(horizon)
    dt = omega.dt
    T = np.ceil(T / (dt * stride) - 1e-9) * dt * stride
    if omega.t_min > -T + 1e-12:
        raise InsufficientHorizonError(f"absorbing radius needs the noise path from {-T:g}, have {omega.t_min:g}")
    zs = omega.values_between(-T, 0.0)
    r = -T + dt * np.arange(zs.size)
    fint = trapezoid_discounted(_forcing_sq_series(model, tau, r), dt, kappa, stride)
    zint = trapezoid_discounted(zs * zs, dt, kappa, stride)
    z0 = omega.value_at(0.0)
    bracket = 1.0 + z0 * z0 + fint + zint
    m1 = build_ledger(model).M1
    return AbsorbingEstimate(
        R_V=m1 * bracket,
        M1=m1,
        bracket=bracket,
        z_omega=z0,
        forcing_integral=fint,
        ou_integral=zint,
        kappa=kappa,
        horizon=float(T),
        truncation_factor=float(np.exp(-kappa * T)),
    )


def fiber_radius_series(tau, omega: OUPath, model: ModelParams):
    """(times, R_V(tau + s, theta_s omega)) for every stored s whose past covers the
    truncation horizon. Integrals start at the first stored node."""
    kappa = model.kappa
    if not kappa > 0:
        raise TheoryRangeError(f"kappa = {kappa:g} <= 0")
    t = omega.times
    z = omega.values
    src = _forcing_sq_series(model, tau, t) + z * z
    run = discounted_running_integral(src, omega.dt, kappa)
    radius = build_ledger(model).M1 * (1.0 + z * z + run)
    valid = t - t[0] >= _truncation_horizon(kappa) - 1e-9
    return t[valid], radius[valid]


def tempered_radius_probe(tau, omega: OUPath, model: ModelParams, rates=(0.1, 1.0, 10.0), block=1.0):
    """Block maxima of e^{c s} R_V(tau + s, theta_s omega) over s in [-(j+1) block, -j block].

    Temperedness means these decay to 0 going into the past; the returned dict
    maps each rate to the array of block maxima ordered from s = 0 backwards.
    """
    t, radius = fiber_radius_series(tau, omega, model)
    nblocks = int(np.floor(-t[0] / block))
    out = {}
    for c in rates:
        w = np.exp(c * t) * radius
        out[float(c)] = np.array([
            w[(t <= -j * block + 1e-12) & (t >= -(j + 1) * block - 1e-12)].max() for j in range(nblocks)
        ])
    return out


@dataclass
class AbsorbingReport:
    estimate: AbsorbingEstimate
    t_list: tuple
    initial_norms: list
    terminal: dict  # (t, i) -> ||grad u(tau)||^2
    inside: dict
    entry_time: dict  # (t, i) -> first local time after which the path stays inside, or None
    entry_elapsed: dict
    T1: dict  # i -> smallest horizon from which every terminal state is inside (None if never)
    gronwall_ok: dict
    temperedness: dict  # i -> [e^{-kappa t} ||grad v_{tau-t}||^2 for t in t_list]
    violations: list = field(default_factory=list)

    @property
    def all_absorbed(self) -> bool:
        return all(v is not None for v in self.entry_time.values()) and all(self.inside.values())

    @property
    def entry_monotone(self) -> bool:
        """Entry times (as local times relative to tau) nonincreasing in the horizon."""
        n = len(self.initial_norms)
        for i in range(n):
            seq = [self.entry_time[(t, i)] for t in self.t_list]
            if any(e is None for e in seq):
                return False
            if any(b > a + 1e-9 for a, b in zip(seq, seq[1:])):
                return False
        return True

    def to_dict(self) -> dict:
        key = lambda k: f"t={k[0]:g},i={k[1]}"  # noqa: E731
        return {
            "estimate": self.estimate.to_dict(),
            "t_list": list(self.t_list),
            "initial_norms": self.initial_norms,
            "terminal": {key(k): v for k, v in sorted(self.terminal.items())},
            "inside": {key(k): v for k, v in sorted(self.inside.items())},
            "entry_time": {key(k): v for k, v in sorted(self.entry_time.items())},
            "entry_elapsed": {key(k): v for k, v in sorted(self.entry_elapsed.items())},
            "T1": {str(k): v for k, v in sorted(self.T1.items())},
            "gronwall_ok": {key(k): v for k, v in sorted(self.gronwall_ok.items())},
            "temperedness": {str(k): v for k, v in sorted(self.temperedness.items())},
            "all_absorbed": self.all_absorbed,
            "entry_monotone": self.entry_monotone,
            "violations": self.violations,
        }


def absorbing_experiment(tau, omega: OUPath, model: ModelParams, initials, t_list,
                         stepper: StepperConfig, *, gronwall_tolerance=0.0, workers=None) -> AbsorbingReport:
    """Pull back every initial over every horizon and test membership in the R_V ball.

    Along each trajectory ||grad u(s)||^2 is compared with the radius of the
    fibre at s; the entry time is the first snapshot after which all later
    snapshots are inside. The integrated energy bound is monitored on the
    v-record of every trajectory.
    """
    est = absorbing_radius(tau, omega, model)
    ledger = build_ledger(model)
    fam = pullback_family(tau, t_list, omega, initials, model, stepper, workers=workers)
    ft, frad = fiber_radius_series(tau, omega, model)
    key_of = lambda x: np.round(np.asarray(x) / omega.dt).astype(np.int64)  # noqa: E731
    lookup = dict(zip(key_of(ft).tolist(), frad))
    terminal, inside, entry, elapsed, gr = {}, {}, {}, {}, {}
    violations = []
    for k, u in fam.states.items():
        t, i = k
        g2 = float(sobolev_norm(u, 1.0) ** 2)
        terminal[k] = g2
        inside[k] = g2 <= est.R_V
        rec = fam.records[k]
        if rec is None:
            entry[k] = 0.0 if inside[k] else None
            elapsed[k] = 0.0 if inside[k] else None
            gr[k] = True
            continue
        s = rec.times - t  # local times relative to tau
        try:
            rad = np.array([lookup[j] for j in key_of(s).tolist()])
        except KeyError:
            raise InsufficientHorizonError("fibre radius unavailable along the trajectory; extend the noise path") from None
        ok = rec["norm_grad_u"] ** 2 <= rad
        bad = np.flatnonzero(~ok)
        j = 0 if bad.size == 0 else bad[-1] + 1
        entry[k] = float(s[j]) if j < s.size else None
        elapsed[k] = float(rec.times[j]) if j < s.size else None
        gr[k] = gronwall_monitor(rec, ledger, gronwall_tolerance).passed
        if not inside[k]:
            violations.append({"t": t, "initial": i, "terminal": g2, "R_V": est.R_V})
        if not gr[k]:
            violations.append({"t": t, "initial": i, "gronwall": False})
    n = len(initials)
    t1, temp = {}, {}
    for i in range(n):
        ok = [inside[(t, i)] for t in fam.t_list]
        t1[i] = None
        for a in range(len(ok)):
            if all(ok[a:]):
                t1[i] = fam.t_list[a]
                break
        temp[i] = [float(np.exp(-est.kappa * t) * _v0_grad_sq(initials[i], model, omega, t)) for t in fam.t_list]
    return AbsorbingReport(
        estimate=est,
        t_list=fam.t_list,
        initial_norms=[float(sobolev_norm(u0, 1.0)) for u0 in initials],
        terminal=terminal,
        inside=inside,
        entry_time=entry,
        entry_elapsed=elapsed,
        T1=t1,
        gronwall_ok=gr,
        temperedness=temp,
        violations=violations,
    )


def _v0_grad_sq(u0, model, omega, t):
    z = omega.value_at(-t)
    return float(sobolev_norm(u0 - model.h * z, 1.0) ** 2)


# --------------------------------------------------------------------------- flattening


@dataclass
class FlatteningReport:
    thresholds: list
    lambda_next: list
    tail_u: list  # ||(I - P) u(tau)||_V per threshold (max over initials)
    tail_v: list
    tail_noise: list  # |z(omega)| ||(I - P) h||_V
    envelope: list  # C / (nu lambda_next - kappa)
    envelope_constant: float
    split_terms: list  # per threshold dict I1..I4 and the measured ||grad Q v(tau)||^2
    delta: float
    passed_thresholds: list
    smallest_passing: float | None
    flagged: list

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def flattening_analysis(tau, omega: OUPath, model: ModelParams, t, thresholds, delta,
                        stepper: StepperConfig, initials, *, workers=None) -> FlatteningReport:
    """Tail V-norms of the pulled-back state u(tau) above each threshold.

    The v-part is compared with delta/2 and the noise part |z(omega)| ||(I-P)h||_V
    with delta/2. For each threshold the split I1..I4 of the tail estimate is
    evaluated on the recorded trajectory, together with the envelope
    I2 <= C / (nu lambda_next - kappa).
    """
    ledger = build_ledger(model)
    kappa, nu = ledger.kappa, model.nu
    if not kappa > 0:
        raise TheoryRangeError(f"kappa = {kappa:g} <= 0")
    grid = model.grid
    fam = pullback_family(tau, (float(t),), omega, initials, model, stepper, workers=workers)
    z0 = omega.value_at(0.0)
    # bracket integrals over the pullback window [-t, 0]
    zs = omega.values_between(-t, 0.0)
    r = -t + omega.dt * np.arange(zs.size)
    f2 = _forcing_sq_series(model, tau, r)
    fint = trapezoid_discounted(f2, omega.dt, kappa)
    zint = trapezoid_discounted(zs * zs, omega.dt, kappa)
    start = max(1.0, max(np.exp(-kappa * t) * _v0_grad_sq(u0, model, omega, t) for u0 in initials))
    cval = ledger["flattening_prefactor"] * (start + fint + zint)

    keep, flagged = [], []
    for lam in thresholds:
        (keep if lam <= model.threshold else flagged).append(float(lam))
    keep.sort()
    lam_next, tail_u, tail_v, tail_n, env, split, passed = [], [], [], [], [], [], []
    for lam in keep:
        nxt = grid.next_eigenvalue(lam)
        nxt = np.inf if nxt is None else float(nxt)
        lam_next.append(nxt)
        tu = max(float(sobolev_norm(tail_part(u, lam), 1.0)) for u in fam.states.values())
        tv = max(float(sobolev_norm(tail_part(u - model.h * z0, lam), 1.0)) for u in fam.states.values())
        tn = abs(z0) * float(sobolev_norm(tail_part(model.h, lam), 1.0))
        tail_u.append(tu)
        tail_v.append(tv)
        tail_n.append(tn)
        env.append(cval / (nu * nxt - kappa) if np.isfinite(nxt) else 0.0)
        split.append(_tail_split(model, ledger, fam, omega, tau, t, lam, nxt, zs, r))
        if tv < delta / 2 and tn < delta / 2:
            passed.append(lam)
    return FlatteningReport(
        thresholds=keep,
        lambda_next=lam_next,
        tail_u=tail_u,
        tail_v=tail_v,
        tail_noise=tail_n,
        envelope=env,
        envelope_constant=cval,
        split_terms=split,
        delta=float(delta),
        passed_thresholds=passed,
        smallest_passing=passed[0] if passed else None,
        flagged=flagged,
    )


def _tail_split(model, ledger, fam, omega, tau, t, lam, nxt, zs, r):
    """I1..I4 for each initial (max reported) and the measured tail of v(tau)."""
    if not np.isfinite(nxt):
        return {"I1": 0.0, "I2": 0.0, "I3": 0.0, "I4": 0.0, "measured": 0.0, "holds": True}
    nu = model.nu
    rate = nu * nxt
    m = model.sup_norm
    worst = {"I1": 0.0, "I2": 0.0, "I3": 0.0, "I4": 0.0, "measured": 0.0}
    # I3 uses the tail of the forcing profile
    fq2 = 0.0
    if model._forcing_projected is not None:
        fq2 = float(sobolev_norm(tail_part(model._forcing_projected, lam, model.grid), 0.0, model.grid) ** 2)
    factors = np.array([model.forcing.factor(tau + x) ** 2 for x in r]) if model.forcing.kind == "exp_window" \
        else np.ones_like(r)
    i3 = ledger.beta_f * trapezoid_discounted(fq2 * factors, omega.dt, rate)
    i4 = ledger.beta_z * trapezoid_discounted(zs * zs, omega.dt, rate)
    holds = True
    for (tt, i), u in fam.states.items():
        rec = fam.records[(tt, i)]
        v0 = fam.initials[i] - model.h * omega.value_at(-t)
        i1 = np.exp(-rate * t) * float(sobolev_norm(tail_part(v0, lam), 1.0) ** 2)
        g = rec["norm_grad_v"] ** 2
        i2 = 2 * m * m / nu * discounted_integral(rec.times, g, rate)[-1]
        measured = float(sobolev_norm(tail_part(rec.final_state, lam), 1.0) ** 2)
        holds &= measured <= (i1 + i2 + i3 + i4) * (1 + 1e-9) + 1e-14
        for name, val in (("I1", i1), ("I2", i2), ("measured", measured)):
            worst[name] = max(worst[name], float(val))
    worst["I3"], worst["I4"] = float(i3), float(i4)
    worst["holds"] = bool(holds)
    return worst


# --------------------------------------------------------------------------- attractor


@dataclass
class CauchyReport:
    horizons: tuple
    horizon_gaps: dict  # (t_a, t_b) -> max over initials ||U(t_b) - U(t_a)||_V
    initial_gaps: dict  # t -> max over initial pairs ||U_a(t) - U_b(t)||_V
    floor: float | None
    horizon_monotone: bool
    initial_monotone: bool
    at_floor: bool | None

    def to_dict(self) -> dict:
        return {
            "horizons": list(self.horizons),
            "horizon_gaps": {f"{a:g}-{b:g}": v for (a, b), v in sorted(self.horizon_gaps.items())},
            "initial_gaps": {f"{t:g}": v for t, v in sorted(self.initial_gaps.items())},
            "floor": self.floor,
            "horizon_monotone": self.horizon_monotone,
            "initial_monotone": self.initial_monotone,
            "at_floor": self.at_floor,
        }


def attractor_cauchy_test(tau, omega: OUPath, model: ModelParams, initials, t_pairs,
                          stepper: StepperConfig, *, floor_control=True, floor_factor=10.0,
                          workers=None) -> CauchyReport:
    """Gaps between pulled-back terminal states across horizons and initial data.

    With ``floor_control`` the largest horizon is re-run at dt/2; the V-distance
    between the two terminal states is the integrator floor, and ``at_floor``
    asks whether the last horizon gap and the last initial-data gap are within
    ``floor_factor`` times that floor.
    """
    pairs = [(float(a), float(b)) for a, b in t_pairs]
    horizons = tuple(sorted({x for p in pairs for x in p}))
    fam = pullback_family(tau, horizons, omega, initials, model, stepper, workers=workers)
    n = len(initials)
    hg = {}
    for a, b in pairs:
        hg[(a, b)] = max(float(sobolev_norm(fam.states[(b, i)] - fam.states[(a, i)], 1.0)) for i in range(n))
    ig = {}
    for t in horizons:
        gaps = [float(sobolev_norm(fam.states[(t, i)] - fam.states[(t, j)], 1.0))
                for i in range(n) for j in range(i + 1, n)]
        ig[t] = max(gaps) if gaps else 0.0
    seq = [hg[p] for p in pairs]
    hmono = all(b <= a for a, b in zip(seq, seq[1:]))
    iseq = [ig[t] for t in horizons]
    imono = all(b <= a for a, b in zip(iseq, iseq[1:]))
    floor = at_floor = None
    if floor_control:
        T = horizons[-1]
        half = stepper.replace(dt=stepper.dt / 2)
        fine = pullback_family(tau, (T,), omega, initials, model, half, workers=workers)
        floor = max(float(sobolev_norm(fine.states[(T, i)] - fam.states[(T, i)], 1.0)) for i in range(n))
        at_floor = bool(seq[-1] <= floor_factor * floor and iseq[-1] <= floor_factor * floor)
    return CauchyReport(horizons, hg, ig, floor, hmono, imono, at_floor)


# --------------------------------------------------------------------------- calming probe


@dataclass
class ConsistencyReport:
    eps_a: float
    eps_b: float
    horizon: float
    end_time: float
    gap: float  # sup over snapshots of ||u_a - u_b||_V
    blew_up: bool
    residual_bound_ok: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def calming_consistency_probe(model_a: ModelParams, model_b: ModelParams, u0: SpectralField,
                              horizon: float, stepper: StepperConfig) -> ConsistencyReport:
    """Sup-in-time V-gap between two noise-free runs that differ only in calming.

    If either run blows up (possible for the identity variant) the comparison
    stops at the last step both completed. ``residual_bound_ok`` checks the
    pointwise residual bound of ``model_a``'s calming along its own trajectory.
    """
    from .calming import calm_field
    from .spectral import to_physical

    st = stepper.replace(t_span=(0.0, float(horizon)), snapshot_stride=1)
    end, blew = float(horizon), False
    recs = []
    for m in (model_a, model_b):
        try:
            recs.append(integrate(u0, st, m, keep_snapshots=True))
        except BlowUpError as e:
            blew = True
            end = min(end, e.t - stepper.dt)
    if blew:
        n_ok = max(0, int(np.floor(end / stepper.dt + 1e-9)))
        end = n_ok * stepper.dt
        st = st.replace(t_span=(0.0, end))
        recs = [integrate(u0, st, m, keep_snapshots=True) for m in (model_a, model_b)]
    ra, rb = recs
    gap = max(float(sobolev_norm(a - b, 1.0)) for a, b in zip(ra.snapshots, rb.snapshots))
    c, alpha, beta = model_a.calming.residual
    ok = True
    for s in ra.snapshots[:: max(1, len(ra.snapshots) // 20)]:
        up = to_physical(s)
        res = np.sqrt(np.sum((calm_field(model_a.calming, up) - up) ** 2, axis=0))
        mag = np.sqrt(np.sum(up**2, axis=0))
        ok &= bool(np.all(res <= c * model_a.calming.eps**alpha * mag**beta * (1 + 1e-12) + 1e-15))
    return ConsistencyReport(
        eps_a=float(model_a.calming.eps),
        eps_b=float(model_b.calming.eps),
        horizon=float(horizon),
        end_time=float(end),
        gap=gap,
        blew_up=blew,
        residual_bound_ok=ok,
    )
