"""Scalar Wiener paths, the Wiener shift, and the Ornstein-Uhlenbeck path z(theta_t omega).

Paths live on the uniform grid t_i = i * dt with integer ``i`` (negative for the
past). Increment ``i`` (from t_i to t_{i+1}) is drawn from a generator keyed on
``(seed, block(i))``, so any two paths with the same seed and ``dt`` agree on
every increment they share. Growing a pullback horizon leftward therefore never
re-randomises the part of omega already in use.

A shifted path keeps its absolute increment indices and only moves the point
labelled "time 0". The OU recursion is anchored at the first stored absolute
index, so the OU path of ``theta_s omega`` is literally the OU path of ``omega``
read ``s`` later.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid
from scipy.signal import lfilter

from .exceptions import InsufficientHorizonError

__all__ = [
    "WienerPath",
    "OUPath",
    "sample_wiener",
    "wiener_shift",
    "ou_path",
    "zero_ou_path",
    "ou_temperedness_check",
    "TemperednessReport",
    "discounted_running_integral",
    "trapezoid_discounted",
]

_BLOCK = 1024
_STREAM_INCREMENTS = 0
_STREAM_OU_INIT = 1
_ALIGN_TOL = 1e-9


def _generator(seed, stream, key):
    ss = np.random.SeedSequence(int(seed), spawn_key=(stream, int(key < 0), abs(int(key))))
    return np.random.Generator(np.random.PCG64(ss))


def _standard_increments(seed, i0, i1):
    """Standard normals for absolute increment indices i0 <= i < i1."""
    if i1 <= i0:
        return np.empty(0)
    b0, b1 = i0 // _BLOCK, (i1 - 1) // _BLOCK
    chunks = [_generator(seed, _STREAM_INCREMENTS, b).standard_normal(_BLOCK)
              for b in range(b0, b1 + 1)]
    flat = np.concatenate(chunks)
    off = i0 - b0 * _BLOCK
    return flat[off: off + (i1 - i0)]


def _grid_steps(t, dt):
    k = t / dt
    r = round(k)
    if abs(k - r) > _ALIGN_TOL * max(1.0, abs(k)):
        raise ValueError(f"time {t} is not a multiple of dt={dt}")
    return int(r)


@dataclass(frozen=True, eq=False)
class WienerPath:
    """Samples of omega on a uniform grid, normalised so omega(0) = 0.

    ``start`` is the absolute index of ``values[0]``; ``origin`` is the absolute
    index shown as local time 0.
    """

    seed: int
    dt: float
    start: int
    origin: int
    values: np.ndarray

    @property
    def times(self) -> np.ndarray:
        return (np.arange(self.values.size) + self.start - self.origin) * self.dt

    @property
    def t_min(self) -> float:
        return (self.start - self.origin) * self.dt

    @property
    def t_max(self) -> float:
        return (self.start + self.values.size - 1 - self.origin) * self.dt

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.values)

    def index(self, t) -> int:
        """Array index of grid time ``t`` (must be aligned and in range)."""
        j = _grid_steps(t, self.dt) + self.origin - self.start
        if not 0 <= j < self.values.size:
            raise InsufficientHorizonError(
                f"t={t} outside stored window [{self.t_min}, {self.t_max}]"
            )
        return j

    def value_at(self, t) -> float:
        return float(self.values[self.index(t)])


def sample_wiener(seed, t_min, t_max, dt) -> WienerPath:
    """Brownian path on the grid covering [t_min, t_max], with omega(0) = 0."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    if not t_min <= 0 <= t_max:
        raise ValueError("the grid must contain t = 0 (t_min <= 0 <= t_max)")
    i0 = int(np.floor(t_min / dt + _ALIGN_TOL))
    i1 = int(np.ceil(t_max / dt - _ALIGN_TOL))
    if i1 <= i0:
        raise ValueError("empty time grid")
    dw = _standard_increments(seed, i0, i1) * np.sqrt(dt)
    cum = np.concatenate([[0.0], np.cumsum(dw)])
    values = cum - cum[-i0]
    values[-i0] = 0.0
    return WienerPath(int(seed), float(dt), i0, 0, values)


def wiener_shift(path: WienerPath, s, window=None) -> WienerPath:
    """theta_s omega: t -> omega(s + t) - omega(s).

    ``s`` must be a multiple of ``dt`` inside the stored range. ``window=(a, b)``
    optionally crops the shifted path to local times [a, b].
    """
    k = _grid_steps(s, path.dt)
    new_origin = path.origin + k
    j = new_origin - path.start
    if not 0 <= j < path.values.size:
        raise InsufficientHorizonError(
            f"shift s={s} leaves the stored window [{path.t_min}, {path.t_max}]"
        )
    values = path.values - path.values[j]
    values[j] = 0.0
    start = path.start
    if window is not None:
        a, b = window
        ja = _grid_steps(a, path.dt) + new_origin - start
        jb = _grid_steps(b, path.dt) + new_origin - start
        if ja < 0 or jb >= values.size or ja > jb:
            raise InsufficientHorizonError(
                f"window {window} exceeds shifted range "
                f"[{(start - new_origin) * path.dt}, {(start + values.size - 1 - new_origin) * path.dt}]"
            )
        values = values[ja: jb + 1]
        start = start + ja
    return WienerPath(path.seed, path.dt, start, new_origin, values)


@dataclass(frozen=True, eq=False)
class OUPath:
    """z(theta_t omega) sampled on the grid of ``path``.

    Generated by ``z_{i+1} = e^{-gamma dt} (z_i + dW_i)``, a left-point
    discretisation of dz + gamma z dt = dW whose one-step variance is
    ``e^{-2 gamma dt} dt`` instead of ``(1 - e^{-2 gamma dt}) / (2 gamma)``;
    the stationary variance is therefore low by a relative O(gamma dt).
    """

    path: WienerPath
    gamma: float
    init_mode: str
    values: np.ndarray

    @property
    def dt(self) -> float:
        return self.path.dt

    @property
    def times(self) -> np.ndarray:
        return self.path.times

    @property
    def t_min(self) -> float:
        return self.path.t_min

    @property
    def t_max(self) -> float:
        return self.path.t_max

    @property
    def z0(self) -> float:
        return self.value_at(0.0)

    def index(self, t) -> int:
        return self.path.index(t)

    def value_at(self, t) -> float:
        """z at local time ``t``; linear interpolation between grid nodes."""
        k = t / self.dt
        r = round(k)
        if abs(k - r) <= _ALIGN_TOL * max(1.0, abs(k)):
            return float(self.values[self.path.index(r * self.dt)])
        j = int(np.floor(k)) + self.path.origin - self.path.start
        if not 0 <= j < self.values.size - 1:
            raise InsufficientHorizonError(
                f"t={t} outside stored window [{self.t_min}, {self.t_max}]"
            )
        w = k - np.floor(k)
        return float((1 - w) * self.values[j] + w * self.values[j + 1])

    def values_between(self, a, b) -> np.ndarray:
        """Grid samples for local times a..b inclusive."""
        return self.values[self.index(a): self.index(b) + 1]

    def shift(self, s) -> "OUPath":
        """OU path of theta_s omega (same samples, relabelled times)."""
        return OUPath(wiener_shift(self.path, s), self.gamma, self.init_mode, self.values)

    @property
    def truncation_factor(self) -> float:
        """e^{-gamma (0 - t_min)}: weight left on the finite-horizon start at t = 0."""
        return float(np.exp(-self.gamma * max(0.0, -self.t_min)))


def ou_path(path: WienerPath, gamma, init_mode="stationary_sample") -> OUPath:
    """OU path driven by the increments of ``path``.

    ``init_mode='stationary_sample'`` draws z at the first stored node from
    N(0, 1/(2 gamma)) with a generator keyed on (seed, first absolute index);
    ``'zero'`` starts at 0.
    """
    if not gamma > 0:
        raise ValueError("OU rate gamma must be positive")
    if init_mode not in ("stationary_sample", "zero"):
        raise ValueError(f"unknown init_mode {init_mode!r}")
    if init_mode == "stationary_sample":
        z_init = _generator(path.seed, _STREAM_OU_INIT, path.start).standard_normal()
        z_init /= np.sqrt(2.0 * gamma)
    else:
        z_init = 0.0
    a = np.exp(-gamma * path.dt)
    dw = path.increments
    z = np.empty(path.values.size)
    z[0] = 0.0
    z[1:] = lfilter([a], [1.0, -a], dw)
    if z_init:
        z += z_init * a ** np.arange(z.size)
    return OUPath(path, float(gamma), init_mode, z)


def zero_ou_path(t_min, t_max, dt, gamma=1.0) -> OUPath:
    """Identically-zero z on a grid; the noise-free baseline."""
    i0 = int(np.floor(t_min / dt + _ALIGN_TOL))
    i1 = int(np.ceil(t_max / dt - _ALIGN_TOL))
    w = WienerPath(0, float(dt), i0, 0, np.zeros(i1 - i0 + 1))
    return OUPath(w, float(gamma), "zero", np.zeros(i1 - i0 + 1))


def trapezoid_discounted(y, dt, rate, stride=1) -> float:
    """Trapezoid estimate of int_{-T}^{0} e^{rate r} y(r) dr.

    ``y`` holds samples on [-T, 0] ending at r = 0; ``stride`` > 1 uses every
    stride-th sample counting back from r = 0.
    """
    y = np.asarray(y, dtype=float)[::-1][::stride][::-1]
    h = dt * stride
    r = -h * np.arange(y.size)[::-1]
    return float(trapezoid(np.exp(rate * r) * y, dx=h))


def discounted_running_integral(y, dt, rate) -> np.ndarray:
    """J_i = int_{t_0}^{t_i} e^{-rate (t_i - r)} y(r) dr by the trapezoid rule."""
    y = np.asarray(y, dtype=float)
    a = np.exp(-rate * dt)
    # J_i = a J_{i-1} + dt/2 (a y_{i-1} + y_i)
    src = 0.5 * dt * (a * y[:-1] + y[1:])
    out = np.empty_like(y)
    out[0] = 0.0
    out[1:] = lfilter([1.0], [1.0, -a], src)
    return out


@dataclass
class TemperednessReport:
    horizon: float
    max_ratio: float
    integral_estimates: dict
    half_resolution_estimates: dict
    truncation_factor: float

    def to_dict(self):
        return {
            "horizon": self.horizon,
            "max_ratio": self.max_ratio,
            "integral_estimates": {str(k): v for k, v in self.integral_estimates.items()},
            "half_resolution_estimates": {
                str(k): v for k, v in self.half_resolution_estimates.items()
            },
            "truncation_factor": self.truncation_factor,
        }


def ou_temperedness_check(ou: OUPath, kappas=(0.5,), horizon=None) -> TemperednessReport:
    """Finite-horizon evidence for sublinear growth of z and finiteness of
    int_{-T}^0 e^{kappa r} |z(theta_r omega)|^2 dr."""
    T = -ou.t_min if horizon is None else float(horizon)
    if T < 10.0 / ou.gamma or T > -ou.t_min + 1e-12:
        raise InsufficientHorizonError(
            f"need a stored past of at least 10/gamma = {10.0 / ou.gamma:g}, have {-ou.t_min:g}"
        )
    zs = ou.values_between(-T, 0.0)
    t = ou.times
    max_ratio = float(np.max(np.abs(ou.values) / (1.0 + np.abs(t))))
    full, half = {}, {}
    for kappa in kappas:
        if not kappa > 0:
            raise ValueError("kappa must be positive")
        full[float(kappa)] = trapezoid_discounted(zs**2, ou.dt, kappa)
        half[float(kappa)] = trapezoid_discounted(zs**2, ou.dt, kappa, stride=2)
    return TemperednessReport(float(T), max_ratio, full, half, ou.truncation_factor)
