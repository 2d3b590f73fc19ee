"""Calmed rotational Navier-Stokes right-hand sides on the periodic box.

In velocity form the drift is

    du/dt = -nu A u - P[(curl u) x Z(u)] + P f         (+ h dW/dt)

and with u = v + h z(theta_t omega) the pathwise random equation for v is

    dv/dt = -nu A (v + h z) - B(Z(v + h z), v + h z) + P f + gamma h z

with B(a, b) = P[(curl b) x a]. Every nonlinear product is formed on the
physical grid, dealiased, Leray-projected and truncated to the active Galerkin
modes ``|k|^2 <= threshold``; pressure never enters the time stepping.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid

from .calming import CalmingSpec, Variant, calm_field, calm_sup_norm
from .exceptions import GridMismatchError
from .spectral import (
    SpectralField,
    WaveGrid,
    curl,
    inner,
    leray_project,
    sobolev_norm,
    to_physical,
    to_spectral,
)

__all__ = [
    "preset_field",
    "PRESETS",
    "ForcingSpec",
    "ModelParams",
    "rotational_bilinear",
    "trilinear",
    "advection",
    "rhs_v",
    "nonlinear_part",
    "rhs_u",
    "recover_pressure",
    "pressure_residual",
    "AssumptionReport",
    "validate_assumptions",
]

PRESETS = ("taylor_green", "abc", "kolmogorov", "zero")


def preset_field(grid: WaveGrid, name: str) -> SpectralField:
    """Named low-mode divergence-free fields (not normalised).

    ``taylor_green``: (sin x cos y cos z, -cos x sin y cos z, 0), |k|^2 = 3.
    ``abc``: Arnold-Beltrami-Childress flow with A = B = C = 1, |k|^2 = 1.
    ``kolmogorov``: (sin y, 0, 0), |k|^2 = 1.
    """
    x, y, z = grid.physical_coordinates()
    zero = np.zeros_like(x)
    if name == "taylor_green":
        u = [np.sin(x) * np.cos(y) * np.cos(z), -np.cos(x) * np.sin(y) * np.cos(z), zero]
    elif name == "abc":
        u = [np.sin(z) + np.cos(y), np.sin(x) + np.cos(z), np.sin(y) + np.cos(x)]
    elif name == "kolmogorov":
        u = [np.sin(y), zero, zero]
    elif name == "zero":
        u = [zero, zero, zero]
    else:
        raise ValueError(f"unknown preset {name!r}; valid: {', '.join(PRESETS)}")
    c = leray_project(to_spectral(np.stack(u), grid)).coeffs
    # sampling the trigonometric polynomial leaves ~1e-17 FFT dust on other modes
    c = np.where(np.abs(c) > 1e-12 * max(1.0, np.abs(c).max()), c, 0.0)
    return SpectralField(grid, c)


@dataclass(frozen=True, eq=False)
class ForcingSpec:
    """Body force f(t) = factor(t) * profile.

    ``zero``: f = 0; ``constant``: f = profile; ``exp_window``: f = e^{sigma t} profile.
    The profile may carry a gradient part; only its Leray projection drives the flow.
    """

    kind: str = "zero"
    profile: SpectralField | None = None
    sigma: float = 0.0

    def __post_init__(self):
        if self.kind not in ("zero", "constant", "exp_window"):
            raise ValueError(f"unknown forcing kind {self.kind!r}")
        if self.kind != "zero" and self.profile is None:
            raise ValueError(f"forcing kind {self.kind!r} needs a profile")

    def factor(self, t) -> float:
        if self.kind == "zero":
            return 0.0
        if self.kind == "constant":
            return 1.0
        return float(np.exp(self.sigma * t))

    def at(self, t) -> np.ndarray | float:
        """Raw coefficients of f(t), or 0.0 when there is no forcing."""
        a = self.factor(t)
        if a == 0.0:
            return 0.0
        return a * self.profile.coeffs


@dataclass(frozen=True, eq=False)
class ModelParams:
    """Parameters of the calmed system; immutable once built.

    ``threshold`` is the Galerkin eigenvalue cutoff (default: the largest whole
    shell inside the dealiased cube). ``alpha`` defaults to nu*lambda_1/2.
    ``nonlinear=False`` switches the advection term off (linear test hook).
    """

    grid: WaveGrid
    nu: float = 1.0
    calming: CalmingSpec = field(default_factory=lambda: CalmingSpec(Variant.Z1, 2.0))
    gamma: float = 1.0
    h: SpectralField | None = None
    forcing: ForcingSpec = field(default_factory=ForcingSpec)
    threshold: float | None = None
    alpha: float | None = None
    nonlinear: bool = True

    def __post_init__(self):
        g = self.grid
        if not self.nu > 0:
            raise ValueError("viscosity nu must be positive")
        if not self.gamma > 0:
            raise ValueError("OU rate gamma must be positive")
        thr = g.max_threshold if self.threshold is None else float(self.threshold)
        if thr < 0:
            raise ValueError("threshold must be non-negative")
        object.__setattr__(self, "threshold", thr)
        mask = g.active_mask(thr)
        if not np.array_equal(mask, g.valid & (g.k2 <= thr)):
            raise ValueError(
                f"threshold {thr} reaches modes removed by dealiasing (max {g.max_threshold})"
            )
        object.__setattr__(self, "mask", mask)
        h = SpectralField.zeros(g) if self.h is None else self.h
        if h.grid != g:
            raise GridMismatchError("noise profile h is on a different grid")
        scale = max(1.0, float(np.abs(h.coeffs).max()))
        if h.divergence_defect() > 1e-12 * scale:
            raise ValueError("noise profile h must be divergence-free")
        if np.abs(np.where(mask, 0.0, h.coeffs)).max() > 1e-12 * scale:
            raise ValueError("noise profile h must be supported on the active Galerkin modes")
        object.__setattr__(self, "h", SpectralField(g, np.where(mask, h.coeffs, 0.0)))
        if self.forcing.profile is not None and self.forcing.profile.grid != g:
            raise GridMismatchError("forcing profile is on a different grid")
        lam1 = g.lambda1
        alpha = self.nu * lam1 / 2 if self.alpha is None else float(self.alpha)
        object.__setattr__(self, "alpha", alpha)
        pf = (
            None
            if self.forcing.profile is None
            else np.where(mask, leray_project(self.forcing.profile).coeffs, 0.0)
        )
        object.__setattr__(self, "_forcing_projected", pf)

    @property
    def lambda1(self) -> float:
        return self.grid.lambda1

    @property
    def sup_norm(self) -> float:
        """M_eps; zero when the nonlinearity is switched off."""
        if not self.nonlinear:
            return 0.0
        return calm_sup_norm(self.calming, strict=False)

    @property
    def kappa(self) -> float:
        """Decay rate nu*lambda_1 - 2 M_eps^2 / nu (may be <= 0 or -inf)."""
        m = self.sup_norm
        return self.nu * self.lambda1 - 2.0 * m * m / self.nu

    def forcing_projected(self, t):
        """P_threshold P_sigma f(t) coefficients, or 0.0."""
        a = self.forcing.factor(t)
        if a == 0.0 or self._forcing_projected is None:
            return 0.0
        return a * self._forcing_projected

    def forcing_norm_sq(self, t) -> float:
        a = self.forcing.factor(t)
        if a == 0.0 or self._forcing_projected is None:
            return 0.0
        return a * a * float(sobolev_norm(self._forcing_projected, 0.0, self.grid) ** 2)

    def replace(self, **changes) -> "ModelParams":
        kw = {
            name: getattr(self, name)
            for name in ("grid", "nu", "calming", "gamma", "h", "forcing", "threshold",
                         "alpha", "nonlinear")
        }
        kw.update(changes)
        return ModelParams(**kw)


def _cross(a, b):
    """Pointwise cross product of vector fields stored along axis -4."""
    a0, a1, a2 = (a[..., i, :, :, :] for i in range(3))
    b0, b1, b2 = (b[..., i, :, :, :] for i in range(3))
    return np.stack([a1 * b2 - a2 * b1, a2 * b0 - a0 * b2, a0 * b1 - a1 * b0], axis=-4)


def _coeffs(samples, grid):
    """Spectral coefficients of (possibly batched) physical samples."""
    c = to_spectral(samples, grid)
    return c.coeffs if isinstance(c, SpectralField) else c


def _project_dealias(grid, coeffs, mask=None):
    c = leray_project(np.where(grid.dealias_mask, coeffs, 0.0), grid)
    if mask is not None:
        c = np.where(mask, c, 0.0)
    return c


def rotational_bilinear(u: SpectralField, v: SpectralField) -> SpectralField:
    """B(u, v) = P[(curl v) x u], product formed on the grid then dealiased."""
    if u.grid != v.grid:
        raise GridMismatchError(f"{u.grid} vs {v.grid}")
    g = u.grid
    phys = to_physical(np.concatenate([curl(v.coeffs, g), u.coeffs], axis=-4), g)
    prod = _coeffs(_cross(phys[..., :3, :, :, :], phys[..., 3:, :, :, :]), g)
    return SpectralField(g, _project_dealias(g, prod))


def trilinear(u: SpectralField, v: SpectralField, w: SpectralField) -> float:
    """b(u, v, w) = <B(u, v), w>."""
    if w.grid != u.grid:
        raise GridMismatchError(f"{u.grid} vs {w.grid}")
    return float(inner(rotational_bilinear(u, v), w))


def _advection_coeffs(model: ModelParams, u_coeffs):
    g = model.grid
    phys = to_physical(np.concatenate([curl(u_coeffs, g), u_coeffs], axis=-4), g)
    prod = _cross(phys[..., :3, :, :, :], calm_field(model.calming, phys[..., 3:, :, :, :]))
    return _project_dealias(g, _coeffs(prod, g), model.mask)


def advection(model: ModelParams, u: SpectralField) -> SpectralField:
    """P_threshold B(Z(u), u); zero when the nonlinearity is switched off."""
    if not model.nonlinear:
        return SpectralField.zeros(model.grid)
    return SpectralField(model.grid, _advection_coeffs(model, u.coeffs))


def nonlinear_part(model: ModelParams, v: SpectralField, t, z) -> SpectralField:
    """Everything in dv/dt except the stiff -nu A v term."""
    g = model.grid
    zh = z * model.h.coeffs
    out = (model.gamma - model.nu * g.k2) * zh + model.forcing_projected(t)
    if model.nonlinear:
        out = out - _advection_coeffs(model, v.coeffs + zh)
    return SpectralField(g, np.where(model.mask, out, 0.0))


def rhs_v(model: ModelParams, v: SpectralField, t, z) -> SpectralField:
    """Full right-hand side of the transformed (v-form) Galerkin system."""
    if v.grid != model.grid:
        raise GridMismatchError(f"{v.grid} vs {model.grid}")
    n = nonlinear_part(model, v, t, z)
    return SpectralField(model.grid, n.coeffs - model.nu * model.grid.k2 * v.coeffs)


_LEVI_CIVITA = np.zeros((3, 3, 3))
for _i, _j, _k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
    _LEVI_CIVITA[_i, _j, _k] = 1.0
    _LEVI_CIVITA[_i, _k, _j] = -1.0


def rhs_u(model: ModelParams, u: SpectralField, t) -> SpectralField:
    """Drift of the velocity-form equation (no dW/dt term).

    Written without the helpers used by :func:`rhs_v` (Levi-Civita contractions,
    explicit projector matrix) so the two can cross-check each other.
    """
    g = model.grid
    c = u.coeffs
    k = g.k
    # (curl u)_i = eps_ijk d_j u_k  ->  i eps_ijk k_j u_k
    curl_hat = 1j * np.einsum("ijk,j...,k...->i...", _LEVI_CIVITA, k, c)
    n = g.n
    curl_phys = np.fft.irfftn(curl_hat, s=(n, n, n), axes=(1, 2, 3)) * n**3
    u_phys = np.fft.irfftn(c, s=(n, n, n), axes=(1, 2, 3)) * n**3
    zeta = calm_field(model.calming, u_phys) if model.nonlinear else 0.0 * u_phys
    rot = np.einsum("ijk,j...,k...->i...", _LEVI_CIVITA, curl_phys, zeta)
    rot_hat = np.fft.rfftn(rot, axes=(1, 2, 3)) / n**3
    rot_hat = rot_hat * g.dealias_mask
    # P = I - k k^T / |k|^2
    proj = np.eye(3)[:, :, None, None, None] - np.einsum("i...,j...->ij...", k, k) / g._k2_safe
    rot_hat = np.einsum("ij...,j...->i...", proj, rot_hat)
    f = model.forcing_projected(t)
    drift = -model.nu * g.k2 * c - rot_hat + f
    return SpectralField(g, np.where(model.mask, drift, 0.0))


def recover_pressure(model: ModelParams, u: SpectralField, t) -> np.ndarray:
    """Dynamic pressure pi with grad pi = (I - P)(-(curl u) x Z(u) + f).

    Returned as scalar Fourier coefficients (shape (n, n, n//2 + 1)), zero mean:
    ``pi_hat = -i k . N_hat / |k|^2``.
    """
    g = model.grid
    nhat = _nonprojected_force(model, u, t)
    pi_hat = -1j * np.sum(g.k * nhat, axis=0) / g._k2_safe
    return np.where(g.valid, pi_hat, 0.0)


def _nonprojected_force(model, u, t):
    g = model.grid
    out = np.zeros(g.shape, dtype=complex)
    if model.nonlinear:
        phys = to_physical(np.concatenate([curl(u.coeffs, g), u.coeffs]), g)
        prod = _cross(phys[:3], calm_field(model.calming, phys[3:]))
        out -= np.where(g.dealias_mask, to_spectral(prod, g).coeffs, 0.0)
    f = model.forcing.at(t)
    return out + f


def pressure_residual(model: ModelParams, u: SpectralField, t) -> float:
    """||grad pi - (I - P) N|| for the recovered pressure (should be round-off)."""
    g = model.grid
    nhat = np.where(g.valid, _nonprojected_force(model, u, t), 0.0)
    gradient_part = nhat - leray_project(nhat, g)
    grad_pi = 1j * g.k * recover_pressure(model, u, t)
    return float(sobolev_norm(grad_pi - gradient_part, 0.0, g))


@dataclass
class AssumptionReport:
    a1: bool
    a2: bool
    a3: bool
    kappa: float
    a3_margin: float
    alpha: float
    details: dict

    @property
    def all_hold(self) -> bool:
        return self.a1 and self.a2 and self.a3

    @property
    def warning(self) -> str | None:
        if self.all_hold:
            return None
        failed = [n for n in ("a1", "a2", "a3") if not getattr(self, n)]
        return f"assumption(s) {', '.join(failed)} violated: absorbing/attractor bounds void"

    def to_dict(self):
        return {
            "a1": self.a1,
            "a2": self.a2,
            "a3": self.a3,
            "kappa": self.kappa,
            "a3_margin": self.a3_margin,
            "alpha": self.alpha,
            "all_hold": self.all_hold,
            "warning": self.warning,
            "details": self.details,
        }


def validate_assumptions(model: ModelParams, ou=None, tau=0.0, horizon=40.0) -> AssumptionReport:
    """Check the forcing-integrability, forcing-temperedness and calming-size
    conditions for this model.

    * a3: M_eps < nu sqrt(lambda_1 / 2), equivalently kappa > 0.
    * a1: int_{-inf}^{tau} e^{alpha s} ||f(s)||^2 ds < inf, decided in closed
      form per forcing kind, with a trapezoid estimate over [tau - horizon, tau].
    * a2: e^{c t} int_{-inf}^0 e^{alpha s} ||f(s + t)||^2 ds -> 0 as t -> -inf
      for every c > 0, again in closed form per kind.

    Only the three forcing presets are supported; a generic f would need a
    limit no finite computation decides.
    """
    lam1 = model.lambda1
    alpha = model.alpha
    if not 0 < alpha < model.nu * lam1:
        raise ValueError(f"alpha={alpha} must lie in (0, nu*lambda_1={model.nu * lam1})")
    m = model.sup_norm
    limit = model.nu * np.sqrt(lam1 / 2.0)
    a3 = bool(m < limit)
    kappa = model.kappa
    fk = model.forcing.kind
    g2 = model.forcing_norm_sq(0.0) / max(model.forcing.factor(0.0) ** 2, 1e-300)
    sigma = model.forcing.sigma

    if fk == "zero" or g2 == 0.0:
        a1, a2, closed_a1 = True, True, 0.0
        a2_note = "f = 0"
    elif fk == "constant":
        a1, a2 = True, True
        closed_a1 = g2 * np.exp(alpha * tau) / alpha
        a2_note = "e^{ct} ||g||^2 / alpha -> 0"
    else:
        rate = alpha + 2.0 * sigma
        a1 = bool(rate > 0)
        closed_a1 = g2 * np.exp(rate * tau) / rate if a1 else float("inf")
        # e^{(c + 2 sigma) t} ||g||^2 / (alpha + 2 sigma) must vanish for every c > 0
        a2 = bool(a1 and sigma >= 0)
        a2_note = "needs alpha + 2 sigma > 0 and sigma >= 0"

    s = np.linspace(tau - horizon, tau, 4001)
    fn = np.array([model.forcing_norm_sq(si) for si in s])
    numeric_a1 = float(trapezoid(np.exp(alpha * s) * fn, s))
    details = {
        "sup_norm": m,
        "a3_limit": float(limit),
        "forcing_kind": fk,
        "a1_closed_form": float(closed_a1),
        "a1_finite_horizon": numeric_a1,
        "a1_horizon": float(horizon),
        "a2_note": a2_note,
    }
    if ou is not None and kappa > 0:
        from .noise import ou_temperedness_check

        try:
            details["ou_temperedness"] = ou_temperedness_check(ou, (kappa, alpha)).to_dict()
        except Exception as exc:  # horizon too short is reported, not fatal
            details["ou_temperedness"] = {"error": str(exc)}
    return AssumptionReport(a1, a2, a3, float(kappa), float(limit - m), float(alpha), details)
