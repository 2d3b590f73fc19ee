"""Calming functions: bounded, 1-Lipschitz surrogates for the identity map on R^3.

Four variants are provided, each parameterised by ``eps > 0``::

    Z1(x) = x / (1 + eps|x|)
    Z2(x) = x / (1 + eps^2 |x|^2)
    Z3(x) = arctan(eps x) / eps            (component-wise)
    Z4(x) = q(|x|) x / |x|

with the piecewise profile

    q(r) = r                                   r < 1/eps
         = -(eps/2)(r - 2/eps)^2 + 3/(2 eps)    1/eps <= r < 2/eps
         = 3/(2 eps)                            r >= 2/eps

The quadratic coefficient eps/2 is the only one giving a C^1 profile; a
coefficient of 2/eps would leave a jump at r = 1/eps. ``IDENTITY`` is the
un-calmed map, kept for comparisons.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Variant",
    "CalmingSpec",
    "calm_eval",
    "calm_field",
    "calm_sup_norm",
    "q_profile",
    "AxiomReport",
    "verify_calming_axioms",
]


class Variant(str, enum.Enum):
    Z1 = "z1"
    Z2 = "z2"
    Z3 = "z3"
    Z4 = "z4"
    IDENTITY = "identity"


# (C, alpha, beta) in |Z(x) - x| <= C eps^alpha |x|^beta
_RESIDUAL = {
    Variant.Z1: (1.0, 1.0, 2.0),
    Variant.Z2: (1.0, 2.0, 3.0),
    Variant.Z3: (1.0 / 3.0, 2.0, 3.0),
    Variant.Z4: (2.5, 1.0, 2.0),
    Variant.IDENTITY: (1.0, 1.0, 1.0),  # residual is identically zero
}


@dataclass(frozen=True)
class CalmingSpec:
    variant: Variant
    eps: float
    residual: tuple = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        if not (np.isfinite(self.eps) and self.eps > 0):
            raise ValueError(f"calming eps must be positive, got {self.eps}")
        object.__setattr__(self, "residual", _RESIDUAL[self.variant])

    @property
    def sup_norm(self) -> float:
        return calm_sup_norm(self, strict=False)

    @property
    def lipschitz_bound(self) -> float:
        return 1.0


def q_profile(r, eps):
    """Radial profile of Z4 (with the C^1 quadratic blend)."""
    r = np.asarray(r, dtype=float)
    mid = -(eps / 2.0) * (r - 2.0 / eps) ** 2 + 1.5 / eps
    return np.where(r < 1.0 / eps, r, np.where(r < 2.0 / eps, mid, 1.5 / eps))


def calm_eval(spec: CalmingSpec, x, axis=-1):
    """Apply the calming map to vectors stored along ``axis`` of ``x``."""
    x = np.asarray(x, dtype=float)
    eps = spec.eps
    v = spec.variant
    if v is Variant.IDENTITY:
        return x.copy()
    if v is Variant.Z3:
        return np.arctan(eps * x) / eps
    r = np.sqrt(np.sum(x * x, axis=axis, keepdims=True))
    if v is Variant.Z1:
        return x / (1.0 + eps * r)
    if v is Variant.Z2:
        return x / (1.0 + (eps * r) ** 2)
    # Z4: identity inside the ball r < 1/eps, which also covers x = 0
    scale = np.divide(q_profile(r, eps), r, out=np.ones_like(r), where=r > 0)
    return x * scale


def calm_field(spec: CalmingSpec, u_phys):
    """Pointwise calming of a physical-space field of shape (..., 3, n, n, n)."""
    return calm_eval(spec, u_phys, axis=-4)


def calm_sup_norm(spec: CalmingSpec, strict=True) -> float:
    """M_eps = sup_x |Z(x)| (Euclidean) in closed form.

    Z1: 1/eps (not attained), Z2: 1/(2 eps) at |x| = 1/eps,
    Z3: sqrt(3) pi / (2 eps) (not attained), Z4: 3/(2 eps).
    The identity is unbounded: ``strict`` raises, otherwise ``inf`` is returned.
    """
    eps = spec.eps
    v = spec.variant
    if v is Variant.IDENTITY:
        if strict:
            raise ValueError("the identity variant is unbounded")
        return float("inf")
    return {
        Variant.Z1: 1.0 / eps,
        Variant.Z2: 0.5 / eps,
        Variant.Z3: np.sqrt(3.0) * np.pi / (2.0 * eps),
        Variant.Z4: 1.5 / eps,
    }[v]


@dataclass
class AxiomReport:
    variant: str
    eps: float
    sample_count: int
    radius: float
    lipschitz_ok: bool
    bounded_ok: bool
    residual_ok: bool
    worst_ratios: dict
    violations: list

    @property
    def passed(self) -> bool:
        return self.lipschitz_ok and self.bounded_ok and self.residual_ok

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "eps": self.eps,
            "sample_count": self.sample_count,
            "radius": self.radius,
            "lipschitz_ok": self.lipschitz_ok,
            "bounded_ok": self.bounded_ok,
            "residual_ok": self.residual_ok,
            "passed": self.passed,
            "worst_ratios": self.worst_ratios,
            "violations": self.violations,
        }


def _ball_samples(rng, count, radius):
    d = rng.standard_normal((count, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    r = radius * rng.random(count) ** (1.0 / 3.0)
    return d * r[:, None]


def verify_calming_axioms(
    spec: CalmingSpec,
    sample_count: int = 100_000,
    radius: float = 10.0,
    seed: int = 0,
    lipschitz_tol: float = 1e-9,
    bound_tol: float = 1e-12,
) -> AxiomReport:
    """Sample-check the three calming axioms inside a ball.

    Half of the Lipschitz pairs are independent points of the ball, the other
    half are close pairs (offset ~1e-3 radius) that probe the local slope.
    """
    if sample_count < 10_000:
        raise ValueError("sample_count must be at least 1e4")
    rng = np.random.default_rng(seed)
    x = _ball_samples(rng, sample_count, radius)
    y = _ball_samples(rng, sample_count, radius)
    half = sample_count // 2
    y[:half] = x[:half] + 1e-3 * radius * rng.standard_normal((half, 3))

    zx, zy = calm_eval(spec, x), calm_eval(spec, y)
    dxy = np.linalg.norm(x - y, axis=1)
    lip = np.linalg.norm(zx - zy, axis=1) / np.where(dxy > 0, dxy, 1.0)
    i_lip = int(np.argmax(lip))

    m = calm_sup_norm(spec, strict=False)
    mag = np.linalg.norm(zx, axis=1)
    i_mag = int(np.argmax(mag))

    c, a, b = spec.residual
    res = np.linalg.norm(zx - x, axis=1)
    allowed = c * spec.eps**a * np.linalg.norm(x, axis=1) ** b
    res_ratio = np.divide(res, allowed, out=np.zeros_like(res), where=allowed > 0)
    i_res = int(np.argmax(res_ratio))

    lip_ok = bool(lip[i_lip] <= 1.0 + lipschitz_tol)
    bounded_ok = bool(np.isfinite(m) and mag[i_mag] <= m + bound_tol)
    res_ok = bool(np.all(res <= allowed * (1 + 1e-12) + 1e-15))

    violations = []
    if not lip_ok:
        violations.append(
            {"axiom": "lipschitz", "x": x[i_lip].tolist(), "y": y[i_lip].tolist(),
             "ratio": float(lip[i_lip])}
        )
    if not bounded_ok:
        violations.append(
            {"axiom": "bounded", "x": x[i_mag].tolist(), "value": float(mag[i_mag]),
             "sup_norm": m}
        )
    if not res_ok:
        violations.append(
            {"axiom": "residual", "x": x[i_res].tolist(), "ratio": float(res_ratio[i_res])}
        )
    worst = {
        "lipschitz": float(lip[i_lip]),
        "bounded": float(mag[i_mag] / m) if np.isfinite(m) else float("inf"),
        "residual": float(res_ratio[i_res]),
    }
    return AxiomReport(
        variant=spec.variant.value,
        eps=float(spec.eps),
        sample_count=int(sample_count),
        radius=float(radius),
        lipschitz_ok=lip_ok,
        bounded_ok=bounded_ok,
        residual_ok=res_ok,
        worst_ratios=worst,
        violations=violations,
    )
