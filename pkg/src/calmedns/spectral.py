"""Fourier representation of solenoidal vector fields on the periodic box [0, 2*pi)^3.

Coefficients use the real-input transform layout: an array of shape
``(3, n, n, n//2 + 1)`` holding u_hat(k) for k_x, k_y in ``fftfreq`` order and
k_z >= 0. Modes with k_z < 0 are implied by conjugate symmetry,
``u_hat(-k) = conj(u_hat(k))``; inside the k_z = 0 plane both partners are stored
and must agree.

Normalisation: ``u(x) = sum_k u_hat(k) exp(i k.x)`` over the full lattice, and all
norms are taken with respect to the normalised measure ``dx / (2 pi)^3``, so that
``||u||^2 = sum_k |u_hat(k)|^2`` (Parseval) and the eigenvalues of the Stokes
operator are exactly ``|k|^2`` with smallest value 1.

The mean mode and the Nyquist planes (any ``|k_i| = n/2``) are pinned to zero by
every projection: the sign of a Nyquist wavevector is ambiguous on the grid, so
``k . u_hat = 0`` cannot be enforced there.

Most operators accept either a :class:`SpectralField` or a raw coefficient array
whose last four axes are ``(component, k_x, k_y, k_z)``; extra leading axes are
broadcast, which lets tests push whole batches of fields through at once.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

import numpy as np
import scipy.fft as sfft

from .exceptions import GridMismatchError

__all__ = [
    "WaveGrid",
    "SpectralField",
    "TailBoundReport",
    "leray_project",
    "apply_stokes",
    "galerkin_truncate",
    "tail_part",
    "tail_sobolev_bound_check",
    "sobolev_norm",
    "inner",
    "to_physical",
    "to_spectral",
    "dealias",
    "curl",
    "divergence",
    "fourier_mode",
    "random_field",
    "physical_norm",
    "symmetry_defect",
]


class WaveGrid:
    """Wavevector lattice for an ``n``-point-per-axis grid on [0, 2*pi)^3."""

    def __init__(self, n: int, dealias_fraction=Fraction(2, 3)):
        n = int(n)
        if n < 4 or n % 2:
            raise ValueError(f"n_per_axis must be an even integer >= 4, got {n}")
        frac = Fraction(dealias_fraction).limit_denominator(1000)
        if not 0 < frac <= 1:
            raise ValueError(f"dealias_fraction must lie in (0, 1], got {frac}")
        self.n = n
        self.dealias_fraction = frac

        k = sfft.fftfreq(n, 1.0 / n).round().astype(np.int64)
        kz = np.arange(n // 2 + 1, dtype=np.int64)
        kx, ky, kz = np.meshgrid(k, k, kz, indexing="ij")
        self.kint = np.stack([kx, ky, kz])
        self.k = self.kint.astype(float)
        self.k2 = np.sum(self.kint**2, axis=0).astype(float)

        self.nyquist = np.any(np.abs(self.kint) == n // 2, axis=0)
        self.mean = self.k2 == 0
        self.valid = ~(self.nyquist | self.mean)
        # 1 for the self-conjugate k_z = 0 plane, 2 where a hidden partner exists
        self.weights = np.where(kz == 0, 1.0, 2.0)
        self.weights[..., -1] = 1.0  # Nyquist plane, zeroed anyway

        self.dealias_kmax = int(np.floor(frac * n / 2))
        self.dealias_mask = np.all(np.abs(self.kint) <= self.dealias_kmax, axis=0)
        self._k2_safe = np.where(self.mean, 1.0, self.k2)
        # k / |k|^2 on valid modes, zero elsewhere: the projector's rank-one part
        self._k_over_k2 = np.where(self.valid, self.k / self._k2_safe, 0.0)

    @property
    def shape(self):
        return (3, self.n, self.n, self.n // 2 + 1)

    @property
    def physical_shape(self):
        return (3, self.n, self.n, self.n)

    @property
    def lambda1(self) -> float:
        return float(self.k2[self.valid].min())

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        """Distinct |k|^2 values of valid modes, ascending."""
        return np.unique(self.k2[self.valid].astype(np.int64)).astype(float)

    @cached_property
    def max_threshold(self) -> float:
        """Largest eigenvalue whose whole ball {|k|^2 <= L} survives dealiasing.

        Truncating by this threshold keeps eigenvalue shells whole while staying
        inside the dealiased cube.
        """
        limit = (self.dealias_kmax + 1) ** 2 - 1
        ev = self.eigenvalues
        return float(ev[ev <= limit].max())

    def next_eigenvalue(self, cutoff: float):
        """Smallest eigenvalue strictly above ``cutoff``, or None."""
        ev = self.eigenvalues
        above = ev[ev > cutoff]
        return float(above[0]) if above.size else None

    def active_mask(self, cutoff=None) -> np.ndarray:
        """Valid, dealiased modes with |k|^2 <= cutoff (default: max_threshold)."""
        if cutoff is None:
            cutoff = self.max_threshold
        return self.valid & self.dealias_mask & (self.k2 <= cutoff)

    @cached_property
    def conjugate_index(self):
        """Index maps (ix, iy) -> partner of -k inside a self-conjugate k_z plane."""
        idx = np.arange(self.n)
        return (-idx) % self.n, (-idx) % self.n

    def physical_coordinates(self):
        x = 2 * np.pi * np.arange(self.n) / self.n
        return np.meshgrid(x, x, x, indexing="ij")

    def __eq__(self, other):
        return (
            isinstance(other, WaveGrid)
            and self.n == other.n
            and self.dealias_fraction == other.dealias_fraction
        )

    def __hash__(self):
        return hash((self.n, self.dealias_fraction))

    def __repr__(self):
        return f"WaveGrid(n={self.n}, dealias_fraction={self.dealias_fraction})"


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Vector field stored by its Fourier coefficients on ``grid``."""

    grid: WaveGrid
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.shape[-4:] != self.grid.shape:
            raise GridMismatchError(
                f"coefficient shape {c.shape} does not match grid {self.grid.shape}"
            )
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zeros(cls, grid: WaveGrid) -> "SpectralField":
        return cls(grid, np.zeros(grid.shape, dtype=complex))

    def _check(self, other):
        if isinstance(other, SpectralField):
            if other.grid != self.grid:
                raise GridMismatchError(f"{self.grid} vs {other.grid}")
            return other.coeffs
        return other

    def __add__(self, other):
        return SpectralField(self.grid, self.coeffs + self._check(other))

    def __sub__(self, other):
        return SpectralField(self.grid, self.coeffs - self._check(other))

    def __neg__(self):
        return SpectralField(self.grid, -self.coeffs)

    def __mul__(self, scalar):
        return SpectralField(self.grid, self.coeffs * scalar)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return SpectralField(self.grid, self.coeffs / scalar)

    def norm(self, s=0.0) -> float:
        return sobolev_norm(self, s)

    def copy(self) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs.copy())

    def to_physical(self) -> np.ndarray:
        return to_physical(self)

    def divergence_defect(self) -> float:
        """max_k |k . u_hat(k)|."""
        return float(np.abs(divergence(self)).max())


def _unwrap(u, grid=None):
    if isinstance(u, SpectralField):
        return u.coeffs, u.grid
    if grid is None:
        raise TypeError("raw coefficient arrays need an explicit grid")
    return np.asarray(u), grid


def _rewrap(template, coeffs, grid):
    if isinstance(template, SpectralField):
        return SpectralField(grid, coeffs)
    return coeffs


def leray_project(raw, grid=None):
    """Orthogonal projection onto divergence-free fields, mode by mode.

    ``u_hat -> u_hat - k (k . u_hat) / |k|^2``; the mean mode and Nyquist planes
    are zeroed. Idempotent and self-adjoint.
    """
    c, grid = _unwrap(raw, grid)
    k = grid.k
    kdotu = k[0] * c[..., 0, :, :, :] + k[1] * c[..., 1, :, :, :] + k[2] * c[..., 2, :, :, :]
    out = np.where(grid.valid, c, 0.0)
    out -= grid._k_over_k2 * kdotu[..., None, :, :, :]
    return _rewrap(raw, out, grid)


def divergence(u, grid=None) -> np.ndarray:
    """k . u_hat for every mode (the Fourier symbol of div, without the factor i)."""
    c, grid = _unwrap(u, grid)
    return np.sum(grid.k * c, axis=-4)


def apply_stokes(u, grid=None):
    """Stokes operator: multiplication by |k|^2 (exact on solenoidal periodic fields)."""
    c, grid = _unwrap(u, grid)
    return _rewrap(u, c * grid.k2, grid)


def galerkin_truncate(u, cutoff, grid=None):
    """Zero every mode with |k|^2 > cutoff (inclusive threshold, whole shells)."""
    if cutoff < 0:
        raise ValueError("cutoff must be non-negative")
    c, grid = _unwrap(u, grid)
    return _rewrap(u, np.where(grid.k2 <= cutoff, c, 0.0), grid)


def tail_part(u, cutoff, grid=None):
    """Complement of :func:`galerkin_truncate`: the modes with |k|^2 > cutoff."""
    c, grid = _unwrap(u, grid)
    return _rewrap(u, np.where(grid.k2 > cutoff, c, 0.0), grid)


def dealias(u, grid=None):
    """Zero modes with any |k_i| > dealias_fraction * n/2."""
    c, grid = _unwrap(u, grid)
    return _rewrap(u, np.where(grid.dealias_mask, c, 0.0), grid)


def curl(u, grid=None):
    """Spectral curl, i k x u_hat."""
    c, grid = _unwrap(u, grid)
    k = grid.k
    cx, cy, cz = c[..., 0, :, :, :], c[..., 1, :, :, :], c[..., 2, :, :, :]
    out = 1j * np.stack(
        [k[1] * cz - k[2] * cy, k[2] * cx - k[0] * cz, k[0] * cy - k[1] * cx], axis=-4
    )
    return _rewrap(u, out, grid)


def inner(u, w, grid=None) -> float:
    """L^2 inner product <u, w> under the normalised measure."""
    cu, grid = _unwrap(u, grid)
    cw, gw = _unwrap(w, grid)
    if gw != grid:
        raise GridMismatchError(f"{grid} vs {gw}")
    prod = np.real(np.conj(cu) * cw) * grid.weights
    return np.sum(prod, axis=(-4, -3, -2, -1))


def sobolev_norm(u, s=0.0, grid=None, homogeneous=True):
    """(sum_k w_k |k|^(2s) |u_hat_k|^2)^(1/2).

    ``s=0`` is the L^2 norm, ``s=1`` the gradient norm ||grad u|| and ``s=2`` the
    Stokes norm ||A u||. With ``homogeneous=False`` the weight is (1 + |k|^2)^s.
    """
    if s < 0:
        raise ValueError("Sobolev order must be non-negative")
    c, grid = _unwrap(u, grid)
    base = grid.k2 if homogeneous else 1.0 + grid.k2
    weight = grid.weights * base**s if s else grid.weights
    sq = np.sum(weight * np.abs(c) ** 2, axis=(-4, -3, -2, -1))
    return np.sqrt(sq)


@dataclass(frozen=True)
class TailBoundReport:
    tail_norm: float  # ||(I - P) u||^2
    bound: float  # lambda_next^-s ||u||_{H^s}^2
    lambda_next: float | None
    satisfied: bool


def tail_sobolev_bound_check(u, cutoff, s, grid=None, rtol=1e-12) -> TailBoundReport:
    """Compare ||(I - P_cutoff) u||^2 with lambda_next^(-s) ||u||_{H^s}^2.

    ``lambda_next`` is the smallest grid eigenvalue above the cutoff; the
    homogeneous H^s norm is used. When no mode lies above the cutoff the tail
    is zero and the check holds trivially.
    """
    if s <= 0:
        raise ValueError("Sobolev order must be positive")
    c, grid = _unwrap(u, grid)
    tail = float(sobolev_norm(tail_part(c, cutoff, grid), 0.0, grid) ** 2)
    lam = grid.next_eigenvalue(cutoff)
    if lam is None:
        return TailBoundReport(tail, 0.0, None, tail == 0.0)
    bound = float(lam ** (-s) * sobolev_norm(c, s, grid) ** 2)
    ok = tail <= bound * (1 + rtol) + 1e-300
    return TailBoundReport(tail, bound, lam, bool(ok))


def to_physical(u, grid=None) -> np.ndarray:
    """Real samples on the n^3 grid, shape (..., 3, n, n, n)."""
    c, grid = _unwrap(u, grid)
    n = grid.n
    return sfft.irfftn(c, s=(n, n, n), axes=(-3, -2, -1)) * n**3


def to_spectral(samples, grid: WaveGrid) -> SpectralField:
    """Inverse of :func:`to_physical`; no projection is applied."""
    samples = np.asarray(samples, dtype=float)
    if samples.shape[-4:] != grid.physical_shape:
        raise GridMismatchError(
            f"sample shape {samples.shape} does not match grid {grid.physical_shape}"
        )
    c = sfft.rfftn(samples, axes=(-3, -2, -1)) / grid.n**3
    if c.ndim == 4:
        return SpectralField(grid, c)
    return c


def physical_norm(samples) -> float:
    """Root-mean-square of |u| over grid nodes (L^2 norm under dx/(2pi)^3)."""
    samples = np.asarray(samples)
    return np.sqrt(np.mean(np.sum(samples**2, axis=-4), axis=(-3, -2, -1)))


def symmetry_defect(u, grid=None) -> float:
    """Largest violation of u_hat(-k) = conj(u_hat(k)) inside self-conjugate planes."""
    c, grid = _unwrap(u, grid)
    px, py = grid.conjugate_index
    worst = 0.0
    for iz in (0, grid.n // 2):
        plane = c[..., iz]
        partner = plane[..., px, :][..., :, py]
        worst = max(worst, float(np.abs(plane - np.conj(partner)).max()))
    return worst


def fourier_mode(grid: WaveGrid, k, amplitude) -> SpectralField:
    """Real field ``a e^{ik.x} + conj(a) e^{-ik.x}`` for integer wavevector ``k``.

    Its L^2 norm is ``sqrt(2) |a|``. The amplitude is not projected.
    """
    k = np.asarray(k, dtype=np.int64)
    a = np.asarray(amplitude, dtype=complex)
    if np.any(np.abs(k) >= grid.n // 2):
        raise ValueError(f"wavevector {k.tolist()} not representable on n={grid.n}")
    if not k.any():
        raise ValueError("the mean mode is pinned to zero")
    c = np.zeros(grid.shape, dtype=complex)
    if k[2] < 0 or (k[2] == 0 and (k[1] < 0 or (k[1] == 0 and k[0] < 0))):
        k, a = -k, np.conj(a)
    ix, iy, iz = k[0] % grid.n, k[1] % grid.n, k[2]
    c[:, ix, iy, iz] += a
    if iz == 0:
        c[:, (-k[0]) % grid.n, (-k[1]) % grid.n, 0] += np.conj(a)
    return SpectralField(grid, c)


def random_field(grid: WaveGrid, rng, cutoff=None, slope=0.0) -> SpectralField:
    """Random divergence-free field supported on the active modes.

    Built from real Gaussian samples, so conjugate symmetry holds exactly.
    ``slope`` scales the coefficient standard deviation as |k|^(-slope).
    The result is not normalised.
    """
    samples = rng.standard_normal(grid.physical_shape)
    c = sfft.rfftn(samples, axes=(-3, -2, -1)) / grid.n**3
    if slope:
        c = c * grid._k2_safe ** (-slope / 2)
    c = np.where(grid.active_mask(cutoff), c, 0.0)
    return leray_project(SpectralField(grid, c))
