"""Property-based checks over randomly drawn inputs."""
import numpy as np
from hypothesis import given, settings, strategies as st

from calmedns.calming import CalmingSpec, calm_eval, calm_sup_norm
from calmedns.noise import sample_wiener, wiener_shift
from calmedns.spectral import (
    WaveGrid,
    galerkin_truncate,
    inner,
    leray_project,
    random_field,
    sobolev_norm,
    tail_part,
    to_physical,
    to_spectral,
)

GRID = WaveGrid(8)
seeds = st.integers(0, 2**32 - 1)
variants = st.sampled_from(["z1", "z2", "z3", "z4"])
eps_values = st.floats(0.05, 20.0)
vectors = st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=3).map(np.array)


class TestSpectralProperties:
    @given(seeds)
    @settings(max_examples=25, deadline=None)
    def test_leray_idempotent(self, seed):
        u = random_field(GRID, np.random.default_rng(seed))
        assert np.allclose(leray_project(u).coeffs, u.coeffs, atol=1e-14)

    @given(seeds)
    @settings(max_examples=25, deadline=None)
    def test_transform_roundtrip(self, seed):
        u = random_field(GRID, np.random.default_rng(seed))
        assert np.allclose(to_spectral(to_physical(u), GRID).coeffs, u.coeffs, atol=1e-14)

    @given(seeds, st.sampled_from([1.0, 2.0, 3.0, 6.0, 12.0]))
    @settings(max_examples=25, deadline=None)
    def test_truncation_splits_orthogonally(self, seed, cutoff):
        u = random_field(GRID, np.random.default_rng(seed))
        lo, hi = galerkin_truncate(u, cutoff), tail_part(u, cutoff)
        assert np.allclose((lo + hi).coeffs, u.coeffs)
        assert abs(inner(lo, hi)) < 1e-12 * max(1.0, sobolev_norm(u) ** 2)
        assert sobolev_norm(hi, 1.0) ** 2 >= GRID.next_eigenvalue(cutoff) * sobolev_norm(hi) ** 2 * (1 - 1e-12)

    @given(seeds, st.floats(0.0, 2.0))
    @settings(max_examples=25, deadline=None)
    def test_norms_increase_with_order(self, seed, s):
        u = random_field(GRID, np.random.default_rng(seed))
        assert sobolev_norm(u, s + 0.5) >= sobolev_norm(u, s) * (1 - 1e-12)


class TestCalmingProperties:
    @given(variants, eps_values, vectors, vectors)
    def test_one_lipschitz(self, variant, eps, x, y):
        spec = CalmingSpec(variant, eps)
        d = np.linalg.norm(calm_eval(spec, x) - calm_eval(spec, y))
        assert d <= np.linalg.norm(x - y) * (1 + 1e-12) + 1e-12

    @given(variants, eps_values, vectors)
    def test_bounded(self, variant, eps, x):
        spec = CalmingSpec(variant, eps)
        assert np.linalg.norm(calm_eval(spec, x)) <= calm_sup_norm(spec) * (1 + 1e-12)

    @given(variants, eps_values, vectors)
    def test_residual_bound(self, variant, eps, x):
        spec = CalmingSpec(variant, eps)
        c, a, b = spec.residual
        r = np.linalg.norm(x)
        assert np.linalg.norm(calm_eval(spec, x) - x) <= c * eps**a * r**b * (1 + 1e-9) + 1e-300

    @given(variants, eps_values, vectors)
    def test_odd(self, variant, eps, x):
        spec = CalmingSpec(variant, eps)
        assert np.array_equal(calm_eval(spec, -x), -calm_eval(spec, x))


class TestNoiseProperties:
    @given(seeds, st.integers(-200, 200), st.integers(-200, 200))
    @settings(max_examples=30, deadline=None)
    def test_shift_group_law(self, seed, a, b):
        dt = 0.01
        w = sample_wiener(seed, -6.0, 6.0, dt)
        two = wiener_shift(wiener_shift(w, a * dt), b * dt)
        one = wiener_shift(w, (a + b) * dt)
        assert np.allclose(two.values, one.values, atol=1e-12)
        assert two.origin == one.origin

    @given(seeds)
    @settings(max_examples=20, deadline=None)
    def test_window_independence(self, seed):
        small = sample_wiener(seed, -1.0, 1.0, 0.01)
        big = sample_wiener(seed, -5.0, 3.0, 0.01)
        assert np.allclose(small.increments, big.increments[400:600], atol=1e-13)
