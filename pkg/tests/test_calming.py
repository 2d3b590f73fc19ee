import numpy as np
import pytest

import oracles
from calmedns.calming import (
    CalmingSpec,
    Variant,
    calm_eval,
    calm_field,
    calm_sup_norm,
    q_profile,
    verify_calming_axioms,
)

VARIANTS = ["z1", "z2", "z3", "z4"]


class TestEvaluation:
    @pytest.mark.parametrize("variant", VARIANTS)
    @pytest.mark.parametrize("eps", [0.5, 2.0])
    def test_matches_per_vector_oracle(self, variant, eps, rng):
        x = rng.standard_normal((200, 3)) * 3
        got = calm_eval(CalmingSpec(variant, eps), x)
        ref = np.array([oracles.calming_vector(variant, eps, xi) for xi in x])
        assert np.allclose(got, ref, rtol=1e-14, atol=1e-15)

    def test_identity(self, rng):
        x = rng.standard_normal((5, 3))
        assert np.array_equal(calm_eval(CalmingSpec("identity", 1.0), x), x)

    @pytest.mark.parametrize("variant", VARIANTS)
    def test_zero_maps_to_zero(self, variant):
        assert np.all(calm_eval(CalmingSpec(variant, 1.0), np.zeros((1, 3))) == 0)

    def test_field_axis(self, rng):
        u = rng.standard_normal((3, 4, 4, 4))
        spec = CalmingSpec("z1", 1.0)
        direct = calm_eval(spec, np.moveaxis(u, 0, -1))
        assert np.allclose(calm_field(spec, u), np.moveaxis(direct, -1, 0))

    def test_bad_eps(self):
        with pytest.raises(ValueError):
            CalmingSpec("z1", 0.0)
        with pytest.raises(ValueError):
            CalmingSpec("z1", float("nan"))

    def test_unknown_variant(self):
        with pytest.raises(ValueError):
            CalmingSpec("z9", 1.0)


class TestZ4Profile:
    """The blended profile must be C^1 at both joins."""

    @pytest.mark.parametrize("eps", [0.5, 1.0, 3.0])
    def test_continuous_and_smooth(self, eps):
        d = 1e-7
        for r0 in (1 / eps, 2 / eps):
            lo, hi = q_profile(r0 - d, eps), q_profile(r0 + d, eps)
            assert abs(hi - lo) < 3 * d
            slope_lo = (q_profile(r0 - d, eps) - q_profile(r0 - 2 * d, eps)) / d
            slope_hi = (q_profile(r0 + 2 * d, eps) - q_profile(r0 + d, eps)) / d
            assert abs(slope_hi - slope_lo) < 1e-5

    def test_values(self):
        eps = 2.0
        assert q_profile(0.25, eps) == 0.25
        assert q_profile(10.0, eps) == pytest.approx(0.75)
        assert q_profile(0.75, eps) == pytest.approx(-(1.0) * (0.75 - 1.0) ** 2 + 0.75)


class TestSupNorm:
    @pytest.mark.parametrize("variant", VARIANTS)
    @pytest.mark.parametrize("eps", [0.5, 1.0, 2.0, 4.0])
    def test_closed_form_matches_sweep(self, variant, eps):
        m = calm_sup_norm(CalmingSpec(variant, eps))
        assert oracles.calming_sup_numeric(variant, eps) == pytest.approx(m, rel=1e-9)

    def test_closed_forms(self):
        assert calm_sup_norm(CalmingSpec("z1", 2.0)) == 0.5
        assert calm_sup_norm(CalmingSpec("z2", 2.0)) == 0.25
        assert calm_sup_norm(CalmingSpec("z3", 2.0)) == pytest.approx(np.sqrt(3) * np.pi / 4)
        assert calm_sup_norm(CalmingSpec("z4", 2.0)) == 0.75

    def test_identity_unbounded(self):
        spec = CalmingSpec(Variant.IDENTITY, 1.0)
        with pytest.raises(ValueError):
            calm_sup_norm(spec)
        assert spec.sup_norm == float("inf")


class TestAxiomSuite:
    @pytest.mark.parametrize("variant", VARIANTS)
    def test_passes(self, variant):
        rep = verify_calming_axioms(CalmingSpec(variant, 1.0), sample_count=20_000)
        assert rep.passed, rep.violations
        assert rep.worst_ratios["lipschitz"] <= 1 + 1e-9

    def test_detects_wrong_quadratic_coefficient(self, monkeypatch):
        """A 2/eps blend breaks continuity at r = 1/eps and hence Lipschitz-1."""
        import calmedns.calming as cm

        def bad_q(r, eps):
            r = np.asarray(r, dtype=float)
            mid = -(2.0 / eps) * (r - 2.0 / eps) ** 2 + 1.5 / eps
            return np.where(r < 1.0 / eps, r, np.where(r < 2.0 / eps, mid, 1.5 / eps))

        monkeypatch.setattr(cm, "q_profile", bad_q)
        rep = verify_calming_axioms(CalmingSpec("z4", 0.5), sample_count=20_000)
        assert not rep.passed

    def test_identity_fails_boundedness(self):
        rep = verify_calming_axioms(CalmingSpec("identity", 1.0), sample_count=10_000)
        assert not rep.bounded_ok and rep.lipschitz_ok and rep.residual_ok

    def test_sample_floor(self):
        with pytest.raises(ValueError):
            verify_calming_axioms(CalmingSpec("z1", 1.0), sample_count=100)

    def test_report_serialisable(self):
        import json

        d = verify_calming_axioms(CalmingSpec("z2", 1.0), sample_count=10_000).to_dict()
        json.dumps(d)
        assert d["variant"] == "z2"

    def test_seeded(self):
        a = verify_calming_axioms(CalmingSpec("z3", 1.0), sample_count=10_000, seed=4)
        b = verify_calming_axioms(CalmingSpec("z3", 1.0), sample_count=10_000, seed=4)
        assert a.worst_ratios == b.worst_ratios
