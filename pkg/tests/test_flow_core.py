import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from impulseflow import (
    IntegratorConfig,
    VectorFieldSpec,
    eval_vector_field,
    flow,
    level_gradient,
    level_value,
)
from conftest import polar
from oracles import annulus_position, prey_predator_rhs


class TestEvalVectorField:
    def test_annulus_rotation(self):
        spec = VectorFieldSpec("annulus")
        assert np.allclose(eval_vector_field(spec, [1.0, 0.0]), [0.0, 1.0])
        assert np.allclose(eval_vector_field(spec, [0.0, 2.0]), [-2.0, 0.0])

    def test_prey_predator_origin_fixed(self):
        spec = VectorFieldSpec("prey_predator")
        assert np.allclose(eval_vector_field(spec, [0.0, 0.0, 0.0]), 0.0)

    def test_prey_predator_unit_point(self):
        # frozen from hand substitution, cross-checked by the transcription
        # oracle: denominator 3, numerators -(1+1), -(1+1), -1
        spec = VectorFieldSpec("prey_predator")
        out = eval_vector_field(spec, [1.0, 1.0, 1.0])
        assert np.allclose(out, [-2 / 3, -2 / 3, -1 / 3], atol=1e-15)
        assert np.allclose(out, prey_predator_rhs(np.ones(3)), atol=1e-15)

    def test_prey_predator_random_matches_oracle(self, rng):
        spec = VectorFieldSpec("prey_predator")
        for _ in range(25):
            x = rng.uniform(0.0, 2.0, 3)
            assert np.allclose(eval_vector_field(spec, x), prey_predator_rhs(x),
                               rtol=1e-14)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="dimension"):
            eval_vector_field(VectorFieldSpec("annulus"), [1.0, 0.0, 0.0])

    def test_unknown_system(self):
        with pytest.raises(ValueError, match="unknown system_id"):
            VectorFieldSpec("nope")

    def test_prey_predator_param_validation(self):
        with pytest.raises(ValueError, match="must be > 0"):
            VectorFieldSpec("prey_predator", {"mu1": 0.0})
        with pytest.raises(ValueError, match="unknown prey_predator"):
            VectorFieldSpec("prey_predator", {"mu3": 1.0})


class TestFlow:
    def test_identity_at_zero(self, cfg):
        x = np.array([1.3, 0.4])
        assert np.array_equal(flow(VectorFieldSpec("annulus"), x, 0.0, cfg), x)

    def test_annulus_quarter_turn(self, cfg):
        # closed form: theta(t) = theta0 + t, r constant
        out = flow(VectorFieldSpec("annulus"), polar(1.5, 0.0), np.pi / 2, cfg)
        assert np.allclose(out, polar(1.5, np.pi / 2), atol=1e-10)

    def test_annulus_long_horizon_matches_closed_form(self, cfg):
        out = flow(VectorFieldSpec("annulus"), polar(1.7, 0.3), 87.0, cfg)
        assert np.allclose(out, annulus_position(1.7, 0.3, 87.0), atol=5e-9)

    def test_prey_predator_sum_strictly_decreasing(self, cfg):
        spec = VectorFieldSpec("prey_predator")
        x = np.array([0.8, 0.6, 0.6])
        sums = [x.sum()]
        for _ in range(8):
            x = flow(spec, x, 0.5, cfg)
            sums.append(x.sum())
        assert all(a > b for a, b in zip(sums, sums[1:]))

    def test_prey_predator_octant_invariant(self, cfg, rng):
        spec = VectorFieldSpec("prey_predator")
        for _ in range(5):
            x = rng.uniform(0.01, 1.5, 3)
            out = flow(spec, x, 20.0, cfg)
            assert (out >= -1e-9).all()

    def test_backward_flow_inverts(self, cfg):
        spec = VectorFieldSpec("prey_predator")
        x = np.array([0.5, 0.4, 0.3])
        back = flow(spec, flow(spec, x, 3.0, cfg), -3.0, cfg)
        assert np.allclose(back, x, atol=1e-8)

    @settings(max_examples=15, deadline=None)
    @given(s=st.floats(0.0, 10.0), t=st.floats(0.0, 10.0),
           r=st.floats(1.05, 1.95), theta=st.floats(0.0, 6.28))
    def test_semigroup_annulus(self, s, t, r, theta):
        cfg = IntegratorConfig()
        spec = VectorFieldSpec("annulus")
        x = polar(r, theta)
        a = flow(spec, flow(spec, x, s, cfg), t, cfg)
        b = flow(spec, x, s + t, cfg)
        bound = 10 * (cfg.abs_tol + cfg.rel_tol * np.linalg.norm(x))
        assert np.linalg.norm(a - b) <= bound

    @settings(max_examples=10, deadline=None)
    @given(s=st.floats(0.1, 10.0), t=st.floats(0.1, 10.0))
    def test_semigroup_prey_predator(self, s, t):
        cfg = IntegratorConfig()
        spec = VectorFieldSpec("prey_predator")
        x = np.array([0.9, 0.7, 0.4])
        a = flow(spec, flow(spec, x, s, cfg), t, cfg)
        b = flow(spec, x, s + t, cfg)
        bound = 10 * (cfg.abs_tol + cfg.rel_tol * np.linalg.norm(x))
        assert np.linalg.norm(a - b) <= bound

    @pytest.mark.parametrize("t", [1.0, 10.0, 50.0, 100.0])
    def test_annulus_radius_conserved(self, cfg, t):
        x = polar(1.5, 0.7)
        out = flow(VectorFieldSpec("annulus"), x, t, cfg)
        bound = cfg.abs_tol + cfg.rel_tol * np.linalg.norm(x)
        assert abs(np.hypot(*out) - 1.5) <= bound


class TestLevels:
    def test_sum_gradient_is_ones(self, rng):
        x = rng.uniform(0, 2, 3)
        assert np.array_equal(level_gradient("sum", x), np.ones(3))

    def test_angle_gradient_pairs_with_rotation(self):
        # d(theta)/dt along the rotation field is identically one
        for r, th in [(1.0, 0.3), (1.5, 2.0), (2.0, 5.5)]:
            x = polar(r, th)
            g = level_gradient("angle", x)
            f = eval_vector_field(VectorFieldSpec("annulus"), x)
            assert np.isclose(np.dot(g, f), 1.0)

    def test_radius_gradient_is_unit_radial(self):
        x = polar(1.5, 1.1)
        g = level_gradient("radius", x)
        assert np.allclose(g, x / 1.5)
        assert np.isclose(np.linalg.norm(g), 1.0)

    def test_level_values(self):
        assert np.isclose(level_value("radius", polar(1.5, 0.4)), 1.5)
        assert np.isclose(level_value("sum", [0.3, 0.3, 0.4]), 1.0)
        assert np.isclose(level_value("coord1", [2.0, -0.7]), -0.7)

    def test_unknown_level(self):
        with pytest.raises(ValueError, match="unknown level_id"):
            level_gradient("widget", np.zeros(2))


class TestIntegratorConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            IntegratorConfig(min_step=1.0, max_step=0.1)
        with pytest.raises(ValueError):
            IntegratorConfig(abs_tol=0.0)
