import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from proxfilter.models import (
    LinearModel,
    ScalarModel,
    SigmoidModel,
    fd_gradient_check,
    get_model,
    linear_eval,
    linear_grad,
    sigmoid_eval,
    sigmoid_grad,
)


def test_models_satisfy_protocol():
    assert isinstance(LinearModel(), ScalarModel)
    assert isinstance(SigmoidModel(), ScalarModel)
    assert get_model("sigmoid").n_params(4) == 5
    with pytest.raises(ValueError):
        get_model("cubic")


class TestSigmoid:
    def test_origin(self, rng):
        assert sigmoid_eval(np.zeros(4), rng.standard_normal(3)) == 0.5

    def test_saturation(self):
        assert abs(sigmoid_eval(np.array([40.0, 0.0]), np.array([3.0])) - 1.0) <= 1e-15
        assert sigmoid_eval(np.array([-800.0, 0.0]), np.array([1.0])) == 0.0
        assert sigmoid_eval(np.array([800.0, 0.0]), np.array([1.0])) == 1.0

    def test_zero_logit(self):
        assert sigmoid_eval(np.array([1.0, 2.0]), np.array([-0.5])) == 0.5

    def test_output_strictly_inside_unit_interval(self, rng):
        # float64 rounds the logistic to exactly 0 or 1 beyond |logit| ~ 36.7
        for z in np.linspace(-36, 36, 721):
            v = sigmoid_eval(np.array([z, 0.0]), np.array([1.0]))
            assert 0.0 < v < 1.0

    @settings(max_examples=200, deadline=None)
    @given(z=st.floats(-700, 700), x=st.floats(-5, 5))
    def test_reflection(self, z, x):
        theta = np.array([z - x, 1.0])
        reflected = np.array([-(z - x), 1.0])
        total = sigmoid_eval(theta, np.array([x])) + sigmoid_eval(reflected, np.array([-x]))
        assert abs(total - 1.0) <= 1e-12

    def test_grad_at_origin(self):
        np.testing.assert_array_equal(sigmoid_grad(np.zeros(3), np.array([1.0, 1.0])), [0.25] * 3)

    def test_grad_saturated(self):
        g = sigmoid_grad(np.array([40.0, 0.0, 0.0]), np.array([1.0, -2.0]))
        assert np.all(np.abs(g) <= 1e-15)

    def test_grad_matches_extended_precision_derivative(self, rng):
        mpmath.mp.dps = 40
        for _ in range(20):
            theta, x = rng.standard_normal(4), rng.standard_normal(3)
            z = mpmath.mpf(theta[0]) + mpmath.fsum(mpmath.mpf(a) * mpmath.mpf(b) for a, b in zip(theta[1:], x))
            s = 1 / (1 + mpmath.exp(-z))
            slope = float(s * (1 - s))
            expected = slope * np.concatenate(([1.0], x))
            np.testing.assert_allclose(sigmoid_grad(theta, x), expected, rtol=1e-13)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            sigmoid_eval(np.zeros(3), np.zeros(3))
        with pytest.raises(ValueError):
            sigmoid_grad(np.zeros(2), np.zeros(3))


class TestLinear:
    def test_zero(self, rng):
        assert linear_eval(np.zeros(3), rng.standard_normal(3)) == 0.0

    def test_grad_independent_of_theta(self, rng):
        x = rng.standard_normal(4)
        np.testing.assert_array_equal(linear_grad(rng.standard_normal(4), x), linear_grad(rng.standard_normal(4), x))

    def test_against_exact_dot(self, rng):
        for _ in range(20):
            theta, x = rng.standard_normal(6), rng.standard_normal(6)
            exact = math.fsum(a * b for a, b in zip(theta, x))
            assert linear_eval(theta, x) == pytest.approx(exact, rel=1e-14, abs=1e-15)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            linear_eval(np.zeros(2), np.zeros(3))


class TestFdGradientCheck:
    def test_linear_exact(self, rng):
        # no truncation error for a linear function, so a wide step only reduces roundoff
        for _ in range(20):
            theta, x = rng.standard_normal(5), rng.standard_normal(5)
            assert fd_gradient_check(LinearModel(), theta, x, step=1e-2) <= 1e-10

    def test_sigmoid_origin(self, rng):
        assert fd_gradient_check(SigmoidModel(), np.zeros(4), rng.standard_normal(3)) < 1e-6

    def test_sigmoid_saturated_uses_absolute_error(self):
        theta = np.array([60.0, 0.5, -0.5])
        assert np.max(np.abs(sigmoid_grad(theta, np.array([1.0, 1.0])))) < 1e-8
        assert fd_gradient_check(SigmoidModel(), theta, np.array([1.0, 1.0])) < 1e-10

    def test_detects_wrong_gradient(self, rng):
        class Broken(SigmoidModel):
            def grad(self, theta, x):
                return 1.01 * super().grad(theta, x)

        assert fd_gradient_check(Broken(), np.zeros(3), np.ones(2)) > 1e-3

    def test_random_points(self, rng):
        for _ in range(100):
            m = int(rng.integers(1, 6))
            x = rng.standard_normal(m)
            assert fd_gradient_check(SigmoidModel(), rng.standard_normal(m + 1), x) < 1e-6
            assert fd_gradient_check(LinearModel(), rng.standard_normal(m), x) < 1e-6
