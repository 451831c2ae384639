"""Tensor primitive tests: forward values against a direct-loop oracle,
backward passes against finite differences and adjoint identities."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import central_diff, conv2d_direct, rel_err

from pentimento.errors import NumericError, ShapeError
from pentimento.ops import (
    ConvParams,
    avg_pool_backward,
    avg_pool_forward,
    conv2d_backward_input,
    conv2d_forward,
    relu_backward,
    relu_forward,
)


def random_conv_case(rng, n, c_in, c_out, h, w, k, stride=1, padding="reflect"):
    x = rng.standard_normal((n, c_in, h, w)).astype(np.float32)
    params = ConvParams(
        kernel=rng.standard_normal((c_out, c_in, k, k)).astype(np.float32),
        bias=rng.standard_normal(c_out).astype(np.float32),
        stride=stride,
        padding=padding,
    )
    return x, params


class TestConvForward:
    def test_identity_kernel_on_ones(self):
        """1x1 kernel [[1]], bias 0 reproduces the input exactly."""
        x = np.ones((1, 1, 3, 3), dtype=np.float32)
        params = ConvParams(
            kernel=np.ones((1, 1, 1, 1), np.float32), bias=np.zeros(1, np.float32)
        )
        out = conv2d_forward(x, params)
        assert out.shape == (1, 1, 3, 3)
        np.testing.assert_array_equal(out, x)

    def test_even_kernel_rejected(self):
        """Even kernel sizes violate the same-size contract."""
        with pytest.raises(ShapeError, match="odd"):
            ConvParams(
                kernel=np.ones((1, 1, 2, 2), np.float32), bias=np.zeros(1, np.float32)
            )

    def test_channel_mismatch_names_both_shapes(self):
        x = np.zeros((1, 2, 4, 4), dtype=np.float32)
        params = ConvParams(
            kernel=np.ones((1, 3, 3, 3), np.float32), bias=np.zeros(1, np.float32)
        )
        with pytest.raises(ShapeError) as err:
            conv2d_forward(x, params)
        assert "(1, 2, 4, 4)" in str(err.value) and "(1, 3, 3, 3)" in str(err.value)

    def test_non_finite_input_rejected(self):
        x = np.zeros((1, 1, 4, 4), dtype=np.float32)
        x[0, 0, 1, 1] = np.nan
        params = ConvParams(
            kernel=np.ones((1, 1, 1, 1), np.float32), bias=np.zeros(1, np.float32)
        )
        with pytest.raises(NumericError):
            conv2d_forward(x, params)

    def test_matches_direct_loop_oracle_reflect(self):
        """Random 2x3x8x8 case with reflect padding vs the brute-force loops."""
        rng = np.random.default_rng(0)
        x, params = random_conv_case(rng, 2, 3, 4, 8, 8, 3, padding="reflect")
        fast = conv2d_forward(x, params)
        slow = conv2d_direct(x, params.kernel, params.bias, padding="reflect")
        assert rel_err(fast, slow) <= 1e-5

    @pytest.mark.parametrize("padding", ["zero", "reflect"])
    @pytest.mark.parametrize("stride", [1, 2])
    def test_matches_oracle_across_shapes(self, padding, stride):
        rng = np.random.default_rng(42)
        for _ in range(8):
            n = int(rng.integers(1, 4))
            c_in = int(rng.integers(1, 5))
            c_out = int(rng.integers(1, 5))
            h = int(rng.integers(3, 10))
            w = int(rng.integers(3, 10))
            k = int(rng.choice([1, 3]))
            x, params = random_conv_case(rng, n, c_in, c_out, h, w, k, stride, padding)
            fast = conv2d_forward(x, params)
            slow = conv2d_direct(x, params.kernel, params.bias, stride, padding)
            assert fast.shape == slow.shape
            assert rel_err(fast, slow) <= 1e-5

    def test_zero_padding_small_input_rejected(self):
        x = np.zeros((1, 1, 2, 2), dtype=np.float32)
        params = ConvParams(
            kernel=np.ones((1, 1, 3, 3), np.float32),
            bias=np.zeros(1, np.float32),
            padding="zero",
        )
        with pytest.raises(ShapeError):
            conv2d_forward(x, params)

    def test_output_stays_finite(self):
        rng = np.random.default_rng(3)
        x, params = random_conv_case(rng, 1, 2, 3, 6, 6, 3)
        assert np.all(np.isfinite(conv2d_forward(x, params)))


class TestConvBackward:
    def test_zero_grad_out_gives_zero(self):
        """Backward is linear, so zero upstream gradient maps to zero."""
        rng = np.random.default_rng(1)
        x, params = random_conv_case(rng, 1, 2, 3, 5, 5, 3)
        g = np.zeros(conv2d_forward(x, params).shape, dtype=np.float32)
        grad = conv2d_backward_input(g, params, x.shape)
        np.testing.assert_array_equal(grad, np.zeros_like(x))

    def test_identity_kernel_is_identity_adjoint(self):
        rng = np.random.default_rng(2)
        params = ConvParams(
            kernel=np.ones((1, 1, 1, 1), np.float32), bias=np.zeros(1, np.float32)
        )
        g = rng.standard_normal((1, 1, 4, 4)).astype(np.float32)
        grad = conv2d_backward_input(g, params, (1, 1, 4, 4))
        np.testing.assert_allclose(grad, g, rtol=1e-6)

    def test_shape_mismatch_rejected(self):
        params = ConvParams(
            kernel=np.ones((2, 1, 3, 3), np.float32), bias=np.zeros(2, np.float32)
        )
        bad = np.zeros((1, 1, 4, 4), dtype=np.float32)  # c_out should be 2
        with pytest.raises(ShapeError):
            conv2d_backward_input(bad, params, (1, 1, 4, 4))

    @pytest.mark.parametrize("padding", ["zero", "reflect"])
    def test_matches_finite_differences(self, padding):
        """d<conv(x), g>/dx vs central differences at eps=1e-3."""
        rng = np.random.default_rng(4)
        x, params = random_conv_case(rng, 1, 2, 2, 5, 5, 3, padding=padding)
        x64 = x.astype(np.float64)
        g = rng.standard_normal(conv2d_forward(x64, params).shape)

        def scalar(xv):
            return float(np.sum(conv2d_forward(xv, params) * g))

        analytic = conv2d_backward_input(g, params, x.shape)
        numeric = central_diff(scalar, x64, eps=1e-3)
        assert rel_err(analytic, numeric, floor=1e-9) <= 1e-3

    @pytest.mark.parametrize("padding", ["zero", "reflect"])
    @pytest.mark.parametrize("stride", [1, 2])
    def test_adjoint_identity(self, padding, stride):
        """<conv(x), y> == <x, conv_backward(y)> with zero bias."""
        rng = np.random.default_rng(5)
        x, params = random_conv_case(rng, 2, 3, 4, 6, 6, 3, stride, padding)
        params = ConvParams(
            kernel=params.kernel,
            bias=np.zeros(params.c_out, np.float32),
            stride=stride,
            padding=padding,
        )
        y = rng.standard_normal(conv2d_forward(x, params).shape).astype(np.float32)
        lhs = float(np.sum(conv2d_forward(x, params).astype(np.float64) * y))
        rhs = float(
            np.sum(x.astype(np.float64) * conv2d_backward_input(y, params, x.shape))
        )
        assert abs(lhs - rhs) <= 1e-5 * max(abs(lhs), abs(rhs))

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 10_000), a=st.floats(-3, 3), b=st.floats(-3, 3))
    def test_linear_in_grad_out(self, seed, a, b):
        """backward(a*g1 + b*g2) == a*backward(g1) + b*backward(g2)."""
        rng = np.random.default_rng(seed)
        x, params = random_conv_case(rng, 1, 2, 2, 4, 4, 3)
        shape = conv2d_forward(x, params).shape
        g1 = rng.standard_normal(shape).astype(np.float32)
        g2 = rng.standard_normal(shape).astype(np.float32)
        combined = conv2d_backward_input(
            np.float32(a) * g1 + np.float32(b) * g2, params, x.shape
        )
        split = np.float32(a) * conv2d_backward_input(
            g1, params, x.shape
        ) + np.float32(b) * conv2d_backward_input(g2, params, x.shape)
        assert rel_err(combined, split, floor=1e-6) <= 1e-6 or np.allclose(
            combined, split, atol=1e-5, rtol=1e-6
        )


class TestAvgPool:
    def test_constant_input_stays_constant(self):
        x = np.full((1, 2, 4, 4), 0.7, dtype=np.float32)
        out = avg_pool_forward(x, window=2, stride=2)
        np.testing.assert_allclose(out, 0.7, rtol=1e-7)

    def test_mean_of_2x2_block(self):
        x = np.array([[1.0, 2.0], [3.0, 4.0]], np.float32).reshape(1, 1, 2, 2)
        out = avg_pool_forward(x, window=2, stride=2)
        assert out.shape == (1, 1, 1, 1)
        assert out[0, 0, 0, 0] == pytest.approx(2.5)

    def test_mass_conservation(self):
        """sum(output) * window^2 equals sum(input)."""
        rng = np.random.default_rng(6)
        x = rng.standard_normal((2, 3, 8, 8)).astype(np.float32)
        out = avg_pool_forward(x, window=2, stride=2)
        lhs = float(np.sum(out, dtype=np.float64)) * 4
        rhs = float(np.sum(x, dtype=np.float64))
        assert abs(lhs - rhs) <= 1e-6 * max(1.0, abs(rhs))

    def test_indivisible_dims_rejected(self):
        with pytest.raises(ShapeError):
            avg_pool_forward(np.zeros((1, 1, 5, 4), np.float32), window=2, stride=2)

    def test_backward_distributes_uniformly(self):
        g = np.array([[4.0]], np.float32).reshape(1, 1, 1, 1)
        grad = avg_pool_backward(g, (1, 1, 2, 2), window=2, stride=2)
        np.testing.assert_allclose(grad, np.ones((1, 1, 2, 2)))

    def test_backward_is_adjoint(self):
        rng = np.random.default_rng(7)
        x = rng.standard_normal((1, 2, 6, 6)).astype(np.float32)
        y = rng.standard_normal((1, 2, 3, 3)).astype(np.float32)
        lhs = float(np.sum(avg_pool_forward(x).astype(np.float64) * y))
        rhs = float(np.sum(x.astype(np.float64) * avg_pool_backward(y, x.shape)))
        assert abs(lhs - rhs) <= 1e-6 * max(abs(lhs), 1.0)


class TestRelu:
    def test_basic_values(self):
        x = np.array([-1.0, 0.0, 2.0], np.float32).reshape(1, 1, 1, 3)
        np.testing.assert_array_equal(
            relu_forward(x), np.array([0.0, 0.0, 2.0], np.float32).reshape(1, 1, 1, 3)
        )

    def test_all_positive_is_identity(self):
        rng = np.random.default_rng(8)
        x = rng.random((1, 2, 3, 3)).astype(np.float32) + 0.1
        np.testing.assert_array_equal(relu_forward(x), x)

    def test_gradient_gated_and_zero_at_zero(self):
        x = np.array([-2.0, 0.0, 3.0], np.float32).reshape(1, 1, 1, 3)
        g = np.ones_like(x)
        np.testing.assert_array_equal(
            relu_backward(g, x),
            np.array([0.0, 0.0, 1.0], np.float32).reshape(1, 1, 1, 3),
        )

    def test_matches_finite_differences_away_from_zero(self):
        rng = np.random.default_rng(9)
        x = rng.standard_normal((1, 2, 4, 4))
        x[np.abs(x) < 0.05] += 0.2  # keep clear of the kink
        g = rng.standard_normal(x.shape)

        def scalar(xv):
            return float(np.sum(relu_forward(xv) * g))

        analytic = relu_backward(g, x)
        numeric = central_diff(scalar, x, eps=1e-4)
        assert rel_err(analytic, numeric, floor=1e-9) <= 1e-3


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_pool_backward_linearity(seed):
    rng = np.random.default_rng(seed)
    g1 = rng.standard_normal((1, 1, 2, 2)).astype(np.float32)
    g2 = rng.standard_normal((1, 1, 2, 2)).astype(np.float32)
    combined = avg_pool_backward(2 * g1 + 3 * g2, (1, 1, 4, 4))
    split = 2 * avg_pool_backward(g1, (1, 1, 4, 4)) + 3 * avg_pool_backward(
        g2, (1, 1, 4, 4)
    )
    np.testing.assert_allclose(combined, split, rtol=1e-6, atol=1e-7)
