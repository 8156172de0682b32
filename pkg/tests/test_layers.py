import numpy as np
import numpy.testing as npt
import pytest

from temporal_augmenter import gradcheck
from temporal_augmenter.layers import (
    Conv1DParams,
    DenseParams,
    conv1d_backward,
    conv1d_forward,
    dense_backward,
    dense_forward,
    dropout_backward,
    dropout_forward,
    maxpool1d_backward,
    maxpool1d_forward,
    relu_backward,
    relu_forward,
)
from temporal_augmenter.tensor_core import Rng, ShapeError


class TestDense:
    def test_identity(self):
        p = DenseParams(W=np.eye(2), b=np.zeros(2))
        y, _ = dense_forward(np.array([[1.0, 2.0]]), p)
        npt.assert_array_equal(y, [[1.0, 2.0]])

    def test_linear_layer_calculus(self):
        x = np.array([[1.0, 2.0]])
        p = DenseParams(W=np.zeros((2, 2)), b=np.zeros(2))
        _, cache = dense_forward(x, p)
        _, dW, db = dense_backward(cache, np.ones((1, 2)))
        npt.assert_array_equal(db, [1.0, 1.0])
        npt.assert_array_equal(dW, x.T @ np.ones((1, 2)))

    def test_shape_mismatch(self):
        p = DenseParams(W=np.eye(3), b=np.zeros(3))
        with pytest.raises(ShapeError):
            dense_forward(np.zeros((2, 2)), p)

    def test_finite_differences(self):
        assert gradcheck.check_dense(seed=0, trials=20) < 1e-6


class TestConv1D:
    def test_forced_arithmetic(self):
        x = np.array([1.0, 2.0, 3.0]).reshape(1, 3, 1)
        p = Conv1DParams(K=np.array([1.0, -1.0]).reshape(2, 1, 1), b=np.zeros(1))
        y, _ = conv1d_forward(x, p)
        npt.assert_array_equal(y[0, :, 0], [-1.0, -1.0])

    def test_kernel1_reduces_to_dense_bitwise(self):
        rng = Rng(21)
        x = rng.uniform((4, 6, 3)) * 2 - 1
        W = rng.uniform((3, 5)) * 2 - 1
        b = rng.uniform((5,)) * 2 - 1
        conv_y, _ = conv1d_forward(x, Conv1DParams(K=W[None, :, :], b=b))
        dense = DenseParams(W=W, b=b)
        for t in range(6):
            dense_y, _ = dense_forward(x[:, t, :], dense)
            npt.assert_array_equal(conv_y[:, t, :], dense_y)

    def test_too_short_sequence(self):
        p = Conv1DParams(K=np.zeros((4, 1, 2)), b=np.zeros(2))
        with pytest.raises(ShapeError):
            conv1d_forward(np.zeros((1, 3, 1)), p)

    def test_finite_differences(self):
        assert gradcheck.check_conv1d(seed=0, trials=20) < 1e-6


class TestMaxPool1D:
    def test_window_max(self):
        x = np.array([1.0, 3.0, 2.0, 5.0]).reshape(1, 4, 1)
        y, _ = maxpool1d_forward(x, 2)
        npt.assert_array_equal(y[0, :, 0], [3.0, 5.0])

    def test_argmax_routing(self):
        x = np.array([1.0, 3.0, 2.0, 5.0]).reshape(1, 4, 1)
        _, cache = maxpool1d_forward(x, 2)
        dx = maxpool1d_backward(cache, np.ones((1, 2, 1)))
        npt.assert_array_equal(dx[0, :, 0], [0.0, 1.0, 0.0, 1.0])

    def test_tie_routes_to_first_index(self):
        x = np.array([2.0, 2.0]).reshape(1, 2, 1)
        _, cache = maxpool1d_forward(x, 2)
        dx = maxpool1d_backward(cache, np.ones((1, 1, 1)))
        npt.assert_array_equal(dx[0, :, 0], [1.0, 0.0])

    def test_remainder_steps_dropped(self):
        x = np.arange(7.0).reshape(1, 7, 1)
        y, _ = maxpool1d_forward(x, 2)
        npt.assert_array_equal(y[0, :, 0], [1.0, 3.0, 5.0])

    def test_pool_larger_than_sequence(self):
        with pytest.raises(ShapeError):
            maxpool1d_forward(np.zeros((1, 3, 1)), 4)

    def test_gradient_mass_conserved(self):
        rng = Rng(31)
        for _ in range(10):
            x = rng.uniform((3, 9, 4)) * 2 - 1
            y, cache = maxpool1d_forward(x, 2)
            dy = rng.uniform(y.shape) * 2 - 1
            dx = maxpool1d_backward(cache, dy)
            assert abs(dx.sum() - dy.sum()) < 1e-12

    def test_finite_differences(self):
        assert gradcheck.check_maxpool1d(seed=0, trials=20) < 1e-6


class TestDropout:
    def test_rate_zero_train_is_identity(self):
        x = Rng(41).uniform((5, 7))
        y, _ = dropout_forward(x, 0.0, "train", Rng(1))
        assert y is x

    def test_eval_is_identity_any_rate(self):
        x = Rng(42).uniform((5, 7))
        y, _ = dropout_forward(x, 0.9, "eval")
        assert y is x

    def test_invalid_rate(self):
        with pytest.raises(ValueError):
            dropout_forward(np.ones((2, 2)), 1.0, "train", Rng(0))
        with pytest.raises(ValueError):
            dropout_forward(np.ones((2, 2)), -0.1, "train", Rng(0))

    def test_expectation_preserved(self):
        x = Rng(43).uniform((100000,)) + 0.5
        y, _ = dropout_forward(x, 0.5, "train", Rng(44))
        assert abs(y.mean() - x.mean()) / x.mean() < 0.02

    def test_backward_applies_same_mask(self):
        x = Rng(45).uniform((50, 20))
        y, cache = dropout_forward(x, 0.3, "train", Rng(46))
        dy = np.ones_like(x)
        dx = dropout_backward(cache, dy)
        # gradient zero exactly where the value was dropped, scaled elsewhere
        npt.assert_array_equal(dx == 0.0, y == 0.0)
        assert np.allclose(dx[dx != 0], 1.0 / 0.7)

    def test_finite_differences(self):
        assert gradcheck.check_dropout(seed=0, trials=10) < 1e-6


class TestReLU:
    def test_values(self):
        y, _ = relu_forward(np.array([-1.0, 0.0, 2.0]))
        npt.assert_array_equal(y, [0.0, 0.0, 2.0])

    def test_gradient_mask(self):
        _, cache = relu_forward(np.array([3.0, -3.0, 0.0]))
        dx = relu_backward(cache, np.ones(3))
        npt.assert_array_equal(dx, [1.0, 0.0, 0.0])

    def test_finite_differences(self):
        assert gradcheck.check_relu(seed=0, trials=20) < 1e-6


def test_all_layer_backwards_match_fd_on_random_configs():
    """Umbrella property: every layer passes FD on 20 random shapes/configs."""
    for checker in (gradcheck.check_dense, gradcheck.check_conv1d,
                    gradcheck.check_maxpool1d, gradcheck.check_relu):
        assert checker(seed=7, trials=20) < 1e-4
