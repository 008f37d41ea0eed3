"""
Unit tests for gradient clipping and the Adam optimizer.
"""

import numpy as np
import pytest

from app.ml.utils.optim import Adam, clip_by_global_norm, global_norm


class TestClipping:
    """Test cases for global-norm clipping."""

    def test_global_norm(self):
        assert global_norm({"a": np.array([3.0]), "b": np.array([[4.0]])}) == pytest.approx(5.0)

    def test_clips_above_threshold(self):
        clipped, norm = clip_by_global_norm({"a": np.array([3.0]), "b": np.array([4.0])}, 1.0)
        assert norm == pytest.approx(5.0)
        assert global_norm(clipped) == pytest.approx(1.0)
        np.testing.assert_allclose(clipped["a"], [0.6])

    def test_leaves_small_gradients(self):
        grads = {"a": np.array([0.1, 0.2])}
        clipped, _ = clip_by_global_norm(grads, 5.0)
        np.testing.assert_array_equal(clipped["a"], grads["a"])
        assert clipped["a"] is not grads["a"]


class TestAdam:
    """Test cases for Adam."""

    def test_first_step_moves_by_learning_rate(self):
        """Bias correction makes the first step lr * sign(g)."""
        params = {"w": np.array([1.0, -1.0])}
        Adam(params, learning_rate=0.1).step({"w": np.array([0.5, -2.0])})
        np.testing.assert_allclose(params["w"], [0.9, -0.9], atol=1e-6)

    def test_updates_in_place(self):
        array = np.zeros(2)
        params = {"w": array}
        Adam(params).step({"w": np.ones(2)})
        assert params["w"] is array
        assert np.all(array < 0)

    def test_missing_gradient_counts_as_zero(self):
        params = {"w": np.array([1.0]), "frozen": np.array([2.0])}
        Adam(params).step({"w": np.array([1.0])})
        np.testing.assert_array_equal(params["frozen"], [2.0])

    def test_returns_norm_before_clipping(self):
        optimizer = Adam({"w": np.zeros(2)}, clip_norm=1.0)
        assert optimizer.step({"w": np.array([30.0, 40.0])}) == pytest.approx(50.0)

    def test_minimizes_quadratic(self):
        target = np.array([3.0, -2.0, 0.5])
        params = {"w": np.zeros(3)}
        optimizer = Adam(params, learning_rate=0.05)
        for _ in range(2000):
            optimizer.step({"w": 2.0 * (params["w"] - target)})
        np.testing.assert_allclose(params["w"], target, atol=1e-2)
