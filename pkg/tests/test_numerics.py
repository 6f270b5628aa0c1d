"""Core tensor ops: frozen oracles, invariants, and gradient checks."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aste.errors import NumericError, ShapeError
from aste.numerics import (
    ParamGroup,
    Tensor,
    concat_cols,
    concat_rows,
    cross_entropy,
    gather_cols,
    grad_check,
    layer_norm,
    linear,
    softmax,
    stack_last,
    take_rows,
)

# Independent 64-bit scalar oracle for softmax([1, 2]):
#   e = exp(1); [1/(1+e), e/(1+e)]
SOFTMAX_1_2 = (0.2689414213699951, 0.7310585786300049)


class TestLinear:
    def test_identity_weight(self):
        out = linear(Tensor([[1.0, 2.0]]), Tensor([[1.0, 0.0], [0.0, 1.0]]))
        np.testing.assert_array_equal(out.data, [[1.0, 2.0]])

    def test_zero_input_returns_bias(self):
        out = linear(Tensor([[0.0, 0.0]]), Tensor([[5.0, -1.0], [2.0, 7.0]]), Tensor([3.0, 4.0]))
        np.testing.assert_array_equal(out.data, [[3.0, 4.0]])

    def test_hand_oracle(self):
        # [1, 2] @ [[1, 1], [1, 1]] + [0, 0] = [3, 3] by scalar arithmetic
        out = linear(Tensor([[1.0, 2.0]]), Tensor([[1.0, 1.0], [1.0, 1.0]]), Tensor([0.0, 0.0]))
        np.testing.assert_array_equal(out.data, [[3.0, 3.0]])

    def test_dimension_mismatch(self):
        with pytest.raises(ShapeError):
            linear(Tensor([[1.0, 2.0]]), Tensor([[1.0], [1.0], [1.0]]))

    def test_bad_bias_shape(self):
        with pytest.raises(ShapeError):
            linear(Tensor([[1.0, 2.0]]), Tensor([[1.0], [1.0]]), Tensor([1.0, 2.0]))


class TestSoftmax:
    def test_uniform_on_zeros(self):
        out = softmax(Tensor([0.0, 0.0, 0.0, 0.0]))
        np.testing.assert_allclose(out.data, [0.25] * 4, atol=1e-15)

    def test_single_element(self):
        np.testing.assert_array_equal(softmax(Tensor([5.0])).data, [1.0])

    def test_two_element_oracle(self):
        out = softmax(Tensor([1.0, 2.0]))
        np.testing.assert_allclose(out.data, SOFTMAX_1_2, atol=1e-15)

    def test_monotone(self):
        out = softmax(Tensor([0.5, 1.5, -2.0])).data
        assert out[1] > out[0] > out[2]

    @given(st.lists(st.floats(-50, 50), min_size=1, max_size=8),
           st.floats(-30, 30))
    @settings(max_examples=150, deadline=None)
    def test_rows_sum_to_one_and_shift_invariant(self, row, shift):
        base = softmax(Tensor(row)).data
        assert abs(base.sum() - 1.0) <= 1e-12
        shifted = softmax(Tensor([v + shift for v in row])).data
        np.testing.assert_allclose(base, shifted, atol=1e-12)

    def test_masked_columns_get_zero_weight(self):
        mask = np.array([[True, False, True]])
        out = softmax(Tensor([[1.0, 100.0, 2.0]]), mask=mask).data
        assert out[0, 1] == 0.0
        assert abs(out[0].sum() - 1.0) <= 1e-12

    def test_fully_masked_slice_rejected(self):
        with pytest.raises(ShapeError):
            softmax(Tensor([[1.0, 2.0]]), mask=np.array([[False, False]]))


class TestCrossEntropy:
    def test_one_hot_correct_is_zero(self):
        probs = Tensor([[0.0, 1.0, 0.0]])
        assert abs(cross_entropy(probs, np.array([1])).item()) <= 1e-12

    def test_uniform_three_class(self):
        probs = Tensor(np.full((5, 3), 1 / 3))
        assert abs(cross_entropy(probs, np.zeros(5, dtype=int)).item() - math.log(3)) <= 1e-12

    def test_uniform_four_class(self):
        probs = Tensor(np.full((2, 4), 0.25))
        assert abs(cross_entropy(probs, np.array([3, 1])).item() - math.log(4)) <= 1e-12

    def test_masked_slices_contribute_nothing(self):
        probs = Tensor([[0.5, 0.5], [1e-9, 1.0 - 1e-9]])
        mask = np.array([True, False])
        assert abs(cross_entropy(probs, np.array([0, 0]), mask).item() - math.log(2)) <= 1e-12

    def test_all_masked_is_zero(self):
        probs = Tensor([[0.5, 0.5]])
        assert cross_entropy(probs, np.array([0]), np.array([False])).item() == 0.0

    def test_target_out_of_range(self):
        with pytest.raises(IndexError):
            cross_entropy(Tensor([[0.5, 0.5]]), np.array([2]))

    @given(st.integers(0, 3), st.lists(st.floats(0.01, 10), min_size=4, max_size=4))
    @settings(max_examples=100, deadline=None)
    def test_non_negative_and_zero_iff_one_hot(self, target, raw):
        row = np.array(raw) / np.sum(raw)
        value = cross_entropy(Tensor(row[None, :]), np.array([target])).item()
        assert value >= 0.0
        assert (value <= 1e-12) == (row[target] >= 1.0 - 1e-12)


class TestTensorBasics:
    def test_non_finite_rejected(self):
        with pytest.raises(NumericError):
            Tensor([np.inf])
        with pytest.raises(NumericError):
            Tensor([[np.nan]])

    def test_overflow_surfaces_as_numeric_error(self):
        big = Tensor(np.full((2, 2), 1e308))
        with np.errstate(over="ignore"), pytest.raises(NumericError):
            _ = big @ big

    def test_ops_are_deterministic(self):
        x = Tensor(np.arange(6.0).reshape(2, 3))
        w = Tensor(np.ones((3, 2)))
        first = (x @ w).data
        second = (x @ w).data
        np.testing.assert_array_equal(first, second)

    def test_backward_requires_scalar(self):
        with pytest.raises(ShapeError):
            Tensor([1.0, 2.0], requires_grad=True).backward()

    def test_shaping_ops_round_trip_gradients(self):
        g = ParamGroup("parser")
        a = g.add("a", Tensor(np.arange(6.0).reshape(2, 3)))
        b = g.add("b", Tensor(np.arange(6.0, 12.0).reshape(2, 3)))

        def f():
            rows = concat_rows([a, b])
            cols = concat_cols([a.T, b.T])
            stacked = stack_last([a, b])
            return (rows * rows).sum() + (cols * cols).sum() + (stacked * stacked).sum()

        assert grad_check(f, g, samples_per_tensor=6) < 1e-6

    def test_take_rows_and_gather_cols_bounds(self):
        table = Tensor(np.zeros((3, 2)))
        with pytest.raises(IndexError):
            take_rows(table, np.array([3]))
        with pytest.raises(IndexError):
            gather_cols(Tensor(np.zeros((2, 4))), np.array([[4, 0], [1, 1]]))


class TestParamGroup:
    def test_duplicate_names_rejected(self):
        g = ParamGroup("encoder")
        g.add("w", Tensor([1.0]))
        with pytest.raises(ValueError):
            g.add("w", Tensor([2.0]))

    def test_multiplier_positive(self):
        with pytest.raises(ValueError):
            ParamGroup("parser", lr_multiplier=0.0)

    def test_num_params(self):
        g = ParamGroup("encoder")
        g.add("a", Tensor(np.zeros((2, 3))))
        g.add("b", Tensor(np.zeros(4)))
        assert g.num_params() == 10


class TestGradCheck:
    def test_square_at_three(self):
        g = ParamGroup("parser")
        w = g.add("w", Tensor([[3.0]]))
        err = grad_check(lambda: (w * w).sum(), g)
        assert err <= 1e-8
        # analytic gradient is exactly 2w = 6
        g.zero_grad()
        loss = (w * w).sum()
        loss.backward()
        assert abs(w.grad[0, 0] - 6.0) <= 1e-12

    def test_composed_loss_path(self):
        rng = np.random.default_rng(1)
        g = ParamGroup("parser")
        w = g.add("w", Tensor(rng.normal(0, 0.5, (4, 3))))
        b = g.add("b", Tensor(rng.normal(0, 0.5, (3,))))
        x = Tensor(rng.normal(0, 1, (3, 4)))
        targets = np.array([0, 2, 1])
        err = grad_check(lambda: cross_entropy(softmax(linear(x, w, b)), targets), g,
                         samples_per_tensor=8)
        assert err < 1e-4

    def test_constant_function(self):
        g = ParamGroup("parser")
        g.add("w", Tensor([[1.0, 2.0]]))
        assert grad_check(lambda: Tensor(0.0) + Tensor(0.0), g) == 0.0

    def test_layer_norm_gradients(self):
        rng = np.random.default_rng(2)
        g = ParamGroup("encoder")
        gain = g.add("g", Tensor(np.ones(5)))
        bias = g.add("b", Tensor(np.zeros(5)))
        w = g.add("w", Tensor(rng.normal(0, 0.3, (5, 5))))
        x = Tensor(rng.normal(0, 1, (4, 5)))

        def f():
            h = layer_norm(x @ w, gain, bias)
            return (h * h).sum()

        assert grad_check(f, g, samples_per_tensor=8) < 1e-4

    def test_non_finite_objective_rejected(self):
        g = ParamGroup("parser")
        w = g.add("w", Tensor([[1e308]]))
        with np.errstate(over="ignore"), pytest.raises(NumericError):
            grad_check(lambda: (w * w).sum(), g)
