import numpy as np
import pytest

from dlsvm import tensor
from dlsvm.errors import DomainError, ShapeError


class TestAsTensor:
    def test_reshapes_flat_values(self):
        t = tensor.as_tensor([1, 2, 3, 4, 5, 6], (2, 3))
        assert t.shape == (2, 3)
        assert t.dtype == np.float64
        np.testing.assert_array_equal(t[1], [4, 5, 6])

    def test_float32_opt_in(self):
        assert tensor.as_tensor([1, 2], (2,), dtype=np.float32).dtype == np.float32

    def test_size_mismatch(self):
        with pytest.raises(ShapeError):
            tensor.as_tensor([1, 2, 3], (2, 2))

    def test_non_positive_dimension(self):
        with pytest.raises(ShapeError):
            tensor.as_tensor([], (0, 2))

    def test_check_finite(self):
        with pytest.raises(DomainError):
            tensor.check_finite(np.array([1.0, np.nan]))


class TestMatmul:
    def test_identity(self):
        b = np.array([[1.0, 2.0], [3.0, 4.0]])
        np.testing.assert_array_equal(tensor.matmul(np.eye(2), b), b)

    def test_zero_right_operand(self):
        np.testing.assert_array_equal(tensor.matmul(np.eye(2), np.zeros((2, 2))), np.zeros((2, 2)))

    def test_hand_expansion(self):
        out = tensor.matmul(np.array([[1.0, 2.0], [3.0, 4.0]]), np.array([[5.0], [6.0]]))
        np.testing.assert_array_equal(out, [[17.0], [39.0]])

    def test_inner_dimension_mismatch_names_both_shapes(self):
        with pytest.raises(ShapeError, match=r"\(2, 3\).*\(2, 3\)"):
            tensor.matmul(np.ones((2, 3)), np.ones((2, 3)))

    def test_rank(self):
        with pytest.raises(ShapeError):
            tensor.matmul(np.ones(3), np.ones((3, 1)))

    @pytest.mark.parametrize("seed", range(5))
    def test_associative(self, seed):
        rng = np.random.default_rng(seed)
        m, k, p, q = rng.integers(1, 9, size=4)
        a, b, c = rng.standard_normal((m, k)), rng.standard_normal((k, p)), rng.standard_normal((p, q))
        left = tensor.matmul(tensor.matmul(a, b), c)
        right = tensor.matmul(a, tensor.matmul(b, c))
        assert np.max(np.abs(left - right)) < 1e-9

    def test_repeat_calls_are_bit_identical(self, rng):
        a, b = rng.standard_normal((8, 5)), rng.standard_normal((5, 7))
        np.testing.assert_array_equal(tensor.matmul(a, b), tensor.matmul(a, b))


class TestElementwise:
    def test_max_with_scalar(self):
        np.testing.assert_array_equal(tensor.elementwise("max", np.array([-1.0, 0.5, 2.0]), 0), [0, 0.5, 2])

    def test_add_zeros(self):
        x = np.array([1.0, -2.0, 3.0])
        np.testing.assert_array_equal(tensor.elementwise("add", x, np.zeros(3)), x)

    def test_scale(self):
        np.testing.assert_array_equal(tensor.elementwise("scale", np.array([1.0, 2.0, 3.0]), 2), [2, 4, 6])

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            tensor.elementwise("mul", np.ones(3), np.ones(4))

    def test_unknown_op(self):
        with pytest.raises(DomainError):
            tensor.elementwise("div", np.ones(3), np.ones(3))


class TestReduce:
    def test_argmax_unique(self):
        assert tensor.reduce("argmax", np.array([0.1, 0.9, 0.2]), axis=0) == 1

    def test_argmax_tie_takes_lowest_index(self):
        assert tensor.reduce("argmax", np.array([0.5, 0.5]), axis=0) == 0

    def test_sum(self):
        np.testing.assert_array_equal(tensor.reduce("sum", np.array([[1, 2], [3, 4]]), axis=0), [4, 6])

    def test_axis_out_of_range(self):
        with pytest.raises(ShapeError):
            tensor.reduce("sum", np.ones((2, 2)), axis=2)

    def test_empty_axis(self):
        with pytest.raises(DomainError):
            tensor.reduce("argmax", np.ones((2, 0)), axis=1)
