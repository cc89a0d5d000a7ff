from __future__ import annotations

import itertools

import numpy as np
import pytest

from loomc.errors import IncompatibleShapes, OutOfRange, ShapeMismatch, UnsupportedDtype
from loomc.models.tensor import DType, Shape, TensorType, TensorValue, broadcast_shapes, linear_index, strides


@pytest.mark.parametrize(
    "a, b, expected",
    [
        ((3, 4, 5), (3, 4, 5), (3, 4, 5)),
        ((3, 4, 5), (), (3, 4, 5)),
        ((2, 1, 4), (3, 4), (2, 3, 4)),
        ((1,), (7, 1), (7, 1)),
    ],
)
def test_broadcast_shapes(a, b, expected):
    assert broadcast_shapes(Shape.of(*a), Shape.of(*b)) == Shape.of(*expected)


def test_broadcast_is_commutative_and_idempotent():
    shapes = [Shape.of(*dims) for dims in [(), (1,), (4,), (3, 1), (1, 4), (2, 3, 4)]]
    for a, b in itertools.product(shapes, repeat=2):
        try:
            ab = broadcast_shapes(a, b)
        except IncompatibleShapes:
            with pytest.raises(IncompatibleShapes):
                broadcast_shapes(b, a)
            continue
        assert ab == broadcast_shapes(b, a)
    for s in shapes:
        assert broadcast_shapes(s, s) == s


def test_broadcast_rejects_mismatched_dims():
    with pytest.raises(IncompatibleShapes):
        broadcast_shapes(Shape.of(2, 3), Shape.of(4, 3))


def test_broadcast_index_mapping_matches_numpy():
    a = np.arange(8, dtype=np.float32).reshape(2, 1, 4)
    b = np.arange(12, dtype=np.float32).reshape(3, 4)
    out = broadcast_shapes(Shape.of(*a.shape), Shape.of(*b.shape))
    assert out.static_dims == (a + b).shape


@pytest.mark.parametrize("indices, offset", [([0, 0, 0], 0), ([2, 3, 4], 59), ([1, 2, 3], 33)])
def test_linear_index(indices, offset):
    assert linear_index(Shape.of(3, 4, 5), indices) == offset


def test_linear_index_is_a_bijection():
    shape = Shape.of(3, 4, 5)
    offsets = [linear_index(shape, idx) for idx in itertools.product(range(3), range(4), range(5))]
    assert offsets == list(range(60))


@pytest.mark.parametrize("indices", [[3, 0, 0], [0, -1, 0], [0, 0]])
def test_linear_index_out_of_range(indices):
    with pytest.raises(OutOfRange):
        linear_index(Shape.of(3, 4, 5), indices)


def test_strides_are_row_major():
    assert strides(Shape.of(3, 4, 5)) == (20, 5, 1)
    assert strides(Shape.scalar()) == ()


def test_dtype_widths():
    assert DType.F32.itemsize == 4
    assert DType.I64.itemsize == 8
    assert DType.from_onnx_code(1) is DType.F32
    assert DType.from_onnx_code(7) is DType.I64


@pytest.mark.parametrize("code, name", [(10, "float16"), (11, "float64")])
def test_unsupported_dtype_is_named(code, name):
    with pytest.raises(UnsupportedDtype, match=name):
        DType.from_onnx_code(code)


def test_shape_invariants():
    with pytest.raises(ValueError):
        Shape(False, (3,))
    assert Shape.of(3, None).rank == 2
    assert not Shape.of(3, None).is_static
    assert Shape.unranked().rank is None
    assert Shape.scalar().elem_count == 1
    assert Shape.of(0, 4).elem_count == 0


def test_tensor_type_rendering():
    assert str(TensorType(DType.F32, Shape.of(3, 4, 5))) == "tensor<3x4x5xf32>"
    assert str(TensorType(DType.F32, Shape.scalar())) == "tensor<f32>"
    assert str(TensorType(DType.I64, Shape.unranked())) == "tensor<*xi64>"
    assert str(TensorType(DType.F32, Shape.of(None, 4))) == "tensor<?x4xf32>"
    assert TensorType(DType.F32, Shape.of(2)).render("memref") == "memref<2xf32>"


def test_tensor_value_checks_payload_length():
    with pytest.raises(ShapeMismatch):
        TensorValue(DType.F32, Shape.of(2, 2), np.zeros(3, dtype=np.float32))
    with pytest.raises(ShapeMismatch):
        TensorValue(DType.F32, Shape.of(None), np.zeros(3, dtype=np.float32))


def test_tensor_value_is_immutable_and_row_major():
    array = np.arange(6, dtype=np.float32).reshape(2, 3)
    value = TensorValue.from_array(array)
    assert value.shape == Shape.of(2, 3)
    np.testing.assert_array_equal(value.data, [0, 1, 2, 3, 4, 5])
    with pytest.raises(ValueError):
        value.data[0] = 7.0
    np.testing.assert_array_equal(value.to_array(), array)


def test_tensor_value_equality_is_bitwise():
    a = TensorValue.from_array(np.array([np.nan, 1.0], dtype=np.float32))
    b = TensorValue.from_array(np.array([np.nan, 1.0], dtype=np.float32))
    assert a == b
    assert TensorValue.from_array(np.array([0.0], dtype=np.float32)) != TensorValue.from_array(
        np.array([-0.0], dtype=np.float32)
    )


def test_from_array_picks_dtype():
    assert TensorValue.from_array([1, 2]).dtype is DType.I64
    assert TensorValue.from_array([1.5]).dtype is DType.F32
    assert TensorValue.scalar(2.0).shape == Shape.scalar()
