"""Tensor types, shapes, broadcasting and concrete tensor values."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from loomc.errors import IncompatibleShapes, OutOfRange, ShapeMismatch, UnsupportedDtype

# ONNX TensorProto.DataType codes that have a name worth reporting.
_ONNX_DTYPE_NAMES = {
    1: "float32",
    2: "uint8",
    3: "int8",
    5: "int16",
    6: "int32",
    7: "int64",
    9: "bool",
    10: "float16",
    11: "float64",
    16: "bfloat16",
}


class DType(str, Enum):
    F32 = "f32"
    I64 = "i64"

    @property
    def itemsize(self) -> int:
        return 4 if self is DType.F32 else 8

    @property
    def onnx_code(self) -> int:
        return 1 if self is DType.F32 else 7

    @property
    def numpy(self) -> np.dtype:
        return np.dtype(np.float32) if self is DType.F32 else np.dtype(np.int64)

    @classmethod
    def from_onnx_code(cls, code: int) -> DType:
        if code == 1:
            return cls.F32
        if code == 7:
            return cls.I64
        name = _ONNX_DTYPE_NAMES.get(int(code), "unknown")
        raise UnsupportedDtype(
            message=f"Unsupported element type {code} ({name}); only float32 (1) and int64 (7) are supported",
            details={"elem_type": int(code), "name": name},
        )

    @classmethod
    def from_numpy(cls, dtype: np.dtype) -> DType:
        kind = np.dtype(dtype)
        if kind == np.float32:
            return cls.F32
        if kind == np.int64:
            return cls.I64
        raise UnsupportedDtype(message=f"Unsupported numpy dtype {kind}")


Dim = int | None


@dataclass(frozen=True)
class Shape:
    """Optionally-ranked shape; `None` dims are unknown (`?`)."""

    rank_known: bool
    dims: tuple[Dim, ...] = ()

    def __post_init__(self) -> None:
        if not self.rank_known and self.dims:
            raise ValueError("an unranked shape carries no dims")
        for d in self.dims:
            if d is not None and d < 0:
                raise ValueError(f"negative dimension {d}")

    @classmethod
    def of(cls, *dims: Dim) -> Shape:
        return cls(True, tuple(None if d is None else int(d) for d in dims))

    @classmethod
    def from_dims(cls, dims: Iterable[Dim]) -> Shape:
        return cls.of(*dims)

    @classmethod
    def unranked(cls) -> Shape:
        return cls(False, ())

    @classmethod
    def scalar(cls) -> Shape:
        return cls(True, ())

    @property
    def rank(self) -> int | None:
        return len(self.dims) if self.rank_known else None

    @property
    def is_static(self) -> bool:
        return self.rank_known and all(d is not None for d in self.dims)

    @property
    def static_dims(self) -> tuple[int, ...]:
        if not self.is_static:
            raise ShapeMismatch(message=f"shape {self} is not static")
        return tuple(int(d) for d in self.dims)  # type: ignore[arg-type]

    @property
    def elem_count(self) -> int:
        return math.prod(self.static_dims)

    def __str__(self) -> str:
        if not self.rank_known:
            return "*"
        return "x".join("?" if d is None else str(d) for d in self.dims)


@dataclass(frozen=True)
class TensorType:
    dtype: DType
    shape: Shape

    def __str__(self) -> str:
        return self.render("tensor")

    def render(self, kind: str) -> str:
        """Render as `tensor<3x4xf32>` / `memref<...>`; rank-0 prints `tensor<f32>`."""

        if not self.shape.rank_known:
            return f"{kind}<*x{self.dtype.value}>"
        if not self.shape.dims:
            return f"{kind}<{self.dtype.value}>"
        return f"{kind}<{self.shape}x{self.dtype.value}>"


def strides(shape: Shape) -> tuple[int, ...]:
    dims = shape.static_dims
    out = [1] * len(dims)
    for k in range(len(dims) - 2, -1, -1):
        out[k] = out[k + 1] * dims[k + 1]
    return tuple(out)


def linear_index(shape: Shape, indices: Sequence[int]) -> int:
    """Row-major offset of `indices` inside `shape`."""

    dims = shape.static_dims
    if len(indices) != len(dims):
        raise OutOfRange(
            message=f"expected {len(dims)} indices for shape {shape}, got {len(indices)}",
        )
    offset = 0
    for idx, dim, stride in zip(indices, dims, strides(shape)):
        if not 0 <= int(idx) < dim:
            raise OutOfRange(
                message=f"index {list(indices)} out of range for shape {shape}",
                details={"indices": list(indices), "shape": list(dims)},
            )
        offset += int(idx) * stride
    return offset


def broadcast_shapes(a: Shape, b: Shape) -> Shape:
    """ONNX multidirectional broadcast of two static shapes."""

    da, db = a.static_dims, b.static_dims
    rank = max(len(da), len(db))
    pa = (1,) * (rank - len(da)) + da
    pb = (1,) * (rank - len(db)) + db
    out: list[int] = []
    for x, y in zip(pa, pb):
        if x != y and x != 1 and y != 1:
            raise IncompatibleShapes(
                message=f"cannot broadcast {a} with {b}",
                details={"a": list(da), "b": list(db)},
            )
        out.append(y if x == 1 else x)
    return Shape.of(*out)


@dataclass(frozen=True, eq=False)
class TensorValue:
    """Concrete dense tensor: row-major flat payload in the canonical numpy dtype."""

    dtype: DType
    shape: Shape
    data: np.ndarray

    def __post_init__(self) -> None:
        if not self.shape.is_static:
            raise ShapeMismatch(message=f"tensor values need a static shape, got {self.shape}")
        flat = np.ascontiguousarray(np.asarray(self.data).reshape(-1), dtype=self.dtype.numpy)
        if flat.size != self.shape.elem_count:
            raise ShapeMismatch(
                message=f"payload has {flat.size} elements, shape {self.shape} needs {self.shape.elem_count}",
            )
        flat.setflags(write=False)
        object.__setattr__(self, "data", flat)

    @classmethod
    def from_array(cls, array: np.ndarray | Sequence, dtype: DType | None = None) -> TensorValue:
        arr = np.asarray(array)
        if dtype is None:
            dtype = DType.I64 if np.issubdtype(arr.dtype, np.integer) else DType.F32
        return cls(dtype, Shape.of(*arr.shape), arr.astype(dtype.numpy, copy=False))

    @classmethod
    def scalar(cls, value: float, dtype: DType = DType.F32) -> TensorValue:
        return cls(dtype, Shape.scalar(), np.asarray([value], dtype=dtype.numpy))

    @property
    def type(self) -> TensorType:
        return TensorType(self.dtype, self.shape)

    def to_array(self) -> np.ndarray:
        return self.data.reshape(self.shape.static_dims)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TensorValue):
            return NotImplemented
        return (
            self.dtype == other.dtype
            and self.shape == other.shape
            and self.data.tobytes() == other.data.tobytes()
        )

    def __hash__(self) -> int:
        return hash((self.dtype, self.shape, self.data.tobytes()))

    def __repr__(self) -> str:
        return f"TensorValue({self.type}, {self.to_array().tolist()!r})"
