"""Data-driven operator registry: arity, attribute schema with defaults, shape rule.

One record per operator, in the spirit of tablegen op definitions. Adding an
operator means adding a row to `REGISTRY` plus (optionally) an evaluator
kernel and a lowering rule.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from loomc.errors import ParseError, ShapeMismatch
from loomc.models.graph import AttributeValue, OpKind
from loomc.models.tensor import Dim, DType, Shape, TensorType, TensorValue


class AttrKind(str, Enum):
    FLOAT = "FLOAT"
    INT = "INT"
    INTS = "INTS"
    TENSOR = "TENSOR"


@dataclass(frozen=True)
class AttrSpec:
    name: str
    kind: AttrKind
    default: AttributeValue | None = None  # None: required

    @property
    def required(self) -> bool:
        return self.default is None


@dataclass(frozen=True)
class InferContext:
    """What a shape rule may look at."""

    kind: OpKind
    operands: Sequence[TensorType]
    attributes: Mapping[str, AttributeValue]
    constant_of: Callable[[int], TensorValue | None]

    def fail(self, reason: str) -> ShapeMismatch:
        return ShapeMismatch(message=f"{self.kind.value}: {reason}", details={"op": self.kind.value})


ShapeRule = Callable[[InferContext], TensorType]


@dataclass(frozen=True)
class OpSpec:
    kind: OpKind
    num_operands: int
    attributes: tuple[AttrSpec, ...]
    infer: ShapeRule
    num_results: int = 1

    def attr(self, name: str) -> AttrSpec | None:
        for spec in self.attributes:
            if spec.name == name:
                return spec
        return None


def to_f32(value: float) -> float:
    """Round a python float to the nearest f32 and return it as a python float."""

    return float(np.float32(value))


def coerce_attribute(spec: AttrSpec, value: Any) -> AttributeValue:
    if spec.kind is AttrKind.FLOAT:
        if isinstance(value, bool) or not isinstance(value, (int, float, np.floating, np.integer)):
            raise ParseError(message=f"attribute {spec.name} expects a float, got {value!r}")
        return to_f32(float(value))
    if spec.kind is AttrKind.INT:
        if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
            raise ParseError(message=f"attribute {spec.name} expects an integer, got {value!r}")
        return int(value)
    if spec.kind is AttrKind.INTS:
        if not isinstance(value, (list, tuple)) or any(
            isinstance(v, bool) or not isinstance(v, (int, np.integer)) for v in value
        ):
            raise ParseError(message=f"attribute {spec.name} expects a list of integers, got {value!r}")
        return tuple(int(v) for v in value)
    if not isinstance(value, TensorValue):
        raise ParseError(message=f"attribute {spec.name} expects a tensor")
    return value


def build_attributes(kind: OpKind, given: Mapping[str, Any]) -> dict[str, AttributeValue]:
    """Validate `given` against the schema of `kind` and materialize defaults."""

    spec = REGISTRY[kind]
    unknown = sorted(set(given) - {a.name for a in spec.attributes})
    if unknown:
        raise ParseError(
            message=f"{kind.value} has no attribute(s) {', '.join(unknown)}",
            details={"op": kind.value, "unknown": unknown},
        )
    attrs: dict[str, AttributeValue] = {}
    for a in spec.attributes:
        if a.name in given:
            attrs[a.name] = coerce_attribute(a, given[a.name])
        elif a.required:
            raise ParseError(message=f"{kind.value} requires attribute {a.name}")
        else:
            attrs[a.name] = a.default  # type: ignore[assignment]
    return attrs


# --- shape rules -------------------------------------------------------------


def _require_f32(ctx: InferContext, *indices: int) -> None:
    for i in indices:
        if ctx.operands[i].dtype is not DType.F32:
            raise ctx.fail(f"operand {i} must be f32, got {ctx.operands[i].dtype.value}")


def broadcast_dims(ctx: InferContext, shapes: Sequence[Shape]) -> Shape:
    """Broadcast with unknown dims; unranked operands make the result unranked."""

    if any(not s.rank_known for s in shapes):
        return Shape.unranked()
    rank = max((len(s.dims) for s in shapes), default=0)
    out: list[Dim] = []
    for pos in range(rank):
        column: list[Dim] = []
        for s in shapes:
            offset = pos - (rank - len(s.dims))
            column.append(s.dims[offset] if offset >= 0 else 1)
        big = {d for d in column if d is not None and d != 1}
        if len(big) > 1:
            raise ctx.fail(f"cannot broadcast {' with '.join(str(s) for s in shapes)}")
        if big:
            out.append(big.pop())
        elif any(d is None for d in column):
            out.append(None)
        else:
            out.append(1)
    return Shape.of(*out)


def _dims_or_unknown(ctx: InferContext, index: int, rank: int) -> tuple[Dim, ...]:
    shape = ctx.operands[index].shape
    if not shape.rank_known:
        return (None,) * rank
    if len(shape.dims) != rank:
        raise ctx.fail(f"operand {index} must have rank {rank}, got {shape}")
    return shape.dims


def _same_or_fail(ctx: InferContext, a: Dim, b: Dim, what: str) -> None:
    if a is not None and b is not None and a != b:
        raise ctx.fail(f"{what} differ ({a} vs {b})")


def infer_elementwise(ctx: InferContext) -> TensorType:
    _require_f32(ctx, *range(len(ctx.operands)))
    return TensorType(DType.F32, broadcast_dims(ctx, [t.shape for t in ctx.operands]))


def infer_unary(ctx: InferContext) -> TensorType:
    _require_f32(ctx, 0)
    return ctx.operands[0]


def infer_identity(ctx: InferContext) -> TensorType:
    return ctx.operands[0]


def infer_matmul(ctx: InferContext) -> TensorType:
    _require_f32(ctx, 0, 1)
    m, k1 = _dims_or_unknown(ctx, 0, 2)
    k2, n = _dims_or_unknown(ctx, 1, 2)
    _same_or_fail(ctx, k1, k2, "inner dimensions")
    return TensorType(DType.F32, Shape.of(m, n))


def infer_gemm(ctx: InferContext) -> TensorType:
    _require_f32(ctx, 0, 1, 2)
    result = infer_matmul(ctx)
    c = ctx.operands[2].shape
    if c.rank_known:
        if len(c.dims) > 2:
            raise ctx.fail(f"C of shape {c} is not broadcastable to {result.shape}")
        for cd, od in zip(reversed(c.dims), reversed(result.shape.dims)):
            if cd is not None and od is not None and cd not in (1, od):
                raise ctx.fail(f"C of shape {c} is not broadcastable to {result.shape}")
    return result


def _window(ctx: InferContext, size: Dim, kernel: Dim, lo: int, hi: int, stride: int) -> Dim:
    if size is None or kernel is None:
        return None
    out = (size + lo + hi - kernel) // stride + 1
    if out < 1:
        raise ctx.fail(f"window of {kernel} does not fit input extent {size} with pads ({lo}, {hi})")
    return out


def _check_window_attrs(ctx: InferContext) -> tuple[tuple[int, ...], tuple[int, ...]]:
    strides = ctx.attributes["strides"]
    pads = ctx.attributes["pads"]
    assert isinstance(strides, tuple) and isinstance(pads, tuple)
    if len(strides) != 2 or any(s < 1 for s in strides):
        raise ctx.fail(f"strides must be two positive integers, got {list(strides)}")
    if len(pads) != 4 or any(p < 0 for p in pads):
        raise ctx.fail(f"pads must be four non-negative integers [top, left, bottom, right], got {list(pads)}")
    return strides, pads


def infer_conv(ctx: InferContext) -> TensorType:
    _require_f32(ctx, 0, 1)
    strides, pads = _check_window_attrs(ctx)
    n, c, h, w = _dims_or_unknown(ctx, 0, 4)
    co, ci, kh, kw = _dims_or_unknown(ctx, 1, 4)
    _same_or_fail(ctx, c, ci, "input channels")
    oh = _window(ctx, h, kh, pads[0], pads[2], strides[0])
    ow = _window(ctx, w, kw, pads[1], pads[3], strides[1])
    return TensorType(DType.F32, Shape.of(n, co, oh, ow))


def infer_max_pool(ctx: InferContext) -> TensorType:
    _require_f32(ctx, 0)
    strides, pads = _check_window_attrs(ctx)
    kernel = ctx.attributes["kernel_shape"]
    assert isinstance(kernel, tuple)
    if len(kernel) != 2 or any(k < 1 for k in kernel):
        raise ctx.fail(f"kernel_shape must be two positive integers, got {list(kernel)}")
    n, c, h, w = _dims_or_unknown(ctx, 0, 4)
    oh = _window(ctx, h, kernel[0], pads[0], pads[2], strides[0])
    ow = _window(ctx, w, kernel[1], pads[1], pads[3], strides[1])
    return TensorType(DType.F32, Shape.of(n, c, oh, ow))


def normalize_axes(axes: Sequence[int], rank: int) -> tuple[int, ...]:
    """Resolve negative axes; an empty list means every axis."""

    if not axes:
        return tuple(range(rank))
    resolved = []
    for a in axes:
        r = a + rank if a < 0 else a
        if not 0 <= r < rank:
            raise ShapeMismatch(message=f"axis {a} out of range for rank {rank}")
        resolved.append(r)
    if len(set(resolved)) != len(resolved):
        raise ShapeMismatch(message=f"duplicate axes {list(axes)}")
    return tuple(sorted(resolved))


def infer_reduce(ctx: InferContext) -> TensorType:
    _require_f32(ctx, 0)
    shape = ctx.operands[0].shape
    if not shape.rank_known:
        return TensorType(DType.F32, Shape.unranked())
    axes_attr = ctx.attributes["axes"]
    assert isinstance(axes_attr, tuple)
    try:
        axes = normalize_axes(axes_attr, len(shape.dims))
    except ShapeMismatch as exc:
        raise ctx.fail(exc.message) from exc
    keep = bool(ctx.attributes["keepdims"])
    dims: list[Dim] = []
    for i, d in enumerate(shape.dims):
        if i in axes:
            if keep:
                dims.append(1)
        else:
            dims.append(d)
    return TensorType(DType.F32, Shape.of(*dims))


def resolve_reshape(ctx: InferContext, data: Shape, target: Sequence[int]) -> Shape:
    if sum(1 for t in target if t == -1) > 1:
        raise ctx.fail(f"at most one -1 allowed in target shape {list(target)}")
    dims: list[Dim] = []
    for i, t in enumerate(target):
        if t < -1:
            raise ctx.fail(f"invalid target dimension {t}")
        if t == 0:
            if not data.rank_known:
                dims.append(None)
            elif i >= len(data.dims):
                raise ctx.fail(f"target dim {i} copies a dimension the input does not have")
            else:
                dims.append(data.dims[i])
        elif t == -1:
            dims.append(-1)
        else:
            dims.append(t)
    total = data.elem_count if data.is_static else None
    known = [d for d in dims if d is not None and d != -1]
    product = int(np.prod(known)) if known else 1
    if -1 in dims:
        if total is None or any(d is None for d in dims):
            dims = [None if d == -1 else d for d in dims]
        else:
            if product == 0 or total % product:
                raise ctx.fail(f"cannot reshape {data} into {list(target)}")
            dims = [total // product if d == -1 else d for d in dims]
    elif total is not None and all(d is not None for d in dims) and product != total:
        raise ctx.fail(f"cannot reshape {data} ({total} elements) into {list(target)}")
    return Shape.of(*dims)


def infer_reshape(ctx: InferContext) -> TensorType:
    data, target_type = ctx.operands
    if target_type.dtype is not DType.I64:
        raise ctx.fail("shape operand must be i64")
    target = ctx.constant_of(1)
    if target is None:
        ts = target_type.shape
        if ts.rank_known and len(ts.dims) == 1 and ts.dims[0] is not None:
            return TensorType(data.dtype, Shape.of(*([None] * ts.dims[0])))
        return TensorType(data.dtype, Shape.unranked())
    if len(target.shape.static_dims) != 1:
        raise ctx.fail(f"shape operand must be 1-D, got {target.shape}")
    return TensorType(data.dtype, resolve_reshape(ctx, data.shape, [int(v) for v in target.data]))


def infer_constant(ctx: InferContext) -> TensorType:
    value = ctx.attributes["value"]
    assert isinstance(value, TensorValue)
    return value.type


_REDUCE_ATTRS = (AttrSpec("axes", AttrKind.INTS, ()), AttrSpec("keepdims", AttrKind.INT, 1))
_WINDOW_ATTRS = (AttrSpec("strides", AttrKind.INTS, (1, 1)), AttrSpec("pads", AttrKind.INTS, (0, 0, 0, 0)))

REGISTRY: dict[OpKind, OpSpec] = {
    spec.kind: spec
    for spec in (
        OpSpec(OpKind.ADD, 2, (), infer_elementwise),
        OpSpec(OpKind.MUL, 2, (), infer_elementwise),
        OpSpec(OpKind.SUB, 2, (), infer_elementwise),
        OpSpec(OpKind.ABS, 1, (), infer_unary),
        OpSpec(OpKind.EXP, 1, (), infer_unary),
        OpSpec(OpKind.RELU, 1, (), infer_unary),
        OpSpec(OpKind.LEAKY_RELU, 1, (AttrSpec("alpha", AttrKind.FLOAT, to_f32(0.01)),), infer_unary),
        OpSpec(OpKind.MATMUL, 2, (), infer_matmul),
        OpSpec(
            OpKind.GEMM,
            3,
            (AttrSpec("alpha", AttrKind.FLOAT, 1.0), AttrSpec("beta", AttrKind.FLOAT, 1.0)),
            infer_gemm,
        ),
        OpSpec(OpKind.CONV, 2, _WINDOW_ATTRS, infer_conv),
        OpSpec(OpKind.MAX_POOL, 1, (AttrSpec("kernel_shape", AttrKind.INTS),) + _WINDOW_ATTRS, infer_max_pool),
        OpSpec(OpKind.REDUCE_SUM, 1, _REDUCE_ATTRS, infer_reduce),
        OpSpec(OpKind.REDUCE_L1, 1, _REDUCE_ATTRS, infer_reduce),
        OpSpec(OpKind.RESHAPE, 2, (), infer_reshape),
        OpSpec(OpKind.IDENTITY, 1, (), infer_identity),
        OpSpec(OpKind.CONSTANT, 0, (AttrSpec("value", AttrKind.TENSOR),), infer_constant),
    )
}


def infer_result_type(
    kind: OpKind,
    operands: Sequence[TensorType],
    attributes: Mapping[str, AttributeValue],
    constant_of: Callable[[int], TensorValue | None] = lambda _i: None,
) -> TensorType:
    spec = REGISTRY[kind]
    return spec.infer(InferContext(kind, operands, attributes, constant_of))
