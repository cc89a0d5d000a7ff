"""Direct numpy evaluation of graph modules.

This is the oracle the lowering is checked against. Every kernel evaluates in
float32 and accumulates in the order the generated loop nests use (reductions
run ci, kh, kw / k / reduced axes in row-major order), so the two agree
bit-for-bit.
"""

from __future__ import annotations

import logging
from typing import Callable, Mapping, Sequence

import numpy as np

from loomc.errors import ArityMismatch, TypeMismatch, UnsupportedOp
from loomc.models.graph import AttributeValue, GraphModule, GraphOp, GraphValue, OpKind
from loomc.models.tensor import DType, Shape, TensorType, TensorValue
from loomc.services.op_registry import normalize_axes

logger = logging.getLogger(__name__)

F32 = np.float32
Kernel = Callable[[Sequence[np.ndarray], Mapping[str, AttributeValue]], np.ndarray]


def check_entry_inputs(expected: Sequence[TensorType], inputs: Sequence[TensorValue]) -> None:
    """Raise when `inputs` do not match the entry signature."""

    if len(inputs) != len(expected):
        raise ArityMismatch(
            message=f"entry point expects {len(expected)} input(s), got {len(inputs)}",
            details={"expected": len(expected), "actual": len(inputs)},
        )
    for i, (type_, value) in enumerate(zip(expected, inputs)):
        if value.dtype is not type_.dtype:
            raise TypeMismatch(message=f"input {i}: expected {type_}, got {value.type}")
        if type_.shape.rank_known:
            dims = value.shape.static_dims
            ok = len(dims) == len(type_.shape.dims) and all(
                d is None or d == v for d, v in zip(type_.shape.dims, dims)
            )
            if not ok:
                raise TypeMismatch(message=f"input {i}: expected {type_}, got {value.type}")


def max_f32(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """`a >= b ? a : b`, the select form the loop level uses for maxf."""

    return np.where(a >= b, a, b).astype(F32)


def _elementwise(fn: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> Kernel:
    def kernel(args: Sequence[np.ndarray], _attrs: Mapping[str, AttributeValue]) -> np.ndarray:
        return fn(args[0], args[1]).astype(F32)

    return kernel


def _abs(args: Sequence[np.ndarray], _attrs: Mapping[str, AttributeValue]) -> np.ndarray:
    return np.abs(args[0])


def _exp(args: Sequence[np.ndarray], _attrs: Mapping[str, AttributeValue]) -> np.ndarray:
    return np.exp(args[0]).astype(F32)


def _relu(args: Sequence[np.ndarray], _attrs: Mapping[str, AttributeValue]) -> np.ndarray:
    x = args[0]
    return np.where(x >= F32(0), x, F32(0)).astype(F32)


def _leaky_relu(args: Sequence[np.ndarray], attrs: Mapping[str, AttributeValue]) -> np.ndarray:
    x = args[0]
    alpha = F32(attrs["alpha"])
    return np.where(x >= F32(0), x, x * alpha).astype(F32)


def _matmul_acc(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    acc = np.zeros((a.shape[0], b.shape[1]), dtype=F32)
    for k in range(a.shape[1]):
        acc = acc + a[:, k : k + 1] * b[k : k + 1, :]
    return acc


def _matmul(args: Sequence[np.ndarray], _attrs: Mapping[str, AttributeValue]) -> np.ndarray:
    return _matmul_acc(args[0], args[1])


def _gemm(args: Sequence[np.ndarray], attrs: Mapping[str, AttributeValue]) -> np.ndarray:
    acc = _matmul_acc(args[0], args[1])
    c = np.broadcast_to(args[2], acc.shape)
    return (acc * F32(attrs["alpha"]) + c * F32(attrs["beta"])).astype(F32)


def _window_positions(out: int, size: int, kernel_index: int, pad: int, stride: int) -> tuple[np.ndarray, np.ndarray]:
    """Input coordinate of each output position for one kernel tap, plus validity."""

    coords = np.arange(out) * stride - pad + kernel_index
    valid = (coords >= 0) & (coords < size)
    return np.clip(coords, 0, max(size - 1, 0)), valid


def _conv(args: Sequence[np.ndarray], attrs: Mapping[str, AttributeValue]) -> np.ndarray:
    x, w = args
    sh, sw = attrs["strides"]  # type: ignore[misc]
    pt, pl, pb, pr = attrs["pads"]  # type: ignore[misc]
    n, c, h, wd = x.shape
    co, _ci, kh, kw = w.shape
    oh = (h + pt + pb - kh) // sh + 1
    ow = (wd + pl + pr - kw) // sw + 1
    acc = np.zeros((n, co, oh, ow), dtype=F32)
    for ci in range(c):
        for i in range(kh):
            rows, rvalid = _window_positions(oh, h, i, pt, sh)
            for j in range(kw):
                cols, cvalid = _window_positions(ow, wd, j, pl, sw)
                valid = rvalid[:, None] & cvalid[None, :]
                patch = x[:, ci][:, rows][:, :, cols]  # n, oh, ow
                term = patch[:, None, :, :] * w[:, ci, i, j][None, :, None, None]
                acc = np.where(valid[None, None], acc + term, acc).astype(F32)
    return acc


def _max_pool(args: Sequence[np.ndarray], attrs: Mapping[str, AttributeValue]) -> np.ndarray:
    x = args[0]
    kh, kw = attrs["kernel_shape"]  # type: ignore[misc]
    sh, sw = attrs["strides"]  # type: ignore[misc]
    pt, pl, pb, pr = attrs["pads"]  # type: ignore[misc]
    n, c, h, wd = x.shape
    oh = (h + pt + pb - kh) // sh + 1
    ow = (wd + pl + pr - kw) // sw + 1
    acc = np.full((n, c, oh, ow), -np.inf, dtype=F32)
    for i in range(kh):
        rows, rvalid = _window_positions(oh, h, i, pt, sh)
        for j in range(kw):
            cols, cvalid = _window_positions(ow, wd, j, pl, sw)
            valid = rvalid[:, None] & cvalid[None, :]
            patch = x[:, :, rows][:, :, :, cols]
            acc = np.where(valid[None, None], max_f32(acc, patch), acc).astype(F32)
    return acc


def _reduce_sum(args: Sequence[np.ndarray], attrs: Mapping[str, AttributeValue]) -> np.ndarray:
    x = args[0]
    axes = normalize_axes(attrs["axes"], x.ndim)  # type: ignore[arg-type]
    kept = [a for a in range(x.ndim) if a not in axes]
    moved = np.transpose(x, kept + list(axes))
    kept_shape = moved.shape[: len(kept)]
    flat = moved.reshape(kept_shape + (-1,)) if axes else moved.reshape(kept_shape + (1,))
    acc = np.zeros(kept_shape, dtype=F32)
    for r in range(flat.shape[-1]):
        acc = (acc + flat[..., r]).astype(F32)
    if attrs["keepdims"]:
        return acc.reshape([1 if a in axes else x.shape[a] for a in range(x.ndim)])
    return acc


def _reduce_l1(args: Sequence[np.ndarray], attrs: Mapping[str, AttributeValue]) -> np.ndarray:
    return _reduce_sum([np.abs(args[0])], attrs)


def _reshape(args: Sequence[np.ndarray], _attrs: Mapping[str, AttributeValue]) -> np.ndarray:
    x, target = args
    dims = [x.shape[i] if int(t) == 0 else int(t) for i, t in enumerate(target)]
    return x.reshape(dims).copy()


def _identity(args: Sequence[np.ndarray], _attrs: Mapping[str, AttributeValue]) -> np.ndarray:
    return args[0].copy()


def _constant(_args: Sequence[np.ndarray], attrs: Mapping[str, AttributeValue]) -> np.ndarray:
    value = attrs["value"]
    assert isinstance(value, TensorValue)
    return value.to_array().copy()


KERNELS: dict[OpKind, Kernel] = {
    OpKind.ADD: _elementwise(np.add),
    OpKind.MUL: _elementwise(np.multiply),
    OpKind.SUB: _elementwise(np.subtract),
    OpKind.ABS: _abs,
    OpKind.EXP: _exp,
    OpKind.RELU: _relu,
    OpKind.LEAKY_RELU: _leaky_relu,
    OpKind.MATMUL: _matmul,
    OpKind.GEMM: _gemm,
    OpKind.CONV: _conv,
    OpKind.MAX_POOL: _max_pool,
    OpKind.REDUCE_SUM: _reduce_sum,
    OpKind.REDUCE_L1: _reduce_l1,
    OpKind.RESHAPE: _reshape,
    OpKind.IDENTITY: _identity,
    OpKind.CONSTANT: _constant,
}


def evaluate_op(op: GraphOp, operands: Sequence[TensorValue]) -> TensorValue:
    """Evaluate a single op on concrete operands."""

    kernel = KERNELS.get(op.kind)
    if kernel is None:
        raise UnsupportedOp(message=f"no evaluator for {op.kind}", details={"op": str(op.kind)})
    with np.errstate(all="ignore"):
        out = kernel([v.to_array() for v in operands], op.attributes)
    dtype = op.result.type.dtype if op.kind is not OpKind.CONSTANT else DType.from_numpy(out.dtype)
    return TensorValue(dtype, Shape.of(*out.shape), np.asarray(out, dtype=dtype.numpy))


def reference_eval(module: GraphModule, inputs: Sequence[TensorValue]) -> list[TensorValue]:
    """Run the entry function op by op on concrete inputs."""

    fn = module.main
    check_entry_inputs([v.type for v in fn.inputs], inputs)
    env: dict[GraphValue, TensorValue] = dict(zip(fn.inputs, inputs))
    for op in fn.ops:
        env[op.result] = evaluate_op(op, [env[v] for v in op.operands])
    logger.debug("reference_eval ran %d op(s)", len(fn.ops))
    return [env[v] for v in fn.results]
