"""Compiled programs against the graph-level reference evaluator, op by op."""

from __future__ import annotations

from typing import Callable

import numpy as np
import pytest

from helpers import random_f32
from loomc.config import DebugConfig
from loomc.models.graph import GraphModule, OpKind
from loomc.models.tensor import TensorType, TensorValue
from loomc.services.affine_interpreter import interpret
from loomc.services.graph_builder import GraphBuilder
from loomc.services.model_zoo import f32, mnist_small
from loomc.services.pipeline import CompileOptions, max_abs_diff
from loomc.services.reference_evaluator import reference_eval

TRIALS = 12

Case = Callable[[np.random.Generator], GraphModule]


def _unary(kind: OpKind, dims: tuple[int, ...], **attrs: object) -> Case:
    def build(rng: np.random.Generator) -> GraphModule:
        builder = GraphBuilder()
        x = builder.add_input("x", f32(*dims))
        return builder.build([builder.op(kind, [x], attrs or None)])

    return build


def _binary(kind: OpKind, lhs: tuple[int, ...], rhs: tuple[int, ...]) -> Case:
    def build(rng: np.random.Generator) -> GraphModule:
        builder = GraphBuilder()
        x = builder.add_input("x", f32(*lhs))
        y = builder.add_input("y", f32(*rhs))
        return builder.build([builder.op(kind, [x, y])])

    return build


def _gemm(rng: np.random.Generator) -> GraphModule:
    builder = GraphBuilder()
    a = builder.add_input("a", f32(3, 5))
    b = builder.add_input("b", f32(5, 4))
    c = builder.add_input("c", f32(4))
    return builder.build([builder.op(OpKind.GEMM, [a, b, c], {"alpha": 0.5, "beta": 2.0})])


def _conv(strides: tuple[int, int], pads: tuple[int, int, int, int]) -> Case:
    def build(rng: np.random.Generator) -> GraphModule:
        builder = GraphBuilder()
        x = builder.add_input("x", f32(1, 2, 7, 6))
        w = builder.constant(TensorValue.from_array(rng.normal(0.0, 1.0, (3, 2, 3, 2)).astype(np.float32)))
        return builder.build([builder.op(OpKind.CONV, [x, w], {"strides": list(strides), "pads": list(pads)})])

    return build


def _max_pool(pads: tuple[int, int, int, int]) -> Case:
    def build(rng: np.random.Generator) -> GraphModule:
        builder = GraphBuilder()
        x = builder.add_input("x", f32(1, 2, 6, 5))
        attrs = {"kernel_shape": [3, 2], "strides": [2, 1], "pads": list(pads)}
        return builder.build([builder.op(OpKind.MAX_POOL, [x], attrs)])

    return build


def _reshape(rng: np.random.Generator) -> GraphModule:
    builder = GraphBuilder()
    x = builder.add_input("x", f32(2, 3, 4))
    shape = builder.constant(TensorValue.from_array(np.asarray([4, 0, -1], dtype=np.int64)))
    return builder.build([builder.op(OpKind.ABS, [builder.op(OpKind.RESHAPE, [x, shape])])])


def _constant_bias(rng: np.random.Generator) -> GraphModule:
    builder = GraphBuilder()
    x = builder.add_input("x", f32(3, 4))
    left = builder.constant(TensorValue.from_array(rng.normal(size=(4,)).astype(np.float32)))
    right = builder.constant(TensorValue.from_array(rng.normal(size=(4,)).astype(np.float32)))
    bias = builder.op(OpKind.MUL, [left, right])
    return builder.build([builder.op(OpKind.ADD, [builder.op(OpKind.IDENTITY, [x]), bias])])


CASES: dict[str, Case] = {
    "add": _binary(OpKind.ADD, (3, 4), (3, 4)),
    "add-broadcast": _binary(OpKind.ADD, (2, 1, 4), (3, 1)),
    "sub-broadcast": _binary(OpKind.SUB, (4,), (3, 4)),
    "mul-column": _binary(OpKind.MUL, (3, 4), (3, 1)),
    "abs": _unary(OpKind.ABS, (5, 2)),
    "exp": _unary(OpKind.EXP, (7,)),
    "relu": _unary(OpKind.RELU, (2, 3, 2)),
    "leaky-relu": _unary(OpKind.LEAKY_RELU, (6,), alpha=0.25),
    "identity": _unary(OpKind.IDENTITY, (4, 2)),
    "matmul": _binary(OpKind.MATMUL, (3, 5), (5, 2)),
    "gemm": _gemm,
    "conv": _conv((1, 1), (0, 0, 0, 0)),
    "conv-padded-strided": _conv((2, 1), (1, 0, 2, 1)),
    "max-pool": _max_pool((0, 0, 0, 0)),
    "max-pool-padded": _max_pool((1, 1, 0, 1)),
    "reduce-sum": _unary(OpKind.REDUCE_SUM, (3, 4, 2), axes=[1]),
    "reduce-sum-all": _unary(OpKind.REDUCE_SUM, (3, 4)),
    "reduce-sum-flat": _unary(OpKind.REDUCE_SUM, (3, 4, 2), axes=[0, -1], keepdims=0),
    "reduce-l1": _unary(OpKind.REDUCE_L1, (4, 3), axes=[-1]),
    "reshape": _reshape,
    "folded-constants": _constant_bias,
}


def _random_inputs(rng: np.random.Generator, types: list[TensorType]) -> list[TensorValue]:
    return [random_f32(rng, *t.shape.static_dims) for t in types]


def _assert_matches(actual: list[TensorValue], expected: list[TensorValue]) -> None:
    assert [a.type for a in actual] == [e.type for e in expected]
    scale = max((float(np.max(np.abs(e.data))) for e in expected if e.data.size), default=0.0)
    assert max_abs_diff(actual, expected) <= 1e-5 * (1.0 + scale)


@pytest.mark.parametrize("name", sorted(CASES))
def test_compiled_program_matches_reference(name, compile_program):
    rng = np.random.default_rng(sum(map(ord, name)))
    module = CASES[name](rng)
    program = compile_program(module)
    types = [v.type for v in module.main.inputs]
    for _ in range(TRIALS):
        inputs = _random_inputs(rng, types)
        _assert_matches(interpret(program, inputs, DebugConfig()), reference_eval(module, inputs))


@pytest.mark.parametrize(
    "name, tiles",
    [
        ("add", ((OpKind.ADD, 3),)),
        ("matmul", ((OpKind.MATMUL, 2),)),
        ("conv-padded-strided", ((OpKind.CONV, 2),)),
        ("max-pool-padded", ((OpKind.MAX_POOL, 4),)),
        ("reduce-sum", ((OpKind.REDUCE_SUM, 2),)),
    ],
)
def test_tiled_program_matches_reference(name, tiles, compile_program):
    rng = np.random.default_rng(7)
    module = CASES[name](rng)
    program = compile_program(module, CompileOptions(tiles=tiles))
    types = [v.type for v in module.main.inputs]
    for _ in range(TRIALS):
        inputs = _random_inputs(rng, types)
        _assert_matches(interpret(program, inputs, DebugConfig()), reference_eval(module, inputs))


def test_passes_off_still_match_reference(compile_program):
    rng = np.random.default_rng(11)
    module = mnist_small(seed=3)
    options = CompileOptions(rewrite=False, constprop=False)
    program = compile_program(module, options)
    inputs = [random_f32(rng, 1, 1, 28, 28, low=0.0, high=1.0)]
    _assert_matches(interpret(program, inputs, DebugConfig()), reference_eval(module, inputs))


def test_mnist_matches_reference(compile_program):
    rng = np.random.default_rng(5)
    module = mnist_small()
    program = compile_program(module)
    for _ in range(3):
        inputs = [random_f32(rng, 1, 1, 28, 28, low=0.0, high=1.0)]
        (out,) = interpret(program, inputs, DebugConfig())
        (ref,) = reference_eval(module, inputs)
        assert out.type == ref.type
        _assert_matches([out], [ref])


@pytest.mark.parametrize(
    "kind, attrs, expected",
    [
        (OpKind.RELU, None, [0.0, -0.0, 0.0, 0.0, 3.0]),
        (OpKind.LEAKY_RELU, {"alpha": 0.5}, [np.nan, -0.0, -1.0, 0.0, 3.0]),
    ],
    ids=["relu", "leaky-relu"],
)
def test_nan_and_signed_zero_through_relu(kind, attrs, expected, compile_program):
    builder = GraphBuilder()
    x = builder.add_input("x", f32(5))
    module = builder.build([builder.op(kind, [x], attrs)])
    inputs = [TensorValue.from_array(np.array([np.nan, -0.0, -2.0, 0.0, 3.0], dtype=np.float32))]

    (out,) = interpret(compile_program(module), inputs, DebugConfig())
    (ref,) = reference_eval(module, inputs)

    want = np.array(expected, dtype=np.float32)
    for got in (out.to_array(), ref.to_array()):
        np.testing.assert_array_equal(got, want)
        np.testing.assert_array_equal(np.signbit(got), np.signbit(want))


# --- random shapes, one fresh graph per instance ---------------------------------

INSTANCES = 100

# results of these kinds are compared bit for bit, the rest within tolerance
EXACT_KINDS = {
    OpKind.ADD,
    OpKind.SUB,
    OpKind.MUL,
    OpKind.ABS,
    OpKind.RELU,
    OpKind.LEAKY_RELU,
    OpKind.IDENTITY,
    OpKind.RESHAPE,
    OpKind.MAX_POOL,
    OpKind.CONSTANT,
}


def _dims(rng: np.random.Generator, low_rank: int = 1, high_rank: int = 3, high: int = 5) -> tuple[int, ...]:
    return tuple(int(d) for d in rng.integers(1, high + 1, int(rng.integers(low_rank, high_rank + 1))))


def _broadcast_partner(rng: np.random.Generator, dims: tuple[int, ...]) -> tuple[int, ...]:
    suffix = dims[len(dims) - int(rng.integers(1, len(dims) + 1)) :]
    return tuple(1 if rng.random() < 0.3 else d for d in suffix)


def _random_graph(kind: OpKind, rng: np.random.Generator) -> GraphModule:
    builder = GraphBuilder()
    if kind in (OpKind.ADD, OpKind.SUB, OpKind.MUL):
        dims = _dims(rng)
        lhs, rhs = (dims, _broadcast_partner(rng, dims))
        if rng.random() < 0.5:
            lhs, rhs = rhs, lhs
        x = builder.add_input("x", f32(*lhs))
        y = builder.add_input("y", f32(*rhs))
        return builder.build([builder.op(kind, [x, y])])
    if kind in (OpKind.ABS, OpKind.EXP, OpKind.RELU, OpKind.IDENTITY):
        x = builder.add_input("x", f32(*_dims(rng)))
        return builder.build([builder.op(kind, [x])])
    if kind is OpKind.LEAKY_RELU:
        x = builder.add_input("x", f32(*_dims(rng)))
        alpha = float(rng.choice([0.01, 0.125, 0.5, 2.0]))
        return builder.build([builder.op(kind, [x], {"alpha": alpha})])
    if kind in (OpKind.MATMUL, OpKind.GEMM):
        m, k, n = (int(v) for v in rng.integers(1, 9, 3))
        a = builder.add_input("a", f32(m, k))
        b = builder.add_input("b", f32(k, n))
        if kind is OpKind.MATMUL:
            return builder.build([builder.op(kind, [a, b])])
        c_dims = [(n,), (m, n), (1, n), (m, 1)][int(rng.integers(0, 4))]
        c = builder.add_input("c", f32(*c_dims))
        attrs = {"alpha": float(rng.choice([1.0, 0.5, -2.0])), "beta": float(rng.choice([1.0, 0.25]))}
        return builder.build([builder.op(kind, [a, b, c], attrs)])
    if kind in (OpKind.CONV, OpKind.MAX_POOL):
        channels = int(rng.integers(1, 3))
        h, w = (int(v) for v in rng.integers(3, 7, 2))
        kh, kw = (int(v) for v in rng.integers(1, 4, 2))
        attrs = {
            "strides": [int(v) for v in rng.integers(1, 3, 2)],
            "pads": [int(v) for v in rng.integers(0, 2, 4)],
        }
        x = builder.add_input("x", f32(1, channels, h, w))
        if kind is OpKind.MAX_POOL:
            return builder.build([builder.op(kind, [x], {"kernel_shape": [kh, kw], **attrs})])
        weights = rng.normal(0.0, 1.0, (int(rng.integers(1, 4)), channels, kh, kw)).astype(np.float32)
        kernel = builder.constant(TensorValue.from_array(weights))
        return builder.build([builder.op(kind, [x, kernel], attrs)])
    if kind in (OpKind.REDUCE_SUM, OpKind.REDUCE_L1):
        dims = _dims(rng)
        axes = [a for a in range(len(dims)) if rng.random() < 0.5]
        attrs = {"axes": [a - len(dims) if rng.random() < 0.5 else a for a in axes], "keepdims": int(rng.integers(0, 2))}
        x = builder.add_input("x", f32(*dims))
        return builder.build([builder.op(kind, [x], attrs)])
    if kind is OpKind.RESHAPE:
        dims = _dims(rng)
        target = list(reversed(dims))
        target[int(rng.integers(0, len(target)))] = -1
        x = builder.add_input("x", f32(*dims))
        shape = builder.constant(TensorValue.from_array(np.asarray(target, dtype=np.int64)))
        return builder.build([builder.op(kind, [x, shape])])
    assert kind is OpKind.CONSTANT
    dims = _dims(rng)
    x = builder.add_input("x", f32(*dims))
    constant = builder.constant(TensorValue.from_array(rng.normal(size=dims).astype(np.float32)))
    return builder.build([builder.op(OpKind.SUB, [x, constant])])


@pytest.mark.parametrize("kind", list(OpKind), ids=lambda k: k.value)
def test_random_instances_match_reference(kind, compile_program):
    rng = np.random.default_rng(sum(map(ord, kind.value)))
    for _ in range(INSTANCES):
        module = _random_graph(kind, rng)
        program = compile_program(module)
        inputs = _random_inputs(rng, [v.type for v in module.main.inputs])
        actual = interpret(program, inputs, DebugConfig())
        expected = reference_eval(module, inputs)
        if kind in EXACT_KINDS:
            assert actual == expected
        else:
            _assert_matches(actual, expected)
