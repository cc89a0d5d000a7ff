"""Small built-in models used by the bundled examples and the test-suite."""

from __future__ import annotations

import numpy as np

from loomc.models.graph import GraphModule, OpKind
from loomc.models.tensor import DType, Shape, TensorType, TensorValue
from loomc.services.graph_builder import GraphBuilder


def f32(*dims: int) -> TensorType:
    return TensorType(DType.F32, Shape.of(*dims))


def add_model(dims: tuple[int, ...] = (3, 4, 5)) -> GraphModule:
    builder = GraphBuilder()
    x = builder.add_input("x", f32(*dims))
    y = builder.add_input("y", f32(*dims))
    return builder.build([builder.op(OpKind.ADD, [x, y], name="sum")])


def leaky_relu_model(alpha: float = 0.1, dims: tuple[int, ...] = (3,)) -> GraphModule:
    builder = GraphBuilder()
    x = builder.add_input("x", f32(*dims))
    return builder.build([builder.op(OpKind.LEAKY_RELU, [x], {"alpha": alpha}, name="y")])


def matmul_model(m: int = 4, k: int = 6, n: int = 4) -> GraphModule:
    builder = GraphBuilder()
    a = builder.add_input("a", f32(m, k))
    b = builder.add_input("b", f32(k, n))
    return builder.build([builder.op(OpKind.MATMUL, [a, b], name="product")])


def pattern_weights(dims: tuple[int, ...], salt: int, scale: float, seed: int = 0) -> TensorValue:
    """Deterministic weights: integers in [-8, 8] cycling with period 17, times a power-of-two `scale`.

    Every value is exact in f32, so the payloads under models/ can be produced without numpy.
    """

    k = np.arange(int(np.prod(dims)), dtype=np.int64)
    ints = (k * 37 + salt * 53 + seed * 101 + 11) % 17 - 8
    return TensorValue.from_array((ints * scale).astype(np.float32).reshape(dims))


def mnist_small(seed: int = 0) -> GraphModule:
    """Conv(1->2, 3x3, pad 1) -> Relu -> MaxPool 2x2 -> Reshape -> MatMul -> Add, 1x1x28x28 -> 1x10."""

    builder = GraphBuilder()
    image = builder.add_input("image", f32(1, 1, 28, 28))
    kernel = builder.constant(pattern_weights((2, 1, 3, 3), 0, 1 / 16, seed), name="conv_w")
    conv = builder.op(OpKind.CONV, [image, kernel], {"strides": [1, 1], "pads": [1, 1, 1, 1]}, name="conv")
    relu = builder.op(OpKind.RELU, [conv], name="relu")
    pool = builder.op(
        OpKind.MAX_POOL,
        [relu],
        {"kernel_shape": [2, 2], "strides": [2, 2], "pads": [0, 0, 0, 0]},
        name="pool",
    )
    shape = builder.constant(TensorValue.from_array(np.asarray([1, 2 * 14 * 14], dtype=np.int64)), name="flat_shape")
    flat = builder.op(OpKind.RESHAPE, [pool, shape], name="flat")
    weights = builder.constant(pattern_weights((2 * 14 * 14, 10), 1, 1 / 128, seed), name="fc_w")
    bias = builder.constant(pattern_weights((10,), 2, 1 / 64, seed), name="fc_b")
    logits = builder.op(OpKind.ADD, [builder.op(OpKind.MATMUL, [flat, weights], name="fc"), bias], name="logits")
    return builder.build([logits])


ZOO = {
    "add": add_model,
    "leaky_relu": leaky_relu_model,
    "matmul": matmul_model,
    "mnist_small": mnist_small,
}
