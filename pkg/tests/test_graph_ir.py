from __future__ import annotations

import numpy as np
import pytest

from helpers import random_f32
from loomc.models.graph import EntryPointDescriptor, GraphFunction, GraphModule, GraphOp, GraphValue, OpKind, op_stats
from loomc.models.tensor import DType, Shape, TensorType, TensorValue
from loomc.services.graph_builder import GraphBuilder
from loomc.services.graph_printer import print_graph
from loomc.services.model_zoo import add_model, f32, leaky_relu_model, matmul_model, mnist_small
from loomc.services.reference_evaluator import reference_eval
from loomc.services.verifier import verify


def _kinds(module: GraphModule) -> list[str]:
    return [d.kind for d in verify(module)]


def test_verify_accepts_add_model():
    assert verify(add_model()) == []


def test_verify_accepts_mnist_small():
    assert verify(mnist_small()) == []


def test_verify_reports_missing_entry_function():
    module = add_model()
    module.entry_point = EntryPointDescriptor("other", 2, 1)
    assert "MissingEntryFunction" in _kinds(module)


def test_verify_reports_use_before_definition():
    module = add_model()
    fn = module.main
    x = fn.inputs[0]
    later = GraphValue("later", x.type)
    fn.ops = [
        GraphOp(OpKind.ABS, [later], [GraphValue("first", x.type)]),
        GraphOp(OpKind.ABS, [x], [later]),
    ] + fn.ops
    diagnostics = verify(module)
    assert [(d.kind, d.op_index) for d in diagnostics] == [("SSADominanceViolation", 0)]


def test_verify_reports_undefined_value():
    module = add_model()
    ghost = GraphValue("ghost", f32(3, 4, 5))
    module.main.ops[0].operands[1] = ghost
    assert _kinds(module) == ["UndefinedValue"]


def test_verify_reports_operand_count_and_attributes():
    module = add_model()
    op = module.main.ops[0]
    op.operands = op.operands[:1]
    op.attributes["alpha"] = 1.0
    assert sorted(_kinds(module)) == ["OperandCountMismatch", "UnknownAttribute"]


def test_verify_reports_entry_arity():
    module = add_model()
    module.entry_point = EntryPointDescriptor("main_graph", 1, 1)
    assert _kinds(module) == ["EntryArityMismatch"]


def test_print_add_model_matches_golden(golden):
    assert print_graph(add_model()) == golden("add.graph.mlir")


def test_print_is_independent_of_value_names():
    renamed = add_model()
    for value in renamed.main.values():
        value.name = value.name.upper() + "_renamed"
    assert print_graph(renamed) == print_graph(add_model())


def test_print_empty_passthrough_function():
    x = GraphValue("x", f32(2))
    module = GraphModule([GraphFunction("main_graph", [x], [], [x])], EntryPointDescriptor("main_graph", 1, 1))
    assert verify(module) == []
    assert print_graph(module) == (
        "module {\n"
        "  func @main_graph(%arg0: tensor<2xf32>) -> tensor<2xf32> {\n"
        "    std.return %arg0 : tensor<2xf32>\n"
        "  }\n"
        '  "onnx.EntryPoint"() {func = @main_graph, numInputs = 1 : i32, numOutputs = 1 : i32} : () -> ()\n'
        "}\n"
    )


def test_print_float_attribute():
    text = print_graph(leaky_relu_model(alpha=0.1))
    assert '"onnx.LeakyRelu"(%arg0) {alpha = 0.1} : (tensor<3xf32>) -> tensor<3xf32>' in text


def test_print_dense_constant():
    builder = GraphBuilder()
    x = builder.add_input("x", f32(2))
    c = builder.constant(TensorValue.from_array(np.asarray([1.5, -2.0], dtype=np.float32)))
    module = builder.build([builder.op(OpKind.ADD, [x, c])])
    assert '{value = dense<[1.5, -2.0]> : tensor<2xf32>} : () -> tensor<2xf32>' in print_graph(module)


def test_result_types_are_inferred():
    builder = GraphBuilder()
    a = builder.add_input("a", f32(2, 1, 4))
    b = builder.add_input("b", f32(3, 4))
    assert builder.op(OpKind.ADD, [a, b]).type == f32(2, 3, 4)
    m = builder.add_input("m", TensorType(DType.F32, Shape.of(None, 6)))
    w = builder.add_input("w", f32(6, 4))
    assert builder.op(OpKind.MATMUL, [m, w]).type == TensorType(DType.F32, Shape.of(None, 4))


def test_reference_eval_add():
    x = TensorValue.from_array(np.ones((3, 4, 5), dtype=np.float32))
    y = TensorValue.from_array(np.full((3, 4, 5), 2.0, dtype=np.float32))
    (out,) = reference_eval(add_model(), [x, y])
    np.testing.assert_array_equal(out.to_array(), np.full((3, 4, 5), 3.0, dtype=np.float32))


def test_reference_eval_leaky_relu():
    (out,) = reference_eval(leaky_relu_model(), [TensorValue.from_array(np.asarray([-10.0, 0.0, 10.0], np.float32))])
    np.testing.assert_array_equal(out.data, np.asarray([-1.0, 0.0, 10.0], dtype=np.float32))


def test_reference_eval_matmul(rng):
    a, b = random_f32(rng, 4, 6), random_f32(rng, 6, 4)
    (out,) = reference_eval(matmul_model(), [a, b])
    np.testing.assert_allclose(out.to_array(), a.to_array() @ b.to_array(), rtol=1e-5, atol=1e-5)


def test_reduce_l1_matches_reduce_sum_of_abs(rng):
    def model(kind_chain: list[OpKind]) -> GraphModule:
        builder = GraphBuilder()
        value = builder.add_input("x", f32(3, 4))
        for kind in kind_chain:
            attrs = {"axes": [1], "keepdims": 0} if kind is not OpKind.ABS else None
            value = builder.op(kind, [value], attrs)
        return builder.build([value])

    l1 = model([OpKind.REDUCE_L1])
    sum_abs = model([OpKind.ABS, OpKind.REDUCE_SUM])
    for _ in range(100):
        x = random_f32(rng, 3, 4)
        assert reference_eval(l1, [x]) == reference_eval(sum_abs, [x])


def test_reduce_sum_empty_axes_reduces_everything():
    builder = GraphBuilder()
    x = builder.add_input("x", f32(2, 3))
    module = builder.build([builder.op(OpKind.REDUCE_SUM, [x], {"axes": [], "keepdims": 1})])
    (out,) = reference_eval(module, [TensorValue.from_array(np.arange(6, dtype=np.float32).reshape(2, 3))])
    assert out.shape == Shape.of(1, 1)
    assert out.data.tolist() == [15.0]


def test_mnist_small_shape():
    module = mnist_small()
    image = TensorValue.from_array(np.zeros((1, 1, 28, 28), dtype=np.float32))
    (logits,) = reference_eval(module, [image])
    assert logits.shape == Shape.of(1, 10)


def test_op_stats_counts_entry_ops():
    assert op_stats(mnist_small()) == {
        "Add": 1,
        "Constant": 4,
        "Conv": 1,
        "MatMul": 1,
        "MaxPool": 1,
        "Relu": 1,
        "Reshape": 1,
    }


def test_clone_is_structurally_equal_but_distinct():
    module = mnist_small()
    copy = module.clone()
    assert copy.structurally_equal(module)
    assert copy.main.inputs[0] is not module.main.inputs[0]
    copy.main.ops.pop()
    assert not copy.structurally_equal(module)


@pytest.mark.parametrize("builder_fn", [add_model, leaky_relu_model, matmul_model])
def test_built_models_declare_entry_arity(builder_fn):
    module = builder_fn()
    assert module.entry_point.num_inputs == len(module.main.inputs)
    assert module.entry_point.num_outputs == 1
