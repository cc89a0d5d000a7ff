from __future__ import annotations

import numpy as np
import pytest

from helpers import random_f32, small_ints_f32
from loomc.errors import DynamicShapeUnsupported, UnloweredOp
from loomc.models.graph import OpKind
from loomc.models.loop_ir import BufferRole, ScalarKind
from loomc.models.tensor import DType, Shape, TensorType, TensorValue
from loomc.services.affine_interpreter import interpret
from loomc.services.affine_printer import emit_affine_text
from loomc.services.graph_builder import GraphBuilder
from loomc.services.loop_printer import print_loop_module
from loomc.services.lowering.graph_to_loops import lower_graph_to_loops
from loomc.services.lowering.loops_to_affine import lower_loops_to_affine
from loomc.services.model_zoo import add_model, f32, matmul_model, mnist_small
from loomc.services.pipeline import CompileOptions, EmitLevel
from loomc.services.reference_evaluator import reference_eval


def test_add_loop_text_matches_golden(compiler, golden):
    compilation = compiler.compile(add_model(), CompileOptions(), EmitLevel.LOOP)
    assert compiler.emit(compilation, EmitLevel.LOOP) == golden("add.loop.mlir")


def test_add_affine_text_matches_golden(compiler, golden):
    compilation = compiler.compile(add_model(), CompileOptions(), EmitLevel.AFFINE)
    assert compiler.emit(compilation, EmitLevel.AFFINE) == golden("add.affine.mlir")


def test_tiled_add_matches_golden(compiler, golden):
    options = CompileOptions(tiles=((OpKind.ADD, 2),))
    compilation = compiler.compile(add_model(dims=(10,)), options, EmitLevel.AFFINE)
    assert compiler.emit(compilation, EmitLevel.AFFINE) == golden("tile.affine.mlir")


def test_uneven_tile_clamps_the_inner_loop(compile_program):
    program = compile_program(add_model(dims=(10,)), CompileOptions(tiles=((OpKind.ADD, 3),)))
    text = emit_affine_text(program)
    assert "affine.for %arg2 = 0 to 10 step 3 {" in text
    assert "#map1 = affine_map<(d0) -> (d0 + 3, 10)>" in text
    assert "to min #map1(%arg2) {" in text


def test_tiled_loop_text_shows_the_block(compiler):
    options = CompileOptions(tiles=((OpKind.ADD, 2),))
    compilation = compiler.compile(add_model(dims=(10,)), options, EmitLevel.LOOP)
    text = compiler.emit(compilation, EmitLevel.LOOP)
    assert "krnl.block" in text
    assert "(!krnl.loop) -> (!krnl.loop, !krnl.loop)" in text


def test_matmul_nest_has_reduction_and_accumulator():
    module = lower_graph_to_loops(matmul_model())
    (iterate,) = module.function.iterates
    assert [r.name for r in iterate.reductions] == ["r0"]
    assert [s.kind for s in iterate.prologue] == [ScalarKind.CONSTF, ScalarKind.STORE]
    roles = sorted(b.role.value for b in module.function.buffers)
    assert roles == [BufferRole.ACCUMULATOR.value, BufferRole.ALLOC.value]
    assert "krnl.reduce" in print_loop_module(module)


def test_matmul_on_small_integers_is_exact(rng, compile_program, debug_config):
    program = compile_program(matmul_model())
    for _ in range(5):
        a, b = small_ints_f32(rng, 4, 6), small_ints_f32(rng, 6, 4)
        (out,) = interpret(program, [a, b], debug_config)
        np.testing.assert_array_equal(out.to_array(), a.to_array() @ b.to_array())


def test_reshape_keeps_row_major_order(compile_program, debug_config):
    builder = GraphBuilder()
    x = builder.add_input("x", f32(2, 3))
    target = builder.constant(TensorValue.from_array(np.asarray([3, -1], dtype=np.int64)))
    module = builder.build([builder.op(OpKind.RESHAPE, [x, target])])
    data = TensorValue.from_array(np.arange(6, dtype=np.float32).reshape(2, 3))
    (out,) = interpret(compile_program(module), [data], debug_config)
    assert out.shape == Shape.of(3, 2)
    np.testing.assert_array_equal(out.data, data.data)


def test_broadcast_operands_use_fewer_indices(compile_program, debug_config, rng):
    builder = GraphBuilder()
    x = builder.add_input("x", f32(2, 3))
    row = builder.add_input("row", f32(3))
    module = builder.build([builder.op(OpKind.SUB, [x, row])])
    inputs = [random_f32(rng, 2, 3), random_f32(rng, 3)]
    program = compile_program(module)
    assert "affine.load %arg1[%arg3] : memref<3xf32>" in emit_affine_text(program)
    assert interpret(program, inputs, debug_config) == reference_eval(module, inputs)


def test_empty_tensor_emits_no_nest(compile_program, debug_config):
    module = add_model(dims=(0, 3))
    program = compile_program(module)
    assert program.nests == []
    empty = TensorValue.from_array(np.zeros((0, 3), dtype=np.float32))
    (out,) = interpret(program, [empty, empty], debug_config)
    assert out.shape == Shape.of(0, 3)


def test_dynamic_shapes_cannot_be_lowered(compiler):
    builder = GraphBuilder()
    x = builder.add_input("x", TensorType(DType.F32, Shape.of(None, 4)))
    module = builder.build([builder.op(OpKind.RELU, [x])])
    with pytest.raises(DynamicShapeUnsupported):
        compiler.compile(module, CompileOptions(), EmitLevel.LOOP)


def test_ops_without_a_rule_are_reported(compiler):
    builder = GraphBuilder()
    x = builder.add_input("x", f32(3, 4))
    module = builder.build([builder.op(OpKind.REDUCE_L1, [x], {"axes": [1]})])
    with pytest.raises(UnloweredOp, match="ReduceL1"):
        lower_graph_to_loops(module)
    with pytest.raises(UnloweredOp):
        compiler.compile(module, CompileOptions(decompose=False), EmitLevel.LOOP)
    assert compiler.compile(module, CompileOptions(), EmitLevel.LOOP).loops is not None


def test_constants_become_globals():
    builder = GraphBuilder()
    x = builder.add_input("x", f32(2))
    c = builder.constant(TensorValue.from_array(np.asarray([1.0, 2.0], dtype=np.float32)), name="bias")
    loops = lower_graph_to_loops(builder.build([builder.op(OpKind.ADD, [x, c])]))
    (glob,) = [b for b in loops.function.buffers if b.role is BufferRole.GLOBAL]
    assert glob.name == "bias"
    assert '"krnl.global"() {name = "bias"' in print_loop_module(loops)


def test_plan_round_trip_runs_identically(compiler, rng, debug_config):
    program = compiler.compile(mnist_small(), CompileOptions(), EmitLevel.PLAN).program
    assert program is not None
    reloaded = compiler.plans.loads(compiler.plans.dumps(program))
    assert emit_affine_text(reloaded) == emit_affine_text(program)
    image = random_f32(rng, 1, 1, 28, 28)
    assert interpret(reloaded, [image], debug_config) == interpret(program, [image], debug_config)


def test_lowering_leaves_the_loop_module_intact():
    loops = lower_graph_to_loops(add_model())
    before = print_loop_module(loops)
    lower_loops_to_affine(loops)
    assert print_loop_module(loops) == before
