from __future__ import annotations

import itertools
from collections import Counter
from collections.abc import Iterator
from dataclasses import replace

import numpy as np
import pytest

from helpers import random_f32
from loomc.config import DebugConfig
from loomc.errors import InvalidBounds, InvalidPermutation, InvalidSkew, ScheduleExpansionError
from loomc.models.affine_expr import AffineExpr
from loomc.models.graph import EntryPointDescriptor
from loomc.models.loop_ir import Buffer, BufferRole, IterateOp, LoopFunction, LoopHandle, LoopModule, ScalarKind
from loomc.models.tensor import TensorValue
from loomc.services.affine_interpreter import interpret, original_points
from loomc.services.loop_builder import BodyBuilder, new_iterate
from loomc.services.lowering.graph_to_loops import lower_graph_to_loops
from loomc.services.lowering.loops_to_affine import lower_iterate, lower_loops_to_affine
from loomc.services.lowering.schedule_expansion import expand_schedule
from loomc.services.loop_verifier import verify_loop_module
from loomc.services.model_zoo import add_model, f32, matmul_model
from loomc.services.scheduling import (
    block,
    block_scheduled,
    define_loops,
    permute,
    permute_scheduled,
    skew,
    skew_scheduled,
    tile_iterate,
)


def _square(n: int = 10) -> IterateOp:
    loops = define_loops(2, [(0, n), (0, n)])
    return IterateOp("Test", list(loops), list(loops), [])


def _points(iterate: IterateOp) -> list[tuple[int, ...]]:
    return list(original_points(lower_iterate(iterate)))


# --- handles and transformations ---------------------------------------------------


def test_define_loops_names_and_bounds():
    i, j = define_loops(2, [(0, 3), (1, 4)])
    assert (i.name, j.name) == ("i0", "i1")
    assert i.is_original and i.root() is i
    named = define_loops(1, [(0, 2)], names=["row"])
    assert named[0].name == "row"


@pytest.mark.parametrize("n, bounds", [(0, []), (2, [(0, 3)]), (1, [(4, 4)]), (1, [(5, 2)])])
def test_define_loops_rejects_bad_input(n, bounds):
    with pytest.raises(InvalidBounds):
        define_loops(n, bounds)


def test_block_derives_outer_and_inner():
    (i,) = define_loops(1, [(0, 10)])
    outer, inner = block(i, 3)
    assert (outer.name, inner.name) == ("i0o", "i0i")
    assert outer.parent is i and inner.parent is i
    assert inner.root() is i
    with pytest.raises(InvalidBounds):
        block(i, 0)


def test_permute_places_perm_k_at_position_k():
    a, b, c = define_loops(3, [(0, 2)] * 3)
    assert permute([a, b, c], [2, 0, 1]) == [c, a, b]
    assert permute([a, b, c], [0, 1, 2]) == [a, b, c]


@pytest.mark.parametrize("perm", [[0, 0, 1], [0, 1], [1, 2, 3]])
def test_permute_rejects_non_permutations(perm):
    loops = define_loops(3, [(0, 2)] * 3)
    with pytest.raises(InvalidPermutation):
        permute(loops, perm)


def test_skew_rules():
    i, j = define_loops(2, [(0, 4), (0, 4)])
    skewed = skew(j, i, 2)
    assert skewed.name == "i1s" and skewed.root() is j
    outer, _ = block(i, 2)
    with pytest.raises(InvalidSkew):
        skew(j, outer, 1)
    with pytest.raises(InvalidSkew):
        skew(j, j, 1)


def test_scheduled_transformations_edit_the_nest():
    it = _square()
    i, j = it.originals
    outer, inner = block_scheduled(it, i, 4)
    assert it.scheduled == [outer, inner, j]
    permute_scheduled(it, [0, 2, 1])
    assert it.scheduled == [outer, j, inner]
    skewed = skew_scheduled(it, j, i, 1)
    assert it.scheduled == [outer, skewed, inner]
    with pytest.raises(InvalidBounds):
        block_scheduled(it, j, 2)


def test_tile_iterate_puts_tile_loops_outermost():
    it = _square()
    assert tile_iterate(it, 4)
    assert [h.name for h in it.scheduled] == ["i0o", "i1o", "i0i", "i1i"]
    assert not tile_iterate(it, 2)


# --- schedule expansion ------------------------------------------------------------


def test_block_by_three_bounds_inner_with_min():
    (i,) = define_loops(1, [(0, 10)])
    it = IterateOp("Test", [i], [i], [])
    outer, inner = block_scheduled(it, i, 3)
    expansion = expand_schedule(it)
    o, n = expansion.loops
    assert (o.lowers, o.uppers, o.step) == ((AffineExpr.constant(0),), (AffineExpr.constant(10),), 3)
    start = AffineExpr.var(o.iv)
    assert n.lowers == (start,)
    assert n.uppers == (start + 3, AffineExpr.constant(10))
    assert expansion.original_value(i) == AffineExpr.var(n.iv)


def test_block_by_divisor_needs_no_min():
    (i,) = define_loops(1, [(0, 10)])
    it = IterateOp("Test", [i], [i], [])
    block_scheduled(it, i, 2)
    _, inner = expand_schedule(it).loops
    assert len(inner.uppers) == 1


def test_skew_shifts_bounds_and_recovers_original():
    it = _square(4)
    i, j = it.originals
    skew_scheduled(it, j, i, 1)
    expansion = expand_schedule(it)
    li, lj = expansion.loops
    iv_i = AffineExpr.var(li.iv)
    assert lj.lowers == (iv_i,) and lj.uppers == (iv_i + 4,)
    assert expansion.original_value(j) == AffineExpr.var(lj.iv) - iv_i


def test_skewed_loop_outside_its_reference_is_rejected():
    it = _square(4)
    i, j = it.originals
    skew_scheduled(it, j, i, 1)
    permute_scheduled(it, [1, 0])
    with pytest.raises(ScheduleExpansionError) as info:
        expand_schedule(it)
    assert info.value.details["kind"] == "ScheduleOrder"


def test_mutual_skew_is_rejected():
    it = _square(4)
    i, j = it.originals
    skew_scheduled(it, i, j, 1)
    skew_scheduled(it, j, i, 1)
    with pytest.raises(ScheduleExpansionError) as info:
        expand_schedule(it)
    assert info.value.details["kind"] == "ScheduleCycle"


@pytest.mark.parametrize("tile", [1, 3, 4, 10, 11])
def test_block_visits_every_point_once(tile):
    (i,) = define_loops(1, [(0, 10)])
    it = IterateOp("Test", [i], [i], [])
    block_scheduled(it, i, tile)
    assert _points(it) == [(v,) for v in range(10)]


def _moves(it: IterateOp) -> list[tuple[str, list[LoopHandle]]]:
    scheduled = it.scheduled
    moves: list[tuple[str, list[LoopHandle]]] = []
    for k, handle in enumerate(scheduled):
        for tile in (2, 3, 4):
            outer, inner = block(handle, tile)
            moves.append((f"block({handle.name},{tile})", scheduled[:k] + [outer, inner] + scheduled[k + 1 :]))
        for along in it.originals:
            if handle.root() is not along:
                moves.append((f"skew({handle.name})", scheduled[:k] + [skew(handle, along, 1)] + scheduled[k + 1 :]))
    n = len(scheduled)
    for name, perm in (("reverse", list(range(n))[::-1]), ("rotate", list(range(1, n)) + [0])):
        moves.append((name, permute(scheduled, perm)))
    return moves


def _compositions(base: IterateOp, depth: int) -> Iterator[tuple[str, IterateOp | None]]:
    """Every schedule reachable in up to `depth` moves; None marks one expansion rejects."""

    frontier = [("", base)]
    for _depth in range(depth):
        next_frontier = []
        for history, it in frontier:
            for move, scheduled in _moves(it):
                candidate = replace(it, scheduled=scheduled)
                label = f"{history} {move}".strip()
                try:
                    expand_schedule(candidate)
                except ScheduleExpansionError:
                    yield label, None
                    continue
                yield label, candidate
                next_frontier.append((label, candidate))
        frontier = next_frontier


def test_schedules_up_to_depth_three_are_neutral():
    """Any block/permute/skew composition visits each original point exactly once."""

    expected = Counter(itertools.product(range(10), range(10)))
    checked = rejected = 0
    for label, candidate in _compositions(_square(), 3):
        if candidate is None:
            rejected += 1
            continue
        assert Counter(_points(candidate)) == expected, label
        checked += 1
    assert checked > 500
    assert rejected > 0


def _elementwise_workload() -> tuple[LoopModule, IterateOp]:
    a = Buffer("a", f32(6, 6), BufferRole.INPUT)
    b = Buffer("b", f32(6, 6), BufferRole.INPUT)
    out = Buffer("out", f32(6, 6), BufferRole.ALLOC)
    it, (i, j) = new_iterate("Mul", [6, 6])
    body = BodyBuilder(it.body)
    x = body.load(a, (i, j))
    product = body.binary(ScalarKind.MUL, x, body.load(b, (j, i)))
    body.store(body.binary(ScalarKind.ADD, product, x), out, (i, j))
    fn = LoopFunction("main_graph", [a, b], [out], [it], [out])
    return LoopModule(fn, EntryPointDescriptor("main_graph", 2, 1)), it


def _reduction_workload() -> tuple[LoopModule, IterateOp]:
    module = lower_graph_to_loops(matmul_model(6, 5, 6))
    (it,) = module.function.iterates
    return module, it


@pytest.mark.parametrize("workload", [_elementwise_workload, _reduction_workload], ids=["elementwise", "reduction"])
def test_scheduled_nests_compute_identical_results(workload):
    module, base = workload()
    rng = np.random.default_rng(99)
    inputs = [random_f32(rng, *b.type.shape.static_dims) for b in module.function.inputs]

    def run(it: IterateOp) -> list[TensorValue]:
        fn = replace(module.function, iterates=[it])
        return interpret(lower_loops_to_affine(replace(module, function=fn)), inputs, DebugConfig())

    expected = run(base)
    checked = 0
    for label, candidate in _compositions(base, 3):
        if candidate is not None:
            assert run(candidate) == expected, label
            checked += 1
    assert checked > 100


# --- verifier ----------------------------------------------------------------------


def _module(iterate: IterateOp, inputs: list[Buffer], out: Buffer) -> LoopModule:
    fn = LoopFunction("main_graph", inputs, [out], [iterate], [out])
    return LoopModule(fn, EntryPointDescriptor("main_graph", len(inputs), 1))


def _copy_nest() -> tuple[IterateOp, Buffer, Buffer]:
    src = Buffer("src", f32(10, 10), BufferRole.INPUT)
    dst = Buffer("dst", f32(10, 10), BufferRole.ALLOC)
    it, ivs = new_iterate("Copy", [10, 10])
    body = BodyBuilder(it.body)
    body.store(body.load(src, ivs), dst, ivs)
    return it, src, dst


def test_lowered_models_verify():
    assert verify_loop_module(lower_graph_to_loops(add_model())) == []
    assert verify_loop_module(lower_graph_to_loops(matmul_model())) == []


def test_copy_nest_verifies():
    it, src, dst = _copy_nest()
    assert verify_loop_module(_module(it, [src], dst)) == []


def test_body_may_not_use_derived_handles():
    it, src, dst = _copy_nest()
    outer, _ = block_scheduled(it, it.originals[0], 2)
    it.body[0] = it.body[0].with_indices((AffineExpr.var(outer), AffineExpr.var(it.originals[1])))
    kinds = [d.kind for d in verify_loop_module(_module(it, [src], dst))]
    assert kinds == ["IllegalIVUse"]


def test_schedule_must_cover_every_original():
    it, src, dst = _copy_nest()
    it.scheduled = it.scheduled[:1]
    kinds = [d.kind for d in verify_loop_module(_module(it, [src], dst))]
    assert kinds == ["ScheduleCoverage"]


def test_half_scheduled_block_is_reported():
    it, src, dst = _copy_nest()
    i, j = it.originals
    outer, _ = block(i, 2)
    it.scheduled = [outer, j]
    kinds = [d.kind for d in verify_loop_module(_module(it, [src], dst))]
    assert kinds == ["IncompleteBlock"]


def test_store_to_undeclared_buffer_is_reported():
    it, src, _ = _copy_nest()
    stray = Buffer("stray", f32(10, 10), BufferRole.ALLOC)
    out = Buffer("dst2", f32(10, 10), BufferRole.ALLOC)
    it.body[-1].buffer = stray
    kinds = [d.kind for d in verify_loop_module(_module(it, [src], out))]
    assert kinds == ["UndeclaredBuffer"]
