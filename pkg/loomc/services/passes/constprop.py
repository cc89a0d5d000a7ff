"""Constant propagation: Add normalization followed by folding of all-constant ops.

Normalization rules, tried in this order at every Add:

    (1) c + x             -> x + c
    (2) (x + c1) + c2     -> x + (c1 + c2)
    (5) (x + c1) + (y + c2) -> (x + y) + (c1 + c2)
    (3) (x + c) + y       -> (x + y) + c
    (4) x + (y + c)       -> (x + y) + c

`c` operands must come from Constant ops, `x`/`y` must not. `c1 + c2` folds on
the spot. Rules (2)-(5) reassociate f32 addition.
"""

from __future__ import annotations

import logging
from collections.abc import Mapping

from loomc.errors import FixpointOverflow
from loomc.models.graph import GraphFunction, GraphModule, GraphOp, GraphValue, OpKind
from loomc.services.graph_builder import constant_value
from loomc.services.passes.result import PassResult
from loomc.services.passes.rewrite_engine import (
    ConstCapture,
    Match,
    NonConstCapture,
    OpPat,
    RewritePattern,
    Rewriter,
    apply_patterns,
)
from loomc.services.reference_evaluator import evaluate_op

logger = logging.getLogger(__name__)

ADD = OpKind.ADD
x, y = NonConstCapture("x"), NonConstCapture("y")
c, c1, c2 = ConstCapture("c"), ConstCapture("c1"), ConstCapture("c2")


def _swap(m: Match, rw: Rewriter) -> GraphValue:
    return rw.op(ADD, [m["x"], m["c"]])


def _merge_constants(m: Match, rw: Rewriter) -> GraphValue:
    return rw.op(ADD, [m["x"], rw.fold(ADD, [m["c1"], m["c2"]])])


def _hoist_constant(m: Match, rw: Rewriter) -> GraphValue:
    return rw.op(ADD, [rw.op(ADD, [m["x"], m["y"]]), m["c"]])


def _hoist_both(m: Match, rw: Rewriter) -> GraphValue:
    return rw.op(ADD, [rw.op(ADD, [m["x"], m["y"]]), rw.fold(ADD, [m["c1"], m["c2"]])])


NORMALIZE_PATTERNS = (
    RewritePattern("AddConstantToRight", OpPat(ADD, (c, x)), _swap),
    RewritePattern("AddMergeConstants", OpPat(ADD, (OpPat(ADD, (x, c1)), c2)), _merge_constants),
    RewritePattern("AddHoistBothConstants", OpPat(ADD, (OpPat(ADD, (x, c1)), OpPat(ADD, (y, c2)))), _hoist_both),
    RewritePattern("AddHoistLeftConstant", OpPat(ADD, (OpPat(ADD, (x, c)), y)), _hoist_constant),
    RewritePattern("AddHoistRightConstant", OpPat(ADD, (x, OpPat(ADD, (y, c)))), _hoist_constant),
)


def is_foldable(op: GraphOp, producers: Mapping[GraphValue, GraphOp]) -> bool:
    """True when every operand of a non-Constant op comes from a Constant."""

    return op.kind is not OpKind.CONSTANT and all(constant_value(v, producers) is not None for v in op.operands)


def fold_constants(fn: GraphFunction) -> int:
    """Replace every foldable op by a Constant; returns the number folded."""

    folded = 0
    producers = fn.producers()
    for index, op in enumerate(fn.ops):
        if not is_foldable(op, producers):
            continue
        payloads = [constant_value(v, producers) for v in op.operands]
        value = evaluate_op(op, payloads)  # type: ignore[arg-type]
        replacement = GraphOp(OpKind.CONSTANT, [], [GraphValue(op.result.name, value.type)], {"value": value})
        fn.ops[index] = replacement
        fn.replace_all_uses(op.result, replacement.result)
        producers[replacement.result] = replacement
        folded += 1
    return folded


def pass_constprop(module: GraphModule, max_sweeps: int = 64) -> PassResult:
    fn = module.main
    before = len(fn.ops)
    fired: dict[str, int] = {}
    rewrites = sweeps = rounds = 0
    while True:
        rounds += 1
        stats = apply_patterns(fn, NORMALIZE_PATTERNS, max_sweeps)
        for name, count in stats.fired.items():
            fired[name] = fired.get(name, 0) + count
        folded = fold_constants(fn)
        if folded:
            fired["Fold"] = fired.get("Fold", 0) + folded
        removed = fn.remove_dead_ops()
        rewrites += stats.rewrites + folded
        sweeps += stats.sweeps
        logger.debug("constprop round %d: %d normalized, %d folded, %d removed", rounds, stats.rewrites, folded, removed)
        if not (stats.rewrites or folded):
            break
        if rounds > max_sweeps:
            raise FixpointOverflow(message=f"constant propagation did not converge within {max_sweeps} rounds")
    return PassResult(
        "constprop",
        module,
        changed=rewrites > 0 or len(fn.ops) != before,
        rewrites=rewrites,
        sweeps=sweeps,
        fired=fired,
        ops_before=before,
        ops_after=len(fn.ops),
    )
