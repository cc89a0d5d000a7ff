"""Loop -> affine lowering (`--convert-krnl-to-affine` analog)."""

from __future__ import annotations

import logging
from typing import Hashable

from loomc.models.affine import AffineFor, AffineItem, AffineIV, AffineNest, AffineProgram
from loomc.models.affine_expr import AffineExpr
from loomc.models.loop_ir import IterateOp, LoopHandle, LoopModule, ReductionLoop, ScalarOp
from loomc.services.lowering.schedule_expansion import expand_schedule

logger = logging.getLogger(__name__)


def lower_iterate(iterate: IterateOp) -> AffineNest:
    """Materialize one iterate: scheduled loops outermost, reduction loops around the body."""

    expansion = expand_schedule(iterate)
    reduction_ivs: dict[int, AffineExpr] = {}

    def mapping(sym: Hashable) -> AffineExpr | None:
        if isinstance(sym, LoopHandle):
            return expansion.original_value(sym)
        if isinstance(sym, ReductionLoop):
            return reduction_ivs.get(id(sym))
        return None

    def rewrite(ops: list[ScalarOp]) -> list[AffineItem]:
        return [op.with_indices(tuple(e.substitute(mapping) for e in op.indices)) for op in ops]

    root: list[AffineItem] = []
    items = root
    for loop in expansion.loops:
        node = AffineFor(loop.iv, loop.lowers, loop.uppers, loop.step)
        items.append(node)
        items = node.body

    items.extend(rewrite(iterate.prologue))
    inner = items
    for reduction in iterate.reductions:
        lowers = tuple(e.substitute(mapping) for e in reduction.lowers)
        uppers = tuple(e.substitute(mapping) for e in reduction.uppers)
        iv = AffineIV(reduction.name)
        reduction_ivs[id(reduction)] = AffineExpr.var(iv)
        node = AffineFor(iv, lowers, uppers, 1)
        inner.append(node)
        inner = node.body
    inner.extend(rewrite(iterate.body))
    items.extend(rewrite(iterate.epilogue))

    original_ivs = tuple(expansion.originals[id(h)] for h in iterate.originals)
    return AffineNest(iterate.op_kind, root, original_ivs, len(expansion.loops))


def lower_loops_to_affine(module: LoopModule) -> AffineProgram:
    fn = module.function
    nests = [lower_iterate(it) for it in fn.iterates]
    logger.debug("materialized %d affine nest(s) for %s", len(nests), fn.name)
    return AffineProgram(fn.name, list(fn.inputs), list(fn.buffers), nests, list(fn.results), module.entry_point)
