"""Operation decomposition: rewrite composite ops into simpler registry ops."""

from __future__ import annotations

from loomc.models.graph import GraphModule, GraphValue, OpKind
from loomc.services.passes.result import PassResult
from loomc.services.passes.rewrite_engine import Capture, Match, OpPat, RewritePattern, Rewriter, apply_patterns


def _reduce_l1(m: Match, rw: Rewriter) -> GraphValue:
    attrs = m.root.attributes
    summed = rw.op(OpKind.ABS, [m["x"]])
    return rw.op(OpKind.REDUCE_SUM, [summed], {"axes": attrs["axes"], "keepdims": attrs["keepdims"]})


# ReduceL1(x) = ReduceSum(Abs(x))
REDUCE_L1_PATTERN = RewritePattern("ReduceL1Pattern", OpPat(OpKind.REDUCE_L1, (Capture("x"),)), _reduce_l1)

DECOMPOSE_PATTERNS = (REDUCE_L1_PATTERN,)


def pass_decompose(module: GraphModule, max_sweeps: int = 64) -> PassResult:
    before = len(module.main.ops)
    stats = apply_patterns(module.main, DECOMPOSE_PATTERNS, max_sweeps)
    return PassResult(
        "decompose",
        module,
        changed=stats.rewrites > 0,
        rewrites=stats.rewrites,
        sweeps=stats.sweeps,
        fired=stats.fired,
        ops_before=before,
        ops_after=len(module.main.ops),
    )
