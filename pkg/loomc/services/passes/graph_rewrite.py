"""Graph rewriting with the built-in pattern set."""

from __future__ import annotations

from loomc.errors import ShapeMismatch
from loomc.models.graph import GraphModule, GraphValue, OpKind
from loomc.services.op_registry import infer_result_type
from loomc.services.passes.result import PassResult
from loomc.services.passes.rewrite_engine import (
    Capture,
    Match,
    MatchContext,
    OpPat,
    RewritePattern,
    Rewriter,
    apply_patterns,
    has_one_use,
    has_rank,
)


def _c_broadcastable(m: Match, _ctx: MatchContext) -> bool:
    gemm_attrs = {"alpha": 1.0, "beta": 1.0}
    try:
        gemm = infer_result_type(OpKind.GEMM, [m["a"].type, m["b"].type, m["c"].type], gemm_attrs)
    except ShapeMismatch:
        return False
    # Add may broadcast C beyond M x N; Gemm cannot.
    return gemm.shape.is_static and gemm.shape == m.root.result.type.shape


def _to_gemm(m: Match, rw: Rewriter) -> GraphValue:
    return rw.op(OpKind.GEMM, [m["a"], m["b"], m["c"]])


def _drop_identity(m: Match, _rw: Rewriter) -> GraphValue:
    return m["x"]


MUL_ADD_TO_GEMM = RewritePattern(
    "MulAddToGemm",
    OpPat(OpKind.ADD, (OpPat(OpKind.MATMUL, (Capture("a"), Capture("b")), name="mm"), Capture("c"))),
    _to_gemm,
    constraints=(has_one_use("mm"), has_rank("a", 2), has_rank("b", 2), _c_broadcastable),
)

IDENTITY_ELIMINATION = RewritePattern("IdentityElimination", OpPat(OpKind.IDENTITY, (Capture("x"),)), _drop_identity)

REWRITE_PATTERNS = (MUL_ADD_TO_GEMM, IDENTITY_ELIMINATION)


def pass_graph_rewrite(module: GraphModule, max_sweeps: int = 64) -> PassResult:
    before = len(module.main.ops)
    stats = apply_patterns(module.main, REWRITE_PATTERNS, max_sweeps)
    return PassResult(
        "rewrite",
        module,
        changed=stats.rewrites > 0,
        rewrites=stats.rewrites,
        sweeps=stats.sweeps,
        fired=stats.fired,
        ops_before=before,
        ops_after=len(module.main.ops),
    )
