"""Declarative rewrite patterns and the greedy driver that applies them.

A pattern is a source op tree with capture variables, a list of constraints
over the match, and a target builder:

    RewritePattern(
        "MulAddToGemm",
        OpPat(OpKind.ADD, (OpPat(OpKind.MATMUL, (Capture("a"), Capture("b")), name="mm"), Capture("c"))),
        constraints=(has_one_use("mm"),),
        build=lambda m, rw: rw.op(OpKind.GEMM, [m["a"], m["b"], m["c"]]),
    )

The driver sweeps ops in list order (operands before users). A sweep that
rewrote anything is followed by another, until one sweep changes nothing.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Sequence, Union

from loomc.errors import FixpointOverflow, ShapeMismatch
from loomc.models.graph import GraphFunction, GraphOp, GraphValue, OpKind
from loomc.models.tensor import Shape, TensorType, TensorValue
from loomc.services.graph_builder import constant_value, make_op
from loomc.services.reference_evaluator import evaluate_op

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Capture:
    """Matches any value."""

    name: str


@dataclass(frozen=True)
class ConstCapture:
    """Matches a value produced by a Constant op."""

    name: str


@dataclass(frozen=True)
class NonConstCapture:
    """Matches a value not produced by a Constant op."""

    name: str


@dataclass(frozen=True)
class OpPat:
    kind: OpKind
    operands: tuple[Pattern, ...]
    name: str | None = None


Pattern = Union[OpPat, Capture, ConstCapture, NonConstCapture]


@dataclass
class Match:
    root: GraphOp
    values: dict[str, GraphValue] = field(default_factory=dict)
    ops: dict[str, GraphOp] = field(default_factory=dict)

    def __getitem__(self, name: str) -> GraphValue:
        return self.values[name]


@dataclass(frozen=True)
class MatchContext:
    producers: Mapping[GraphValue, GraphOp]
    uses: Mapping[GraphValue, int]

    def constant(self, value: GraphValue) -> TensorValue | None:
        return constant_value(value, self.producers)


Constraint = Callable[[Match, MatchContext], bool]


@dataclass(frozen=True)
class RewritePattern:
    name: str
    source: OpPat
    build: Callable[[Match, "Rewriter"], GraphValue]
    constraints: tuple[Constraint, ...] = ()


def has_one_use(op_name: str) -> Constraint:
    def check(match: Match, ctx: MatchContext) -> bool:
        return ctx.uses.get(match.ops[op_name].result, 0) == 1

    return check


def has_rank(value_name: str, rank: int) -> Constraint:
    def check(match: Match, _ctx: MatchContext) -> bool:
        return match[value_name].type.shape.rank == rank

    return check


def _match(pattern: Pattern, value: GraphValue, ctx: MatchContext, m: Match) -> bool:
    producer = ctx.producers.get(value)
    if isinstance(pattern, OpPat):
        return producer is not None and _match_op(pattern, producer, ctx, m)
    is_const = producer is not None and producer.kind is OpKind.CONSTANT
    if isinstance(pattern, ConstCapture) and not is_const:
        return False
    if isinstance(pattern, NonConstCapture) and is_const:
        return False
    bound = m.values.get(pattern.name)
    if bound is not None:
        return bound is value
    m.values[pattern.name] = value
    return True


def _match_op(pattern: OpPat, op: GraphOp, ctx: MatchContext, m: Match) -> bool:
    if op.kind is not pattern.kind or len(op.operands) != len(pattern.operands):
        return False
    if pattern.name is not None:
        m.ops[pattern.name] = op
    return all(_match(p, v, ctx, m) for p, v in zip(pattern.operands, op.operands))


def match_pattern(pattern: RewritePattern, op: GraphOp, ctx: MatchContext) -> Match | None:
    m = Match(root=op)
    m.ops["root"] = op
    if not _match_op(pattern.source, op, ctx, m):
        return None
    for constraint in pattern.constraints:
        if not constraint(m, ctx):
            return None
    return m


def refine_type(inferred: TensorType, declared: TensorType) -> TensorType:
    """Keep whatever `declared` knows that `inferred` does not."""

    if not declared.shape.rank_known or declared.dtype is not inferred.dtype:
        return inferred
    if not inferred.shape.rank_known:
        return declared
    if inferred.shape.rank != declared.shape.rank:
        return inferred
    dims = [i if i is not None else d for i, d in zip(inferred.shape.dims, declared.shape.dims)]
    return TensorType(inferred.dtype, Shape.of(*dims))


class Rewriter:
    """Creates the replacement ops for one match, in front of the root."""

    def __init__(self, root: GraphOp, producers: Mapping[GraphValue, GraphOp]) -> None:
        self.root = root
        self.new_ops: list[GraphOp] = []
        self._producers = dict(producers)

    def _name(self) -> str:
        return f"{self.root.result.name}_{len(self.new_ops)}"

    def _constant_of(self, value: GraphValue) -> TensorValue | None:
        return constant_value(value, self._producers)

    def _append(self, op: GraphOp) -> GraphValue:
        self.new_ops.append(op)
        self._producers[op.result] = op
        return op.result

    def op(self, kind: OpKind, operands: Sequence[GraphValue], attributes: Mapping[str, Any] | None = None) -> GraphValue:
        return self._append(make_op(kind, operands, attributes, self._name(), self._constant_of))

    def constant(self, value: TensorValue) -> GraphValue:
        return self.op(OpKind.CONSTANT, [], {"value": value})

    def fold(self, kind: OpKind, operands: Sequence[GraphValue], attributes: Mapping[str, Any] | None = None) -> GraphValue:
        """Build `kind(operands)`, evaluated right away when every operand is constant."""

        payloads = [self._constant_of(v) for v in operands]
        if any(p is None for p in payloads):
            return self.op(kind, operands, attributes)
        pending = make_op(kind, operands, attributes, self._name(), self._constant_of)
        return self.constant(evaluate_op(pending, payloads))  # type: ignore[arg-type]


@dataclass(frozen=True)
class RewriteStats:
    rewrites: int
    sweeps: int
    fired: dict[str, int]


def _sweep(fn: GraphFunction, patterns: Sequence[RewritePattern], fired: dict[str, int]) -> int:
    rewrites = 0
    i = 0
    while i < len(fn.ops):
        op = fn.ops[i]
        ctx = MatchContext(fn.producers(), fn.uses())
        applied = False
        for pattern in patterns:
            m = match_pattern(pattern, op, ctx)
            if m is None:
                continue
            rewriter = Rewriter(op, ctx.producers)
            try:
                replacement = pattern.build(m, rewriter)
            except ShapeMismatch:
                logger.debug("%s skipped at op #%d: replacement does not type-check", pattern.name, i)
                continue
            if rewriter.new_ops and replacement is rewriter.new_ops[-1].result:
                replacement.type = refine_type(replacement.type, op.result.type)
                replacement.name = op.result.name
            fn.ops[i : i + 1] = rewriter.new_ops
            fn.replace_all_uses(op.result, replacement)
            fired[pattern.name] = fired.get(pattern.name, 0) + 1
            rewrites += 1
            i += len(rewriter.new_ops)
            applied = True
            break
        if not applied:
            i += 1
    return rewrites


def apply_patterns(fn: GraphFunction, patterns: Sequence[RewritePattern], max_sweeps: int = 64) -> RewriteStats:
    """Apply `patterns` greedily to a fixpoint; dead ops are removed along the way.

    At most `max_sweeps` sweeps may rewrite; the sweep after them must find nothing.
    """

    fired: dict[str, int] = {}
    total = 0
    sweeps = 0
    while True:
        sweeps += 1
        rewrites = _sweep(fn, patterns, fired)
        if not rewrites:
            break
        if sweeps > max_sweeps:
            raise FixpointOverflow(
                message=f"rewriting did not converge within {max_sweeps} sweeps",
                details={"patterns": [p.name for p in patterns], "fired": fired},
            )
        total += rewrites
        fn.remove_dead_ops()
    return RewriteStats(total, sweeps, fired)
