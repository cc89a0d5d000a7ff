"""Interpreter for affine programs, the runner behind `loomc run`.

Nests are compiled into closures over an integer environment (one slot per
induction variable) and a scalar environment (one slot per SSA value).
Arithmetic is done on numpy float32 scalars, so every operation rounds to F32.

In debug mode every allocation carries a written-mask and reading an element
that was never stored raises `UninitializedRead`; in release mode allocations
start zero-filled.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Hashable, Iterator, Sequence

import numpy as np
from tqdm import tqdm

from loomc.config import BaseConfig, get_config
from loomc.errors import OutOfRange, UninitializedRead, VerificationError
from loomc.models.affine import AffineFor, AffineItem, AffineNest, AffineProgram
from loomc.models.affine_expr import AffineExpr
from loomc.models.loop_ir import Buffer, BufferRole, ScalarKind, ScalarOp
from loomc.models.tensor import TensorValue, strides
from loomc.services.reference_evaluator import check_entry_inputs

logger = logging.getLogger(__name__)

Env = list[int]
Values = list[object]
Statement = Callable[[Env, Values], None]
IntFn = Callable[[Env], int]


@dataclass
class ExecContext:
    """Mutable state of one `interpret` call."""

    debug: bool
    arrays: dict[str, np.ndarray] = field(default_factory=dict)
    written: dict[str, np.ndarray] = field(default_factory=dict)
    trip_counts: Counter[str] = field(default_factory=Counter)

    def allocate(self, buffer: Buffer, initial: np.ndarray | None = None) -> None:
        count = buffer.type.shape.elem_count
        if initial is not None:
            self.arrays[buffer.name] = np.array(initial, dtype=buffer.type.dtype.numpy).reshape(-1)
            if self.debug:
                self.written[buffer.name] = np.ones(count, dtype=bool)
        else:
            self.arrays[buffer.name] = np.zeros(count, dtype=buffer.type.dtype.numpy)
            if self.debug:
                self.written[buffer.name] = np.zeros(count, dtype=bool)

    def result(self, buffer: Buffer) -> TensorValue:
        return TensorValue(buffer.type.dtype, buffer.type.shape, self.arrays[buffer.name].copy())


def _binary(kind: ScalarKind) -> Callable[[object, object], object]:
    if kind is ScalarKind.ADD:
        return lambda a, b: a + b  # type: ignore[operator]
    if kind is ScalarKind.SUB:
        return lambda a, b: a - b  # type: ignore[operator]
    if kind is ScalarKind.MUL:
        return lambda a, b: a * b  # type: ignore[operator]
    if kind is ScalarKind.DIV:
        return lambda a, b: a / b  # type: ignore[operator]
    return lambda a, b: a if a >= b else b  # type: ignore[operator]


class _NestCompiler:
    def __init__(self, ctx: ExecContext, label: str) -> None:
        self.ctx = ctx
        self.label = label
        self.slots: dict[int, int] = {}
        self.values: dict[int, int] = {}

    def _value_slot(self, value: object) -> int:
        return self.values.setdefault(id(value), len(self.values))

    def affine(self, expr: AffineExpr) -> IntFn:
        const = expr.const
        terms = []
        for sym, coeff in expr.terms:
            slot = self.slots.get(id(sym))
            if slot is None:
                raise VerificationError(
                    message=f"{self.label}: index uses {getattr(sym, 'name', sym)}, which no enclosing loop binds"
                )
            terms.append((slot, coeff))
        if not terms:
            return lambda env: const
        if len(terms) == 1:
            (slot, coeff), = terms
            if coeff == 1:
                return lambda env: env[slot] + const
            return lambda env: env[slot] * coeff + const
        return lambda env: const + sum(env[s] * c for s, c in terms)

    def _offset(self, op: ScalarOp) -> IntFn:
        buffer = op.buffer
        assert buffer is not None
        if op.linear:
            flat = op.indices[0]
        else:
            flat = AffineExpr.constant(0)
            for expr, stride in zip(op.indices, strides(buffer.type.shape)):
                flat = flat + expr * stride
        offset = self.affine(flat)
        if not self.ctx.debug:
            return offset

        dims = (buffer.type.shape.elem_count,) if op.linear else buffer.type.shape.static_dims
        parts = [self.affine(e) for e in op.indices]

        def checked(env: Env) -> int:
            idx = [p(env) for p in parts]
            if any(not 0 <= i < d for i, d in zip(idx, dims)):
                raise OutOfRange(message=f"{self.label}: index {idx} out of range for {buffer.name} {list(dims)}")
            return offset(env)

        return checked

    def statement(self, op: ScalarOp) -> Statement:
        kind = op.kind
        if kind is ScalarKind.LOAD:
            return self._load(op)
        if kind is ScalarKind.STORE:
            return self._store(op)

        out = self._value_slot(op.result)
        args = [self.values[id(v)] for v in op.operands]
        if kind in (ScalarKind.CONSTF, ScalarKind.CONSTI):
            constant = np.float32(op.value) if kind is ScalarKind.CONSTF else np.int64(op.value)

            def run_const(env: Env, vals: Values) -> None:
                vals[out] = constant

            return run_const
        if kind in (ScalarKind.ABS, ScalarKind.EXP):
            fn = np.abs if kind is ScalarKind.ABS else np.exp
            (a,) = args

            def run_unary(env: Env, vals: Values) -> None:
                vals[out] = fn(vals[a])

            return run_unary
        if kind is ScalarKind.CMP_GE:
            a, b = args

            def run_cmp(env: Env, vals: Values) -> None:
                vals[out] = bool(vals[a] >= vals[b])  # type: ignore[operator]

            return run_cmp
        if kind is ScalarKind.SELECT:
            c, t, f = args

            def run_select(env: Env, vals: Values) -> None:
                vals[out] = vals[t] if vals[c] else vals[f]

            return run_select
        binary = _binary(kind)
        a, b = args

        def run_binary(env: Env, vals: Values) -> None:
            vals[out] = binary(vals[a], vals[b])

        return run_binary

    def _load(self, op: ScalarOp) -> Statement:
        buffer = op.buffer
        assert buffer is not None
        array = self.ctx.arrays[buffer.name]
        offset = self._offset(op)
        out = self._value_slot(op.result)
        mask = self.ctx.written.get(buffer.name) if buffer.role in (BufferRole.ALLOC, BufferRole.ACCUMULATOR) else None
        if mask is None:

            def run_load(env: Env, vals: Values) -> None:
                vals[out] = array[offset(env)]

            return run_load

        def run_checked_load(env: Env, vals: Values) -> None:
            at = offset(env)
            if not mask[at]:
                raise UninitializedRead(
                    message=f"read of {buffer.name}[{at}] before any write",
                    details={"buffer": buffer.name, "offset": int(at)},
                )
            vals[out] = array[at]

        return run_checked_load

    def _store(self, op: ScalarOp) -> Statement:
        buffer = op.buffer
        assert buffer is not None
        array = self.ctx.arrays[buffer.name]
        offset = self._offset(op)
        value = self.values[id(op.operands[0])]
        mask = self.ctx.written.get(buffer.name)
        if mask is None:

            def run_store(env: Env, vals: Values) -> None:
                array[offset(env)] = vals[value]

            return run_store

        def run_marked_store(env: Env, vals: Values) -> None:
            at = offset(env)
            array[at] = vals[value]
            mask[at] = True

        return run_marked_store

    def loop(self, node: AffineFor) -> Statement:
        lowers = [self.affine(e) for e in node.lowers]
        uppers = [self.affine(e) for e in node.uppers]
        slot = self.slots[id(node.iv)] = len(self.slots)
        body = self.items(node.body)
        step = node.step
        key = f"{self.label}/{node.iv.name}"
        counts = self.ctx.trip_counts

        def run_loop(env: Env, vals: Values) -> None:
            lo = max(f(env) for f in lowers)
            hi = min(f(env) for f in uppers)
            if lo < hi:
                counts[key] += (hi - lo + step - 1) // step
            for v in range(lo, hi, step):
                env[slot] = v
                for stmt in body:
                    stmt(env, vals)

        return run_loop

    def items(self, items: list[AffineItem]) -> list[Statement]:
        return [self.loop(i) if isinstance(i, AffineFor) else self.statement(i) for i in items]

    def compile(self, nest: AffineNest) -> Callable[[], None]:
        top = self.items(nest.body)
        num_slots = len(self.slots)
        num_values = len(self.values)

        def run() -> None:
            env: Env = [0] * num_slots
            vals: Values = [None] * num_values
            for stmt in top:
                stmt(env, vals)

        return run


def interpret(
    program: AffineProgram,
    inputs: Sequence[TensorValue],
    config: BaseConfig | None = None,
    context: ExecContext | None = None,
) -> list[TensorValue]:
    """Run the entry function of `program` on `inputs`."""

    config = config or get_config()
    check_entry_inputs([b.type for b in program.inputs], inputs)
    ctx = context or ExecContext(debug=config.DEBUG)
    for buffer, value in zip(program.inputs, inputs):
        ctx.allocate(buffer, value.data)
    for buffer in program.buffers:
        initial = buffer.initial.data if buffer.initial is not None else None
        ctx.allocate(buffer, initial)

    runners = [
        _NestCompiler(ctx, f"{k}.{nest.op_kind}").compile(nest) for k, nest in enumerate(program.nests)
    ]
    with np.errstate(all="ignore"):
        for run in tqdm(runners, desc="nests", unit="nest", disable=not config.SHOW_PROGRESS):
            run()
    logger.debug("interpreted %d nest(s), %d loop iteration(s)", len(runners), sum(ctx.trip_counts.values()))
    return [ctx.result(b) for b in program.results]


# --- static iteration analysis --------------------------------------------------


@dataclass(frozen=True)
class LoopTripCount:
    name: str
    instances: tuple[int, ...]

    @property
    def total(self) -> int:
        return sum(self.instances)


@dataclass(frozen=True)
class TripCountReport:
    nests: tuple[dict[str, LoopTripCount], ...]
    innermost_total: int

    def loop(self, name: str, nest: int = 0) -> LoopTripCount:
        return self.nests[nest][name]


def _bounds(node: AffineFor, env: dict[Hashable, int]) -> range:
    lo = max(e.evaluate(env) for e in node.lowers)
    hi = min(e.evaluate(env) for e in node.uppers)
    return range(lo, hi, node.step)


def trip_count_report(program: AffineProgram) -> TripCountReport:
    """Trip count of every execution of every loop, from the loop bounds alone.

    Bounds may depend on enclosing ivs, so every instance of every loop is
    enumerated: the walk runs once per iteration of each non-innermost loop and
    its cost grows with the iteration space. Innermost loops are measured, not
    iterated.
    """

    nests = []
    innermost = 0
    for nest in program.nests:
        instances: dict[str, list[int]] = {}

        def walk(items: list[AffineItem], env: dict[Hashable, int]) -> int:
            inner = 0
            for item in items:
                if not isinstance(item, AffineFor):
                    continue
                space = _bounds(item, env)
                instances.setdefault(item.iv.name, []).append(len(space))
                if not any(isinstance(i, AffineFor) for i in item.body):
                    inner += len(space)
                    continue
                for v in space:
                    env[item.iv] = v
                    inner += walk(item.body, env)
                env.pop(item.iv, None)
            return inner

        innermost += walk(nest.body, {})
        nests.append({name: LoopTripCount(name, tuple(counts)) for name, counts in instances.items()})
    return TripCountReport(tuple(nests), innermost)


def original_points(nest: AffineNest) -> Iterator[tuple[int, ...]]:
    """Original iv tuples in the order the scheduled loops visit them."""

    def walk(items: list[AffineItem], env: dict[Hashable, int], depth: int) -> Iterator[tuple[int, ...]]:
        if depth == nest.schedule_depth:
            yield tuple(e.evaluate(env) for e in nest.original_ivs)
            return
        for item in items:
            if isinstance(item, AffineFor):
                for v in _bounds(item, env):
                    env[item.iv] = v
                    yield from walk(item.body, env, depth + 1)
                env.pop(item.iv, None)
                return

    return walk(nest.body, {}, 0)
