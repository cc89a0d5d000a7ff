"""Structural verifier for loop modules."""

from __future__ import annotations

from typing import Iterable

from loomc.errors import ScheduleExpansionError
from loomc.models.graph import Diagnostic
from loomc.models.loop_ir import (
    Buffer,
    BufferRole,
    IterateOp,
    LoopHandle,
    LoopModule,
    ReductionLoop,
    ScalarKind,
    ScalarOp,
)
from loomc.services.lowering.schedule_expansion import expand_schedule


def _check_ivs(
    exprs: Iterable, allowed: set[int], where: str, index: int, diagnostics: list[Diagnostic]
) -> None:
    for expr in exprs:
        for sym in expr.symbols:
            if id(sym) in allowed:
                continue
            if isinstance(sym, LoopHandle):
                diagnostics.append(
                    Diagnostic("IllegalIVUse", f"{where} uses {sym.name}, which is not an original loop here", index)
                )
            elif isinstance(sym, ReductionLoop):
                diagnostics.append(Diagnostic("IllegalIVUse", f"{where} uses reduction loop {sym.name}", index))
            else:
                diagnostics.append(Diagnostic("UnknownIV", f"{where} uses unknown induction variable {sym!r}", index))


def _check_statement(
    stmt: ScalarOp, defined: set[int], declared: set[int], index: int, diagnostics: list[Diagnostic]
) -> None:
    for operand in stmt.operands:
        if id(operand) not in defined:
            diagnostics.append(Diagnostic("UndefinedValue", f"{stmt.kind.value} uses a value not defined before it", index))
    if stmt.kind in (ScalarKind.LOAD, ScalarKind.STORE):
        buffer = stmt.buffer
        if buffer is None or id(buffer) not in declared:
            name = buffer.name if buffer is not None else "<none>"
            diagnostics.append(Diagnostic("UndeclaredBuffer", f"{stmt.kind.value} on undeclared buffer {name}", index))
        elif stmt.linear:
            if len(stmt.indices) != 1:
                diagnostics.append(Diagnostic("IndexArityMismatch", f"linear access to {buffer.name} needs one index", index))
        elif len(stmt.indices) != (buffer.type.shape.rank or 0):
            diagnostics.append(
                Diagnostic(
                    "IndexArityMismatch",
                    f"{buffer.name} has rank {buffer.type.shape.rank}, accessed with {len(stmt.indices)} index(es)",
                    index,
                )
            )
    if stmt.kind is ScalarKind.STORE:
        if len(stmt.operands) != 1 or stmt.result is not None:
            diagnostics.append(Diagnostic("MalformedStore", "store takes one value and has no result", index))
    elif stmt.result is None:
        diagnostics.append(Diagnostic("MissingResult", f"{stmt.kind.value} has no result", index))
    else:
        defined.add(id(stmt.result))


def _verify_iterate(index: int, it: IterateOp, declared: set[int], diagnostics: list[Diagnostic]) -> None:
    try:
        expand_schedule(it)
    except ScheduleExpansionError as exc:
        kind = exc.details.get("kind", "ScheduleError") if isinstance(exc.details, dict) else "ScheduleError"
        diagnostics.append(Diagnostic(kind, exc.message, index))

    originals = {id(h) for h in it.originals}
    reductions = {id(r) for r in it.reductions}
    for r in it.reductions:
        _check_ivs(r.lowers + r.uppers, originals, f"bounds of reduction {r.name}", index, diagnostics)
    _check_ivs((e for s in it.prologue for e in s.indices), originals, "prologue", index, diagnostics)
    _check_ivs((e for s in it.body for e in s.indices), originals | reductions, "body", index, diagnostics)
    _check_ivs((e for s in it.epilogue for e in s.indices), originals, "epilogue", index, diagnostics)

    prologue_values: set[int] = set()
    for stmt in it.prologue:
        _check_statement(stmt, prologue_values, declared, index, diagnostics)
    body_values = set(prologue_values)
    for stmt in it.body:
        _check_statement(stmt, body_values, declared, index, diagnostics)
    epilogue_values = set(prologue_values)
    for stmt in it.epilogue:
        _check_statement(stmt, epilogue_values, declared, index, diagnostics)


def verify_loop_module(module: LoopModule) -> list[Diagnostic]:
    """One diagnostic per violated invariant; empty when the module is valid."""

    fn = module.function
    diagnostics: list[Diagnostic] = []
    names: dict[str, Buffer] = {}
    declared: set[int] = set()
    for buffer in [*fn.inputs, *fn.buffers]:
        if id(buffer) in declared or buffer.name in names:
            diagnostics.append(Diagnostic("MultipleAllocation", f"buffer {buffer.name} is allocated more than once"))
        names[buffer.name] = buffer
        declared.add(id(buffer))
        if not buffer.type.shape.is_static:
            diagnostics.append(Diagnostic("DynamicBuffer", f"buffer {buffer.name} has non-static type {buffer.type}"))
        if buffer.role is BufferRole.GLOBAL and buffer.initial is None:
            diagnostics.append(Diagnostic("MissingInitializer", f"global {buffer.name} has no payload"))

    entry = module.entry_point
    if entry.num_inputs != len(fn.inputs) or entry.num_outputs != len(fn.results):
        diagnostics.append(
            Diagnostic(
                "EntryArityMismatch",
                f"entry point declares {entry.num_inputs}/{entry.num_outputs}, "
                f"function has {len(fn.inputs)}/{len(fn.results)}",
            )
        )

    stored: set[int] = set()
    for index, it in enumerate(fn.iterates):
        _verify_iterate(index, it, declared, diagnostics)
        written = {id(s.buffer) for s in it.statements() if s.kind is ScalarKind.STORE}
        for stmt in it.statements():
            buffer = stmt.buffer
            if (
                stmt.kind is ScalarKind.LOAD
                and buffer is not None
                and buffer.role in (BufferRole.ALLOC, BufferRole.ACCUMULATOR)
                and buffer.type.shape.elem_count > 0
                and id(buffer) not in stored | written
            ):
                diagnostics.append(Diagnostic("LoadBeforeStore", f"{buffer.name} is read before any store", index))
        stored |= written

    for buffer in fn.results:
        if id(buffer) not in declared:
            diagnostics.append(Diagnostic("UndeclaredBuffer", f"returned buffer {buffer.name} is not allocated"))
    return diagnostics
