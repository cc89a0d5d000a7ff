"""Textual form of the loop IR, in the layout of the `krnl` dialect.

    %0 = alloc() : memref<3x4x5xf32>
    %1:3 = krnl.define_loops 3
    krnl.iterate(%1#0, %1#1, %1#2) with (%1#0 -> %arg2 = 0 to 3, ...) {
      %2 = affine.load %arg0[%arg2, %arg3, %arg4] : memref<3x4x5xf32>
      ...
    }

Derived loops are printed as `krnl.block` / `krnl.skew` results ahead of the
iterate that schedules them; reduction loops open a `krnl.reduce` region.
"""

from __future__ import annotations

from typing import Callable, Hashable, Sequence

from loomc.models.affine_expr import AffineExpr
from loomc.models.graph import EntryPointDescriptor
from loomc.models.loop_ir import (
    BlockInner,
    BlockOuter,
    Buffer,
    BufferRole,
    IterateOp,
    LoopHandle,
    LoopModule,
    ScalarKind,
    ScalarOp,
    ScalarType,
    Skewed,
)
from loomc.services.graph_printer import format_dense, format_f32

_STD_NAMES = {
    ScalarKind.ADD: "add",
    ScalarKind.SUB: "sub",
    ScalarKind.MUL: "mul",
    ScalarKind.DIV: "div",
    ScalarKind.MAX: "max",
    ScalarKind.ABS: "abs",
}


def std_name(kind: ScalarKind, type_: ScalarType) -> str:
    if kind is ScalarKind.EXP:
        return "exp"
    suffix = "f" if type_ is ScalarType.F32 else "i"
    return _STD_NAMES[kind] + suffix


def format_result_types(types: Sequence[str]) -> str:
    return types[0] if len(types) == 1 else "(" + ", ".join(types) + ")"


def format_entry_point(entry: EntryPointDescriptor) -> str:
    return (
        f'"krnl.entry_point"() {{func = @{entry.func}, numInputs = {entry.num_inputs} : i32, '
        f"numOutputs = {entry.num_outputs} : i32}} : () -> ()"
    )


class ValueNamer:
    """`%argN` for function arguments and induction variables, `%N` for everything else."""

    def __init__(self, num_args: int) -> None:
        self._names: dict[int, str] = {}
        self._next_arg = num_args
        self._next_value = 0

    def arg(self, key: object, index: int) -> str:
        name = f"%arg{index}"
        self._names[id(key)] = name
        return name

    def iv(self, key: object) -> str:
        name = f"%arg{self._next_arg}"
        self._next_arg += 1
        self._names[id(key)] = name
        return name

    def fresh(self) -> str:
        name = f"%{self._next_value}"
        self._next_value += 1
        return name

    def value(self, key: object) -> str:
        name = self.fresh()
        self._names[id(key)] = name
        return name

    def alias(self, key: object, name: str) -> None:
        self._names[id(key)] = name

    def __getitem__(self, key: object) -> str:
        return self._names.get(id(key), "%<undef>")

    def __contains__(self, key: object) -> bool:
        return id(key) in self._names


def global_line(name: str, buffer: Buffer) -> str:
    assert buffer.initial is not None
    memref = buffer.type.render("memref")
    return (
        f'{name} = "krnl.global"() {{name = "{buffer.name}", value = {format_dense(buffer.initial)} : '
        f"{buffer.initial.type}}} : () -> {memref}"
    )


def declare_buffers(namer: ValueNamer, buffers: Sequence[Buffer], indent: str) -> list[str]:
    lines = []
    for buffer in buffers:
        name = namer.value(buffer)
        if buffer.role is BufferRole.GLOBAL:
            lines.append(indent + global_line(name, buffer))
        else:
            lines.append(f"{indent}{name} = alloc() : {buffer.type.render('memref')}")
    return lines


def format_scalar_op(op: ScalarOp, namer: ValueNamer, index: Callable[[AffineExpr], str]) -> str:
    """One scalar statement; `index` renders an index expression."""

    if op.kind in (ScalarKind.LOAD, ScalarKind.STORE):
        assert op.buffer is not None
        memref = op.buffer.type.render("memref")
        subscript = ", ".join(index(e) for e in op.indices)
        if op.kind is ScalarKind.STORE:
            return f"affine.store {namer[op.operands[0]]}, {namer[op.buffer]}[{subscript}] : {memref}"
        load = "affine.load_linear" if op.linear else "affine.load"
        return f"{namer.value(op.result)} = {load} {namer[op.buffer]}[{subscript}] : {memref}"

    assert op.result is not None
    result = namer.value(op.result)
    operands = ", ".join(namer[v] for v in op.operands)
    if op.kind is ScalarKind.CONSTF:
        return f"{result} = constant {format_f32(float(op.value))} : f32"  # type: ignore[arg-type]
    if op.kind is ScalarKind.CONSTI:
        return f"{result} = constant {int(op.value)} : i64"  # type: ignore[arg-type]
    if op.kind is ScalarKind.CMP_GE:
        return f'{result} = cmpf "oge", {operands} : {op.operands[0].type.value}'
    if op.kind is ScalarKind.SELECT:
        return f"{result} = select {operands} : {op.result.type.value}"
    return f"{result} = {std_name(op.kind, op.result.type)} {operands} : {op.result.type.value}"


def _format_bound(exprs: Sequence[AffineExpr], combine: str, name: Callable[[Hashable], str]) -> str:
    rendered = [e.render(name) for e in exprs]
    if len(rendered) == 1:
        return rendered[0]
    return f"{combine}({', '.join(rendered)})"


class _LoopPrinter:
    def __init__(self, module: LoopModule) -> None:
        self.module = module
        self.namer = ValueNamer(len(module.function.inputs))
        self.lines: list[str] = []

    def _name_of(self, sym: Hashable) -> str:
        return self.namer[sym]

    def _index(self, expr: AffineExpr) -> str:
        return expr.render(self._name_of)

    def _define_handles(self, iterate: IterateOp, indent: str) -> None:
        group = self.namer.fresh()
        self.lines.append(f"{indent}{group}:{len(iterate.originals)} = krnl.define_loops {len(iterate.originals)}")
        for k, handle in enumerate(iterate.originals):
            self.namer.alias(handle, f"{group}#{k}")

        # handle ids grow with creation, so parents print before their children
        blocks: dict[int, str] = {}
        for handle in sorted(self._derived(iterate), key=lambda h: h.id):
            origin = handle.origin
            if isinstance(origin, Skewed):
                name = self.namer.value(handle)
                self.lines.append(
                    f"{indent}{name} = krnl.skew {self.namer[origin.parent]}, {self.namer[origin.along]} "
                    f"{origin.factor} : (!krnl.loop, !krnl.loop) -> !krnl.loop"
                )
                continue
            assert isinstance(origin, (BlockOuter, BlockInner))
            outer = origin.outer if isinstance(origin, BlockInner) else handle
            name = blocks.get(id(outer))
            if name is None:
                name = blocks[id(outer)] = self.namer.fresh()
                self.lines.append(
                    f"{indent}{name}:2 = krnl.block {self.namer[origin.parent]} {origin.tile} "
                    ": (!krnl.loop) -> (!krnl.loop, !krnl.loop)"
                )
            self.namer.alias(handle, f"{name}#{1 if isinstance(origin, BlockInner) else 0}")

    @staticmethod
    def _derived(iterate: IterateOp) -> list[LoopHandle]:
        seen: dict[int, LoopHandle] = {}
        for handle in iterate.scheduled:
            node: LoopHandle | None = handle
            while node is not None and not node.is_original:
                seen.setdefault(id(node), node)
                node = node.parent
        return list(seen.values())

    def _iterate(self, iterate: IterateOp, indent: str) -> None:
        self._define_handles(iterate, indent)
        scheduled = ", ".join(self.namer[h] for h in iterate.scheduled)
        originals = []
        for handle, (lb, ub) in zip(iterate.originals, iterate.bounds()):
            handle_ref = self.namer[handle]
            iv = self.namer.iv(handle)
            originals.append(f"{handle_ref} -> {iv} = {lb} to {ub}")
        self.lines.append(f"{indent}krnl.iterate({scheduled}) with ({', '.join(originals)}) {{")
        inner = indent + "  "
        for op in iterate.prologue:
            self.lines.append(inner + format_scalar_op(op, self.namer, self._index))
        if iterate.reductions:
            loops = []
            for reduction in iterate.reductions:
                lower = _format_bound(reduction.lowers, "max", self._name_of)
                upper = _format_bound(reduction.uppers, "min", self._name_of)
                loops.append(f"{self.namer.iv(reduction)} = {lower} to {upper}")
            self.lines.append(f"{inner}krnl.reduce ({', '.join(loops)}) {{")
            for op in iterate.body:
                self.lines.append(inner + "  " + format_scalar_op(op, self.namer, self._index))
            self.lines.append(f"{inner}}}")
        else:
            for op in iterate.body:
                self.lines.append(inner + format_scalar_op(op, self.namer, self._index))
        for op in iterate.epilogue:
            self.lines.append(inner + format_scalar_op(op, self.namer, self._index))
        self.lines.append(f"{indent}}}")

    def print(self) -> str:
        fn = self.module.function
        args = []
        for k, buffer in enumerate(fn.inputs):
            args.append(f"{self.namer.arg(buffer, k)}: {buffer.type.render('memref')}")
        result_types = format_result_types([b.type.render("memref") for b in fn.results])
        self.lines = ["module {", f"  func @{fn.name}({', '.join(args)}) -> {result_types} {{"]
        self.lines.extend(declare_buffers(self.namer, fn.buffers, "    "))
        for iterate in fn.iterates:
            self._iterate(iterate, "    ")
        returned = ", ".join(self.namer[b] for b in fn.results)
        returned_types = ", ".join(b.type.render("memref") for b in fn.results)
        self.lines.append(f"    std.return {returned} : {returned_types}")
        self.lines.append("  }")
        self.lines.append("  " + format_entry_point(self.module.entry_point))
        self.lines.append("}")
        return "\n".join(self.lines) + "\n"


def print_loop_module(module: LoopModule) -> str:
    return _LoopPrinter(module).print()
