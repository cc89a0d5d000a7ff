"""Textual form of affine programs.

Non-constant loop bounds are printed through named maps hoisted above the
module, numbered in order of first use:

    #map0 = affine_map<(d0) -> (d0)>
    #map1 = affine_map<(d0) -> (d0 + 2)>
    module {
      func @main_graph(%arg0: memref<10xf32>) -> memref<10xf32> {
        %0 = alloc() : memref<10xf32>
        affine.for %arg1 = 0 to 10 step 2 {
          affine.for %arg2 = #map0(%arg1) to #map1(%arg1) {
"""

from __future__ import annotations

from typing import Hashable, Sequence

from loomc.models.affine import AffineFor, AffineItem, AffineIV, AffineProgram
from loomc.models.affine_expr import AffineExpr
from loomc.services.loop_printer import (
    ValueNamer,
    declare_buffers,
    format_entry_point,
    format_result_types,
    format_scalar_op,
)


class _AffinePrinter:
    def __init__(self, program: AffineProgram) -> None:
        self.program = program
        self.namer = ValueNamer(len(program.inputs))
        self.maps: dict[str, str] = {}
        self.lines: list[str] = []

    def _index(self, expr: AffineExpr) -> str:
        return expr.render(lambda sym: self.namer[sym])

    def _map(self, exprs: Sequence[AffineExpr], scope: Sequence[AffineIV]) -> str:
        used = {id(s) for e in exprs for s in e.symbols}
        dims = [iv for iv in scope if id(iv) in used]
        dim_names = {id(iv): f"d{k}" for k, iv in enumerate(dims)}

        def dim_name(sym: Hashable) -> str:
            return dim_names[id(sym)]

        results = ", ".join(e.render(dim_name) for e in exprs)
        text = f"affine_map<({', '.join(dim_names[id(iv)] for iv in dims)}) -> ({results})>"
        name = self.maps.setdefault(text, f"#map{len(self.maps)}")
        return f"{name}({', '.join(self.namer[iv] for iv in dims)})"

    def _bound(self, exprs: Sequence[AffineExpr], combine: str, scope: Sequence[AffineIV]) -> str:
        if len(exprs) == 1 and exprs[0].is_constant:
            return str(exprs[0].const)
        applied = self._map(exprs, scope)
        return f"{combine} {applied}" if len(exprs) > 1 else applied

    def _items(self, items: list[AffineItem], scope: list[AffineIV], indent: str) -> None:
        for item in items:
            if isinstance(item, AffineFor):
                lower = self._bound(item.lowers, "max", scope)
                upper = self._bound(item.uppers, "min", scope)
                iv = self.namer.iv(item.iv)
                step = f" step {item.step}" if item.step != 1 else ""
                self.lines.append(f"{indent}affine.for {iv} = {lower} to {upper}{step} {{")
                self._items(item.body, scope + [item.iv], indent + "  ")
                self.lines.append(f"{indent}}}")
            else:
                self.lines.append(indent + format_scalar_op(item, self.namer, self._index))

    def print(self) -> str:
        program = self.program
        args = [f"{self.namer.arg(b, k)}: {b.type.render('memref')}" for k, b in enumerate(program.inputs)]
        result_types = format_result_types([b.type.render("memref") for b in program.results])
        self.lines = ["module {", f"  func @{program.name}({', '.join(args)}) -> {result_types} {{"]
        self.lines.extend(declare_buffers(self.namer, program.buffers, "    "))
        for nest in program.nests:
            self._items(nest.body, [], "    ")
        returned = ", ".join(self.namer[b] for b in program.results)
        returned_types = ", ".join(b.type.render("memref") for b in program.results)
        self.lines.append(f"    std.return {returned} : {returned_types}")
        self.lines.append("  }")
        self.lines.append("  " + format_entry_point(program.entry_point))
        self.lines.append("}")
        header = [f"{name} = {text}" for text, name in self.maps.items()]
        return "\n".join(header + self.lines) + "\n"


def emit_affine_text(program: AffineProgram) -> str:
    return _AffinePrinter(program).print()
