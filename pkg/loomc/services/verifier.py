"""Structural verifier for graph modules."""

from __future__ import annotations

from loomc.models.graph import MAIN_GRAPH, Diagnostic, GraphFunction, GraphModule, GraphValue
from loomc.models.tensor import TensorValue
from loomc.services.op_registry import REGISTRY, AttrKind, AttrSpec


def _attribute_ok(spec: AttrSpec, value: object) -> bool:
    if spec.kind is AttrKind.FLOAT:
        return isinstance(value, float)
    if spec.kind is AttrKind.INT:
        return isinstance(value, int) and not isinstance(value, bool)
    if spec.kind is AttrKind.INTS:
        return isinstance(value, tuple) and all(isinstance(v, int) and not isinstance(v, bool) for v in value)
    return isinstance(value, TensorValue)


def _verify_function(fn: GraphFunction) -> list[Diagnostic]:
    diagnostics: list[Diagnostic] = []
    defined: set[GraphValue] = set()
    defined_later = {r for op in fn.ops for r in op.results}

    for value in fn.inputs:
        if value in defined:
            diagnostics.append(Diagnostic("MultipleDefinition", f"input %{value.name} listed twice"))
        defined.add(value)

    for index, op in enumerate(fn.ops):
        spec = REGISTRY.get(op.kind)
        if spec is None:
            diagnostics.append(Diagnostic("UnknownOpKind", f"{op.kind!r} is not registered", index))
            continue
        if len(op.operands) != spec.num_operands:
            diagnostics.append(
                Diagnostic(
                    "OperandCountMismatch",
                    f"{op.kind.value} takes {spec.num_operands} operands, got {len(op.operands)}",
                    index,
                )
            )
        if len(op.results) != spec.num_results:
            diagnostics.append(
                Diagnostic(
                    "ResultCountMismatch",
                    f"{op.kind.value} produces {spec.num_results} results, got {len(op.results)}",
                    index,
                )
            )
        names = {a.name for a in spec.attributes}
        for name in sorted(set(op.attributes) - names):
            diagnostics.append(Diagnostic("UnknownAttribute", f"{op.kind.value} has no attribute {name}", index))
        for a in spec.attributes:
            if a.name not in op.attributes:
                diagnostics.append(Diagnostic("MissingAttribute", f"{op.kind.value} lacks attribute {a.name}", index))
            elif not _attribute_ok(a, op.attributes[a.name]):
                diagnostics.append(
                    Diagnostic("AttributeTypeMismatch", f"attribute {a.name} must be {a.kind.value}", index)
                )
        for operand in op.operands:
            if operand in defined:
                continue
            if operand in defined_later:
                diagnostics.append(
                    Diagnostic("SSADominanceViolation", f"%{operand.name} is used before its definition", index)
                )
            else:
                diagnostics.append(Diagnostic("UndefinedValue", f"%{operand.name} is never defined", index))
        for result in op.results:
            if result in defined:
                diagnostics.append(Diagnostic("MultipleDefinition", f"%{result.name} is defined twice", index))
            defined.add(result)

    for value in fn.results:
        if value not in defined:
            diagnostics.append(Diagnostic("UndefinedValue", f"returned value %{value.name} is never defined"))
    return diagnostics


def verify(module: GraphModule) -> list[Diagnostic]:
    """Return one diagnostic per violated invariant; empty when the module is valid."""

    diagnostics: list[Diagnostic] = []
    names = [fn.name for fn in module.functions]
    if names.count(MAIN_GRAPH) == 0:
        diagnostics.append(Diagnostic("MissingMainGraph", f"no function named {MAIN_GRAPH}"))
    for name in sorted({n for n in names if names.count(n) > 1}):
        diagnostics.append(Diagnostic("DuplicateFunction", f"function {name} defined {names.count(name)} times"))
    for name in names:
        if name != MAIN_GRAPH:
            diagnostics.append(Diagnostic("ExtraFunction", f"only {MAIN_GRAPH} is supported, found {name}"))

    entry = module.entry_point
    if entry.num_inputs < 0 or entry.num_outputs < 1:
        diagnostics.append(
            Diagnostic(
                "InvalidEntryPoint",
                f"numInputs must be >= 0 and numOutputs >= 1, got {entry.num_inputs}/{entry.num_outputs}",
            )
        )
    target = next((fn for fn in module.functions if fn.name == entry.func), None)
    if target is None:
        diagnostics.append(Diagnostic("MissingEntryFunction", f"entry point names missing function @{entry.func}"))
    else:
        if entry.num_inputs != len(target.inputs) or entry.num_outputs != len(target.results):
            diagnostics.append(
                Diagnostic(
                    "EntryArityMismatch",
                    f"entry point declares {entry.num_inputs} inputs / {entry.num_outputs} outputs, "
                    f"@{target.name} has {len(target.inputs)} / {len(target.results)}",
                )
            )

    for fn in module.functions:
        diagnostics.extend(_verify_function(fn))
    return diagnostics
