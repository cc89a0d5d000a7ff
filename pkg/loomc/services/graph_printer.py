"""Textual form of the graph IR, in the layout of the `onnx` dialect.

    module {
      func @main_graph(%arg0: tensor<3x4x5xf32>, %arg1: tensor<3x4x5xf32>) -> tensor<3x4x5xf32> {
        %0 = "onnx.Add"(%arg0, %arg1) : (tensor<3x4x5xf32>, tensor<3x4x5xf32>) -> tensor<3x4x5xf32>
        std.return %0 : tensor<3x4x5xf32>
      }
      "onnx.EntryPoint"() {func = @main_graph, numInputs = 2 : i32, numOutputs = 1 : i32} : () -> ()
    }

Values are renumbered in definition order, so the text does not depend on
value names and is stable across runs.
"""

from __future__ import annotations

import numpy as np

from loomc.models.graph import AttributeValue, GraphFunction, GraphModule, GraphValue
from loomc.models.tensor import DType, TensorValue


def format_f32(value: float) -> str:
    v = np.float32(value)
    if np.isnan(v):
        return "nan"
    if np.isinf(v):
        return "inf" if v > 0 else "-inf"
    return str(v)


def format_scalar(value: object, dtype: DType) -> str:
    return format_f32(float(value)) if dtype is DType.F32 else str(int(value))  # type: ignore[call-overload]


def format_dense(value: TensorValue) -> str:
    array = value.to_array()

    def nested(a: np.ndarray) -> str:
        if a.ndim == 0:
            return format_scalar(a.item(), value.dtype)
        return "[" + ", ".join(nested(sub) for sub in a) + "]"

    return f"dense<{nested(array)}>"


def format_attribute(value: AttributeValue) -> str:
    if isinstance(value, TensorValue):
        return f"{format_dense(value)} : {value.type}"
    if isinstance(value, tuple):
        return "[" + ", ".join(str(v) for v in value) + "]"
    if isinstance(value, float):
        return format_f32(value)
    return str(value)


def format_attributes(attributes: dict[str, AttributeValue]) -> str:
    if not attributes:
        return ""
    body = ", ".join(f"{k} = {format_attribute(attributes[k])}" for k in sorted(attributes))
    return f" {{{body}}}"


def _format_result_types(types: list[str]) -> str:
    return types[0] if len(types) == 1 else "(" + ", ".join(types) + ")"


def print_function(fn: GraphFunction, indent: str = "  ") -> list[str]:
    names: dict[GraphValue, str] = {}
    for i, value in enumerate(fn.inputs):
        names[value] = f"%arg{i}"
    counter = 0
    for op in fn.ops:
        for result in op.results:
            names[result] = f"%{counter}"
            counter += 1

    def ref(v: GraphValue) -> str:
        return names.get(v, f"%undef_{v.name}")

    args = ", ".join(f"{names[v]}: {v.type}" for v in fn.inputs)
    result_types = _format_result_types([str(v.type) for v in fn.results])
    lines = [f"{indent}func @{fn.name}({args}) -> {result_types} {{"]
    body = indent * 2
    for op in fn.ops:
        results = ", ".join(ref(r) for r in op.results)
        operands = ", ".join(ref(v) for v in op.operands)
        operand_types = ", ".join(str(v.type) for v in op.operands)
        out_types = _format_result_types([str(r.type) for r in op.results])
        lines.append(
            f'{body}{results} = "onnx.{op.kind.value}"({operands}){format_attributes(op.attributes)}'
            f" : ({operand_types}) -> {out_types}"
        )
    returned = ", ".join(ref(v) for v in fn.results)
    returned_types = ", ".join(str(v.type) for v in fn.results)
    lines.append(f"{body}std.return {returned} : {returned_types}")
    lines.append(f"{indent}}}")
    return lines


def print_graph(module: GraphModule) -> str:
    lines = ["module {"]
    for fn in module.functions:
        lines.extend(print_function(fn))
    entry = module.entry_point
    lines.append(
        f'  "onnx.EntryPoint"() {{func = @{entry.func}, numInputs = {entry.num_inputs} : i32, '
        f"numOutputs = {entry.num_outputs} : i32}} : () -> ()"
    )
    lines.append("}")
    return "\n".join(lines) + "\n"
