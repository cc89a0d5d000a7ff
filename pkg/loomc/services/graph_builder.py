"""Construction helpers for graph functions and modules."""

from __future__ import annotations

import itertools
from typing import Any, Callable, Mapping, Sequence

from loomc.models.graph import (
    MAIN_GRAPH,
    EntryPointDescriptor,
    GraphFunction,
    GraphModule,
    GraphOp,
    GraphValue,
    OpKind,
)
from loomc.models.tensor import TensorType, TensorValue
from loomc.services.op_registry import build_attributes, infer_result_type


def constant_value(value: GraphValue, producers: Mapping[GraphValue, GraphOp]) -> TensorValue | None:
    """Payload of `value` when it is produced by a Constant op."""

    op = producers.get(value)
    if op is None or op.kind is not OpKind.CONSTANT:
        return None
    payload = op.attributes["value"]
    assert isinstance(payload, TensorValue)
    return payload


def make_op(
    kind: OpKind,
    operands: Sequence[GraphValue],
    attributes: Mapping[str, Any] | None,
    result_name: str,
    constant_of: Callable[[GraphValue], TensorValue | None],
    result_type: TensorType | None = None,
) -> GraphOp:
    """Create an op with materialized attributes and an inferred result type."""

    attrs = build_attributes(kind, attributes or {})
    if result_type is None:
        result_type = infer_result_type(
            kind,
            [v.type for v in operands],
            attrs,
            lambda i: constant_of(operands[i]),
        )
    return GraphOp(kind, list(operands), [GraphValue(result_name, result_type)], attrs)


class GraphBuilder:
    """Incrementally builds `main_graph` in topological order."""

    def __init__(self, name: str = MAIN_GRAPH) -> None:
        self.name = name
        self.inputs: list[GraphValue] = []
        self.ops: list[GraphOp] = []
        self._constants: dict[GraphValue, TensorValue] = {}
        self._counter = itertools.count()

    def fresh_name(self, prefix: str) -> str:
        return f"{prefix}_{next(self._counter)}"

    def add_input(self, name: str, type_: TensorType) -> GraphValue:
        value = GraphValue(name, type_)
        self.inputs.append(value)
        return value

    def constant(self, value: TensorValue, name: str | None = None) -> GraphValue:
        result = self.op(OpKind.CONSTANT, [], {"value": value}, name=name)
        self._constants[result] = value
        return result

    def op(
        self,
        kind: OpKind,
        operands: Sequence[GraphValue],
        attributes: Mapping[str, Any] | None = None,
        name: str | None = None,
        result_type: TensorType | None = None,
    ) -> GraphValue:
        op = make_op(
            kind,
            operands,
            attributes,
            name or self.fresh_name(kind.value.lower()),
            self._constants.get,
            result_type,
        )
        self.ops.append(op)
        return op.result

    def build(self, results: Sequence[GraphValue]) -> GraphModule:
        fn = GraphFunction(self.name, list(self.inputs), list(self.ops), list(results))
        entry = EntryPointDescriptor(self.name, len(self.inputs), len(fn.results))
        return GraphModule([fn], entry)
