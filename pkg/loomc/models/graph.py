"""SSA dataflow graph IR mirroring the `onnx` dialect."""

from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Union

from loomc.models.tensor import TensorType, TensorValue

MAIN_GRAPH = "main_graph"


class OpKind(str, Enum):
    ADD = "Add"
    MUL = "Mul"
    SUB = "Sub"
    ABS = "Abs"
    EXP = "Exp"
    RELU = "Relu"
    LEAKY_RELU = "LeakyRelu"
    MATMUL = "MatMul"
    GEMM = "Gemm"
    CONV = "Conv"
    MAX_POOL = "MaxPool"
    REDUCE_SUM = "ReduceSum"
    REDUCE_L1 = "ReduceL1"
    RESHAPE = "Reshape"
    IDENTITY = "Identity"
    CONSTANT = "Constant"

    @classmethod
    def parse(cls, name: str) -> OpKind | None:
        try:
            return cls(name)
        except ValueError:
            return None


AttributeValue = Union[float, int, tuple[int, ...], TensorValue]

_value_ids = itertools.count()


@dataclass(eq=False)
class GraphValue:
    """An SSA value. Identity-compared; `name` is only used for export."""

    name: str
    type: TensorType
    uid: int = field(default_factory=lambda: next(_value_ids))

    def __repr__(self) -> str:
        return f"%{self.name}: {self.type}"


@dataclass(eq=False)
class GraphOp:
    kind: OpKind
    operands: list[GraphValue]
    results: list[GraphValue]
    attributes: dict[str, AttributeValue] = field(default_factory=dict)

    @property
    def result(self) -> GraphValue:
        return self.results[0]

    def __repr__(self) -> str:
        ops = ", ".join(v.name for v in self.operands)
        return f"{self.kind.value}({ops}) -> {[v.name for v in self.results]}"


@dataclass(frozen=True)
class EntryPointDescriptor:
    func: str
    num_inputs: int
    num_outputs: int


@dataclass(eq=False)
class GraphFunction:
    name: str
    inputs: list[GraphValue]
    ops: list[GraphOp]
    results: list[GraphValue]

    def producers(self) -> dict[GraphValue, GraphOp]:
        return {res: op for op in self.ops for res in op.results}

    def uses(self) -> dict[GraphValue, int]:
        """Use counts, function results included."""

        counts: Counter[GraphValue] = Counter()
        for op in self.ops:
            counts.update(op.operands)
        counts.update(self.results)
        return counts

    def replace_all_uses(self, old: GraphValue, new: GraphValue) -> None:
        for op in self.ops:
            op.operands = [new if v is old else v for v in op.operands]
        self.results = [new if v is old else v for v in self.results]

    def remove_dead_ops(self) -> int:
        """Drop ops whose results are unused; returns how many were removed."""

        removed = 0
        while True:
            uses = self.uses()
            dead = [op for op in self.ops if all(uses[r] == 0 for r in op.results)]
            if not dead:
                return removed
            dead_ids = {id(op) for op in dead}
            self.ops = [op for op in self.ops if id(op) not in dead_ids]
            removed += len(dead)

    def values(self) -> Iterator[GraphValue]:
        yield from self.inputs
        for op in self.ops:
            yield from op.results


@dataclass(eq=False)
class GraphModule:
    functions: list[GraphFunction]
    entry_point: EntryPointDescriptor

    @property
    def main(self) -> GraphFunction:
        for fn in self.functions:
            if fn.name == self.entry_point.func:
                return fn
        raise KeyError(self.entry_point.func)

    def clone(self) -> GraphModule:
        """Deep copy with fresh values; constant payloads are shared (immutable)."""

        functions = []
        for fn in self.functions:
            mapping: dict[GraphValue, GraphValue] = {}

            def remap(v: GraphValue) -> GraphValue:
                if v not in mapping:
                    mapping[v] = GraphValue(v.name, v.type)
                return mapping[v]

            inputs = [remap(v) for v in fn.inputs]
            ops = [
                GraphOp(
                    op.kind,
                    [remap(v) for v in op.operands],
                    [remap(v) for v in op.results],
                    dict(op.attributes),
                )
                for op in fn.ops
            ]
            functions.append(GraphFunction(fn.name, inputs, ops, [remap(v) for v in fn.results]))
        return GraphModule(functions, self.entry_point)

    def structurally_equal(self, other: GraphModule) -> bool:
        from loomc.services.graph_printer import print_graph

        return self.entry_point == other.entry_point and print_graph(self) == print_graph(other)


@dataclass(frozen=True)
class Diagnostic:
    kind: str
    reason: str
    op_index: int | None = None

    def __str__(self) -> str:
        where = f"op #{self.op_index}: " if self.op_index is not None else ""
        return f"{self.kind}: {where}{self.reason}"


def op_stats(module: GraphModule) -> dict[str, int]:
    """Per-kind op counts of the entry function, sorted by kind."""

    counts = Counter(op.kind.value for op in module.main.ops)
    return dict(sorted(counts.items()))
