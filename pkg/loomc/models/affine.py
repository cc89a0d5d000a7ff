"""Fully materialized affine loop nests, the interpreter's input."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Union

from loomc.models.affine_expr import AffineExpr
from loomc.models.graph import EntryPointDescriptor
from loomc.models.loop_ir import Buffer, ScalarOp


@dataclass(eq=False)
class AffineIV:
    name: str

    def __repr__(self) -> str:
        return f"iv({self.name})"


@dataclass(eq=False)
class AffineFor:
    """`for iv = max(lowers) to min(uppers) step step`."""

    iv: AffineIV
    lowers: tuple[AffineExpr, ...]
    uppers: tuple[AffineExpr, ...]
    step: int = 1
    body: list[AffineItem] = field(default_factory=list)


AffineItem = Union[AffineFor, ScalarOp]


@dataclass(eq=False)
class AffineNest:
    """One lowered iterate.

    The outermost `schedule_depth` loops are the scheduled ones; `original_ivs`
    give the unscheduled loop values in terms of their ivs.
    """

    op_kind: str
    body: list[AffineItem]
    original_ivs: tuple[AffineExpr, ...] = ()
    schedule_depth: int = 0

    def loops(self) -> Iterator[AffineFor]:
        def walk(items: list[AffineItem]) -> Iterator[AffineFor]:
            for item in items:
                if isinstance(item, AffineFor):
                    yield item
                    yield from walk(item.body)

        return walk(self.body)


@dataclass(eq=False)
class AffineProgram:
    name: str
    inputs: list[Buffer]
    buffers: list[Buffer]
    nests: list[AffineNest]
    results: list[Buffer]
    entry_point: EntryPointDescriptor
