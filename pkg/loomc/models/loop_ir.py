"""Loop-level IR: loop nests whose schedule is kept apart from their semantics.

An `IterateOp` names the original loops it computes over and, separately, the
scheduled loops it is executed by. Schedules are loop handles derived from the
originals (block, skew) and reordered (permute); the body only ever refers to
original induction variables.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Union

from loomc.models.affine_expr import AffineExpr
from loomc.models.graph import EntryPointDescriptor
from loomc.models.tensor import TensorType, TensorValue

_handle_ids = itertools.count()


@dataclass(frozen=True)
class Original:
    lb: int
    ub: int


@dataclass(frozen=True)
class BlockOuter:
    parent: LoopHandle
    tile: int


@dataclass(frozen=True)
class BlockInner:
    parent: LoopHandle
    tile: int
    outer: LoopHandle


@dataclass(frozen=True)
class Skewed:
    parent: LoopHandle
    along: LoopHandle
    factor: int


Origin = Union[Original, BlockOuter, BlockInner, Skewed]


@dataclass(eq=False)
class LoopHandle:
    name: str
    origin: Origin
    id: int = field(default_factory=lambda: next(_handle_ids))

    @property
    def is_original(self) -> bool:
        return isinstance(self.origin, Original)

    @property
    def parent(self) -> LoopHandle | None:
        return None if isinstance(self.origin, Original) else self.origin.parent

    def root(self) -> LoopHandle:
        handle = self
        while handle.parent is not None:
            handle = handle.parent
        return handle

    def __repr__(self) -> str:
        return f"loop({self.name})"


@dataclass(eq=False)
class ReductionLoop:
    """Unscheduled inner loop: `for iv = max(lowers) to min(uppers)`.

    Bounds are affine in the iterate's original induction variables.
    """

    name: str
    lowers: tuple[AffineExpr, ...]
    uppers: tuple[AffineExpr, ...]

    def __repr__(self) -> str:
        return f"reduce({self.name})"


class BufferRole(str, Enum):
    INPUT = "input"
    ALLOC = "alloc"
    GLOBAL = "global"
    ACCUMULATOR = "accumulator"


@dataclass(eq=False)
class Buffer:
    name: str
    type: TensorType
    role: BufferRole
    initial: TensorValue | None = None

    def __repr__(self) -> str:
        return f"buffer({self.name}: {self.type.render('memref')})"


class ScalarType(str, Enum):
    F32 = "f32"
    I64 = "i64"
    I1 = "i1"


class ScalarKind(str, Enum):
    LOAD = "load"
    STORE = "store"
    CONSTF = "constf"
    CONSTI = "consti"
    ADD = "add"
    SUB = "sub"
    MUL = "mul"
    DIV = "div"
    MAX = "max"
    ABS = "abs"
    EXP = "exp"
    CMP_GE = "cmp_ge"
    SELECT = "select"


BINARY_KINDS = frozenset({ScalarKind.ADD, ScalarKind.SUB, ScalarKind.MUL, ScalarKind.DIV, ScalarKind.MAX})
UNARY_KINDS = frozenset({ScalarKind.ABS, ScalarKind.EXP})


@dataclass(eq=False)
class ScalarValue:
    type: ScalarType

    def __repr__(self) -> str:
        return f"scalar({self.type.value})"


@dataclass(eq=False)
class ScalarOp:
    """One scalar statement.

    `load`/`store` address `buffer` with affine `indices` (or a single row-major
    offset when `linear`); `store` writes `operands[0]`. Constants carry `value`.
    """

    kind: ScalarKind
    result: ScalarValue | None = None
    operands: tuple[ScalarValue, ...] = ()
    buffer: Buffer | None = None
    indices: tuple[AffineExpr, ...] = ()
    value: float | int | None = None
    linear: bool = False

    def with_indices(self, indices: tuple[AffineExpr, ...]) -> ScalarOp:
        return ScalarOp(self.kind, self.result, self.operands, self.buffer, indices, self.value, self.linear)


@dataclass(eq=False)
class IterateOp:
    """A perfect nest over `originals`, executed in the order of `scheduled`.

    For every point of the nest the prologue runs once, the body runs once per
    point of the (possibly empty) reduction nest, then the epilogue runs.
    """

    op_kind: str
    originals: list[LoopHandle]
    scheduled: list[LoopHandle]
    body: list[ScalarOp]
    reductions: list[ReductionLoop] = field(default_factory=list)
    prologue: list[ScalarOp] = field(default_factory=list)
    epilogue: list[ScalarOp] = field(default_factory=list)

    def statements(self) -> Iterator[ScalarOp]:
        yield from self.prologue
        yield from self.body
        yield from self.epilogue

    def bounds(self) -> list[tuple[int, int]]:
        out = []
        for handle in self.originals:
            assert isinstance(handle.origin, Original)
            out.append((handle.origin.lb, handle.origin.ub))
        return out


@dataclass(eq=False)
class LoopFunction:
    name: str
    inputs: list[Buffer]
    buffers: list[Buffer]
    iterates: list[IterateOp]
    results: list[Buffer]


@dataclass(eq=False)
class LoopModule:
    function: LoopFunction
    entry_point: EntryPointDescriptor
