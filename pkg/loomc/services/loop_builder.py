"""Helpers for building iterate bodies."""

from __future__ import annotations

from typing import Sequence

from loomc.models.affine_expr import AffineExpr, AffineLike
from loomc.models.loop_ir import (
    BINARY_KINDS,
    UNARY_KINDS,
    Buffer,
    IterateOp,
    ReductionLoop,
    ScalarKind,
    ScalarOp,
    ScalarType,
    ScalarValue,
)
from loomc.models.tensor import DType
from loomc.services.scheduling import define_loops


def _scalar_type(buffer: Buffer) -> ScalarType:
    return ScalarType.F32 if buffer.type.dtype is DType.F32 else ScalarType.I64


class BodyBuilder:
    """Appends scalar statements to `ops`."""

    def __init__(self, ops: list[ScalarOp] | None = None) -> None:
        self.ops: list[ScalarOp] = ops if ops is not None else []

    def _emit(self, op: ScalarOp) -> ScalarValue | None:
        self.ops.append(op)
        return op.result

    def load(self, buffer: Buffer, indices: Sequence[AffineLike], linear: bool = False) -> ScalarValue:
        result = ScalarValue(_scalar_type(buffer))
        self._emit(
            ScalarOp(ScalarKind.LOAD, result, (), buffer, tuple(AffineExpr.of(i) for i in indices), linear=linear)
        )
        return result

    def store(self, value: ScalarValue, buffer: Buffer, indices: Sequence[AffineLike]) -> None:
        self._emit(ScalarOp(ScalarKind.STORE, None, (value,), buffer, tuple(AffineExpr.of(i) for i in indices)))

    def constf(self, value: float) -> ScalarValue:
        result = ScalarValue(ScalarType.F32)
        self._emit(ScalarOp(ScalarKind.CONSTF, result, value=float(value)))
        return result

    def consti(self, value: int) -> ScalarValue:
        result = ScalarValue(ScalarType.I64)
        self._emit(ScalarOp(ScalarKind.CONSTI, result, value=int(value)))
        return result

    def binary(self, kind: ScalarKind, lhs: ScalarValue, rhs: ScalarValue) -> ScalarValue:
        assert kind in BINARY_KINDS
        result = ScalarValue(lhs.type)
        self._emit(ScalarOp(kind, result, (lhs, rhs)))
        return result

    def unary(self, kind: ScalarKind, operand: ScalarValue) -> ScalarValue:
        assert kind in UNARY_KINDS
        result = ScalarValue(operand.type)
        self._emit(ScalarOp(kind, result, (operand,)))
        return result

    def cmp_ge(self, lhs: ScalarValue, rhs: ScalarValue) -> ScalarValue:
        result = ScalarValue(ScalarType.I1)
        self._emit(ScalarOp(ScalarKind.CMP_GE, result, (lhs, rhs)))
        return result

    def select(self, cond: ScalarValue, if_true: ScalarValue, if_false: ScalarValue) -> ScalarValue:
        result = ScalarValue(if_true.type)
        self._emit(ScalarOp(ScalarKind.SELECT, result, (cond, if_true, if_false)))
        return result


def new_iterate(op_kind: str, dims: Sequence[int]) -> tuple[IterateOp, list[AffineExpr]]:
    """An unscheduled nest over `dims` (one dummy loop for rank 0) and its iv expressions."""

    if dims:
        loops = define_loops(len(dims), [(0, d) for d in dims])
        ivs = [AffineExpr.var(h) for h in loops]
    else:
        loops = define_loops(1, [(0, 1)])
        ivs = []
    iterate = IterateOp(op_kind, list(loops), list(loops), [])
    return iterate, ivs


def add_reduction(
    iterate: IterateOp,
    lowers: Sequence[AffineLike],
    uppers: Sequence[AffineLike],
) -> AffineExpr:
    loop = ReductionLoop(
        f"r{len(iterate.reductions)}",
        tuple(AffineExpr.of(v) for v in lowers),
        tuple(AffineExpr.of(v) for v in uppers),
    )
    iterate.reductions.append(loop)
    return AffineExpr.var(loop)
