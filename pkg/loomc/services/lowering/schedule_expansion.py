"""Expansion of an iterate's schedule into affine loop bounds.

Every scheduled handle becomes one affine loop. The value of a non-scheduled
handle is recovered from the handle derived from it:

    block(p)        -> p = inner
    skew(p, a, f)   -> p = skewed - f * a

Bounds of a derived loop come from its parent's range:

    block outer     [L, U) step s * t
    block inner     [outer, min(outer + s * t, U)) step s   (no min when t divides U - L)
    skew            [L + f * a, U + f * a) step s
"""

from __future__ import annotations

from dataclasses import dataclass

from loomc.errors import ScheduleExpansionError
from loomc.models.affine import AffineIV
from loomc.models.affine_expr import AffineExpr
from loomc.models.loop_ir import BlockInner, BlockOuter, IterateOp, LoopHandle, Original, Skewed


@dataclass(frozen=True)
class LoopBounds:
    handle: LoopHandle
    iv: AffineIV
    lowers: tuple[AffineExpr, ...]
    uppers: tuple[AffineExpr, ...]
    step: int


@dataclass(frozen=True)
class ScheduleExpansion:
    loops: tuple[LoopBounds, ...]
    originals: dict[int, AffineExpr]  # id(original handle) -> value in scheduled ivs

    def original_value(self, handle: LoopHandle) -> AffineExpr | None:
        return self.originals.get(id(handle))


def _fail(kind: str, message: str) -> ScheduleExpansionError:
    return ScheduleExpansionError(message=message, details={"kind": kind})


class _Expander:
    def __init__(self, iterate: IterateOp) -> None:
        self.iterate = iterate
        self.ivs: dict[int, AffineIV] = {}
        self.children: dict[int, list[LoopHandle]] = {}
        self._values: dict[int, AffineExpr] = {}
        self._resolving: set[int] = set()
        self._ranges: dict[int, tuple[tuple[AffineExpr, ...], tuple[AffineExpr, ...], int]] = {}

    def check_tree(self) -> None:
        it = self.iterate
        for handle in it.originals:
            if not handle.is_original:
                raise _fail("InvalidOriginal", f"{handle.name} is listed as an original loop but is derived")
        seen: set[int] = set()
        for handle in it.scheduled:
            if id(handle) in seen:
                raise _fail("DuplicateSchedule", f"{handle.name} is scheduled twice")
            seen.add(id(handle))
            self.ivs[id(handle)] = AffineIV(handle.name)

        reachable: dict[int, LoopHandle] = {}
        for handle in it.scheduled:
            node: LoopHandle | None = handle
            while node is not None and id(node) not in reachable:
                reachable[id(node)] = node
                parent = node.parent
                if parent is not None:
                    self.children.setdefault(id(parent), []).append(node)
                node = parent

        original_ids = {id(h) for h in it.originals}
        for node in reachable.values():
            if node.parent is None and id(node) not in original_ids:
                raise _fail("ScheduleCoverage", f"scheduled loop derives from {node.name}, not an original loop here")
        for handle in it.originals:
            if id(handle) not in reachable:
                raise _fail("ScheduleCoverage", f"original loop {handle.name} is not covered by the schedule")

        for key, kids in self.children.items():
            parent = reachable[key]
            if key in self.ivs:
                raise _fail("ScheduleCoverage", f"{parent.name} is scheduled and also transformed")
            if len(kids) == 1 and isinstance(kids[0].origin, Skewed):
                continue
            if len(kids) == 2:
                outer = next((k for k in kids if isinstance(k.origin, BlockOuter)), None)
                inner = next((k for k in kids if isinstance(k.origin, BlockInner)), None)
                if outer is not None and inner is not None and inner.origin.outer is outer:  # type: ignore[union-attr]
                    continue
            if len(kids) == 1 and isinstance(kids[0].origin, (BlockOuter, BlockInner)):
                raise _fail("IncompleteBlock", f"only one half of the blocked loop {parent.name} is scheduled")
            raise _fail("ScheduleCoverage", f"{parent.name} is transformed more than once")

    def value(self, handle: LoopHandle) -> AffineExpr:
        key = id(handle)
        if key in self._values:
            return self._values[key]
        if key in self._resolving:
            raise _fail("ScheduleCycle", f"value of {handle.name} depends on itself through skews")
        self._resolving.add(key)
        if key in self.ivs:
            result = AffineExpr.var(self.ivs[key])
        else:
            kids = self.children.get(key)
            if not kids:
                raise _fail("ScheduleCoverage", f"value of {handle.name} is not determined by the schedule")
            inner = next((k for k in kids if isinstance(k.origin, BlockInner)), None)
            if inner is not None:
                result = self.value(inner)
            else:
                skewed = kids[0]
                assert isinstance(skewed.origin, Skewed)
                result = self.value(skewed) - self.value(skewed.origin.along) * skewed.origin.factor
        self._resolving.discard(key)
        self._values[key] = result
        return result

    def range(self, handle: LoopHandle) -> tuple[tuple[AffineExpr, ...], tuple[AffineExpr, ...], int]:
        key = id(handle)
        if key in self._ranges:
            return self._ranges[key]
        origin = handle.origin
        if isinstance(origin, Original):
            result = ((AffineExpr.constant(origin.lb),), (AffineExpr.constant(origin.ub),), 1)
        elif isinstance(origin, BlockOuter):
            lowers, uppers, step = self.range(origin.parent)
            result = (lowers, uppers, step * origin.tile)
        elif isinstance(origin, BlockInner):
            lowers, uppers, step = self.range(origin.parent)
            start = self.value(origin.outer)
            span = step * origin.tile
            even = False
            if len(lowers) == 1 and len(uppers) == 1:
                extent = uppers[0] - lowers[0]
                even = extent.is_constant and extent.const % span == 0
            tile_end = (start + span,)
            result = ((start,), tile_end if even else tile_end + uppers, step)
        else:
            lowers, uppers, step = self.range(origin.parent)
            shift = self.value(origin.along) * origin.factor
            result = (tuple(lo + shift for lo in lowers), tuple(up + shift for up in uppers), step)
        self._ranges[key] = result
        return result

    def expand(self) -> ScheduleExpansion:
        self.check_tree()
        loops: list[LoopBounds] = []
        enclosing: set[int] = set()
        for handle in self.iterate.scheduled:
            lowers, uppers, step = self.range(handle)
            for expr in lowers + uppers:
                for sym in expr.symbols:
                    if id(sym) not in enclosing:
                        raise _fail(
                            "ScheduleOrder",
                            f"bounds of {handle.name} depend on {getattr(sym, 'name', sym)}, "
                            "which does not enclose it",
                        )
            iv = self.ivs[id(handle)]
            loops.append(LoopBounds(handle, iv, lowers, uppers, step))
            enclosing.add(id(iv))
        originals = {id(h): self.value(h) for h in self.iterate.originals}
        return ScheduleExpansion(tuple(loops), originals)


def expand_schedule(iterate: IterateOp) -> ScheduleExpansion:
    """Affine bounds for every scheduled loop plus each original iv in terms of them."""

    return _Expander(iterate).expand()
