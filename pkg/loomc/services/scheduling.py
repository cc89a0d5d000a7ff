"""Loop handle construction and schedule transformations (block, permute, skew)."""

from __future__ import annotations

import logging
from typing import Sequence

from loomc.errors import InvalidBounds, InvalidPermutation, InvalidSkew
from loomc.models.loop_ir import BlockInner, BlockOuter, IterateOp, LoopHandle, Original, Skewed

logger = logging.getLogger(__name__)


def define_loops(n: int, bounds: Sequence[tuple[int, int]], names: Sequence[str] | None = None) -> list[LoopHandle]:
    """`n` fresh original loops over the half-open `bounds`."""

    if n < 1:
        raise InvalidBounds(message=f"define_loops needs at least one loop, got {n}")
    if len(bounds) != n:
        raise InvalidBounds(message=f"define_loops {n} got {len(bounds)} bound pair(s)")
    handles = []
    for k, (lb, ub) in enumerate(bounds):
        if int(lb) >= int(ub):
            raise InvalidBounds(message=f"loop {k}: empty range [{lb}, {ub})", details={"loop": k, "lb": lb, "ub": ub})
        name = names[k] if names else f"i{k}"
        handles.append(LoopHandle(name, Original(int(lb), int(ub))))
    return handles


def block(loop: LoopHandle, tile: int) -> tuple[LoopHandle, LoopHandle]:
    """Split `loop` into a tile loop stepping by `tile` and an intra-tile loop."""

    if tile < 1:
        raise InvalidBounds(message=f"tile size must be >= 1, got {tile}")
    outer = LoopHandle(f"{loop.name}o", BlockOuter(loop, tile))
    inner = LoopHandle(f"{loop.name}i", BlockInner(loop, tile, outer))
    return outer, inner


def permute(schedule: Sequence[LoopHandle], perm: Sequence[int]) -> list[LoopHandle]:
    """Reorder so that position k holds `schedule[perm[k]]`."""

    if sorted(perm) != list(range(len(schedule))):
        raise InvalidPermutation(
            message=f"{list(perm)} is not a permutation of {len(schedule)} loop(s)",
            details={"perm": list(perm), "loops": len(schedule)},
        )
    return [schedule[p] for p in perm]


def skew(loop: LoopHandle, along: LoopHandle, factor: int) -> LoopHandle:
    """Shift `loop` by `factor` times the value of the original loop `along`."""

    if not along.is_original:
        raise InvalidSkew(message=f"skew must be along an original loop, {along.name} is derived")
    if loop.root() is along:
        raise InvalidSkew(message=f"cannot skew {loop.name} along its own original loop")
    return LoopHandle(f"{loop.name}s", Skewed(loop, along, int(factor)))


# --- schedules applied to an iterate ------------------------------------------


def _position(iterate: IterateOp, loop: LoopHandle) -> int:
    for k, handle in enumerate(iterate.scheduled):
        if handle is loop:
            return k
    raise InvalidBounds(message=f"{loop.name} is not a scheduled loop of this {iterate.op_kind} nest")


def block_scheduled(iterate: IterateOp, loop: LoopHandle, tile: int) -> tuple[LoopHandle, LoopHandle]:
    """Block a scheduled loop in place: it is replaced by (outer, inner)."""

    k = _position(iterate, loop)
    outer, inner = block(loop, tile)
    iterate.scheduled[k : k + 1] = [outer, inner]
    return outer, inner


def permute_scheduled(iterate: IterateOp, perm: Sequence[int]) -> None:
    iterate.scheduled = permute(iterate.scheduled, perm)


def skew_scheduled(iterate: IterateOp, loop: LoopHandle, along: LoopHandle, factor: int) -> LoopHandle:
    if not any(h is along for h in iterate.originals):
        raise InvalidSkew(message=f"{along.name} is not an original loop of this {iterate.op_kind} nest")
    k = _position(iterate, loop)
    skewed = skew(loop, along, factor)
    iterate.scheduled[k] = skewed
    return skewed


def is_unscheduled(iterate: IterateOp) -> bool:
    return len(iterate.scheduled) == len(iterate.originals) and all(
        s is o for s, o in zip(iterate.scheduled, iterate.originals)
    )


def tile_iterate(iterate: IterateOp, size: int) -> bool:
    """Block every loop of an unscheduled nest by `size`; tile loops go outermost.

    Returns False (and leaves the nest alone) when it already carries a schedule.
    """

    if not is_unscheduled(iterate):
        logger.debug("%s nest already scheduled, tiling skipped", iterate.op_kind)
        return False
    pairs = [block(handle, size) for handle in iterate.originals]
    iterate.scheduled = [outer for outer, _ in pairs] + [inner for _, inner in pairs]
    return True
