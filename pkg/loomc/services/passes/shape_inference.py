"""Shape inference: propagate ranks and dims through the graph to a fixpoint."""

from __future__ import annotations

import logging
from typing import Mapping

from loomc.errors import FixpointOverflow, ShapeMismatch
from loomc.models.graph import GraphModule, GraphOp, GraphValue
from loomc.models.tensor import Shape, TensorType
from loomc.services.graph_builder import constant_value
from loomc.services.op_registry import infer_result_type
from loomc.services.passes.result import PassResult

logger = logging.getLogger(__name__)


def merge_types(inferred: TensorType, declared: TensorType, where: str) -> TensorType:
    """Combine an inferred type with what the value already declares.

    An unranked declaration carries only a dtype guess and is replaced. A ranked
    declaration must agree with the inferred type wherever both know a dim.
    """

    if not declared.shape.rank_known:
        return inferred
    if inferred.dtype is not declared.dtype:
        raise ShapeMismatch(message=f"{where}: inferred {inferred}, declared {declared}")
    if not inferred.shape.rank_known:
        return declared
    if inferred.shape.rank != declared.shape.rank:
        raise ShapeMismatch(message=f"{where}: inferred {inferred}, declared {declared}")
    dims = []
    for i, d in zip(inferred.shape.dims, declared.shape.dims):
        if i is not None and d is not None and i != d:
            raise ShapeMismatch(message=f"{where}: inferred {inferred}, declared {declared}")
        dims.append(i if i is not None else d)
    return TensorType(inferred.dtype, Shape.of(*dims))


def _infer_op(index: int, op: GraphOp, producers: Mapping[GraphValue, GraphOp]) -> TensorType:
    try:
        inferred = infer_result_type(
            op.kind,
            [v.type for v in op.operands],
            op.attributes,
            lambda i: constant_value(op.operands[i], producers),
        )
        return merge_types(inferred, op.result.type, f"op #{index} ({op.kind.value})")
    except ShapeMismatch as exc:
        message = exc.message if exc.message.startswith("op #") else f"op #{index} ({op.kind.value}): {exc.message}"
        raise ShapeMismatch(message=message, details={"op_index": index, "op": op.kind.value}) from exc


def pass_shape_inference(module: GraphModule, max_sweeps: int = 64) -> PassResult:
    fn = module.main
    producers = fn.producers()
    changed_any = False
    sweeps = 0
    updates = 0
    while True:
        sweeps += 1
        changed = False
        for index, op in enumerate(fn.ops):
            new_type = _infer_op(index, op, producers)
            if new_type != op.result.type:
                logger.debug("op #%d %s: %s -> %s", index, op.kind.value, op.result.type, new_type)
                op.result.type = new_type
                changed = True
                updates += 1
        changed_any = changed_any or changed
        if not changed:
            break
        if sweeps > max_sweeps:
            raise FixpointOverflow(message=f"shape inference did not converge within {max_sweeps} sweeps")
    unresolved = sum(1 for v in fn.values() if not v.type.shape.is_static)
    if unresolved:
        logger.debug("shape inference left %d value(s) with unknown dims", unresolved)
    return PassResult(
        "shape-inference",
        module,
        changed=changed_any,
        rewrites=updates,
        sweeps=sweeps,
        ops_before=len(fn.ops),
        ops_after=len(fn.ops),
    )
