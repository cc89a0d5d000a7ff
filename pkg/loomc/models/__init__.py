"""IR data types."""

from loomc.models.affine import AffineFor, AffineIV, AffineNest, AffineProgram
from loomc.models.graph import GraphFunction, GraphModule, GraphOp, GraphValue, OpKind
from loomc.models.loop_ir import Buffer, IterateOp, LoopFunction, LoopHandle, LoopModule, ScalarOp
from loomc.models.tensor import DType, Shape, TensorType, TensorValue

__all__ = [
    "AffineFor",
    "AffineIV",
    "AffineNest",
    "AffineProgram",
    "Buffer",
    "DType",
    "GraphFunction",
    "GraphModule",
    "GraphOp",
    "GraphValue",
    "IterateOp",
    "LoopFunction",
    "LoopHandle",
    "LoopModule",
    "OpKind",
    "ScalarOp",
    "Shape",
    "TensorType",
    "TensorValue",
]
