"""Graph -> loop lowering: one buffer per value, one iterate nest per op."""

from __future__ import annotations

import logging
from typing import Callable, Sequence

from loomc.errors import DynamicShapeUnsupported, UnloweredOp, VerificationError
from loomc.models.affine_expr import AffineExpr
from loomc.models.graph import GraphModule, GraphOp, GraphValue, OpKind
from loomc.models.loop_ir import Buffer, BufferRole, IterateOp, LoopFunction, LoopModule, ScalarKind, ScalarValue
from loomc.models.tensor import DType, Shape, TensorType, TensorValue, strides
from loomc.services.loop_builder import BodyBuilder, add_reduction, new_iterate
from loomc.services.loop_verifier import verify_loop_module
from loomc.services.op_registry import normalize_axes

logger = logging.getLogger(__name__)

_ACCUMULATOR_TYPE = TensorType(DType.F32, Shape.of(1))
_BINARY = {OpKind.ADD: ScalarKind.ADD, OpKind.SUB: ScalarKind.SUB, OpKind.MUL: ScalarKind.MUL}
_UNARY = {OpKind.ABS: ScalarKind.ABS, OpKind.EXP: ScalarKind.EXP}


def broadcast_indices(operand: Shape, out_dims: Sequence[int], ivs: Sequence[AffineExpr]) -> list[AffineExpr]:
    """Index an operand broadcast (trailing-aligned) against a nest over `out_dims`."""

    dims = operand.static_dims
    lead = len(out_dims) - len(dims)
    out: list[AffineExpr] = []
    for k, dim in enumerate(dims):
        position = lead + k
        if dim == 1 and out_dims[position] != 1:
            out.append(AffineExpr.constant(0))
        else:
            out.append(ivs[position])
    return out


def _window_bounds(
    iterate: IterateOp, out_iv: AffineExpr, size: int, kernel: int, stride: int, pad: int
) -> AffineExpr:
    # padded reads are skipped: kernel offset k keeps 0 <= stride * o - pad + k < size
    return add_reduction(iterate, (0, pad - out_iv * stride), (kernel, size + pad - out_iv * stride))


class GraphToLoopsLowering:
    """Emits a `LoopModule` for a shape-inferred, fully static graph module."""

    def __init__(self, module: GraphModule) -> None:
        self.module = module
        self.buffers: dict[GraphValue, Buffer] = {}
        self.allocs: list[Buffer] = []
        self.iterates: list[IterateOp] = []
        self._names: set[str] = set()
        self.rules: dict[OpKind, Callable[[GraphOp, list[Buffer], Buffer], None]] = {
            OpKind.ADD: self._lower_binary,
            OpKind.SUB: self._lower_binary,
            OpKind.MUL: self._lower_binary,
            OpKind.ABS: self._lower_unary,
            OpKind.EXP: self._lower_unary,
            OpKind.RELU: self._lower_relu,
            OpKind.LEAKY_RELU: self._lower_leaky_relu,
            OpKind.IDENTITY: self._lower_identity,
            OpKind.MATMUL: self._lower_matmul,
            OpKind.GEMM: self._lower_gemm,
            OpKind.CONV: self._lower_conv,
            OpKind.MAX_POOL: self._lower_max_pool,
            OpKind.REDUCE_SUM: self._lower_reduce_sum,
            OpKind.RESHAPE: self._lower_reshape,
        }

    def lower(self) -> LoopModule:
        fn = self.module.main
        for value in fn.values():
            if not value.type.shape.is_static:
                raise DynamicShapeUnsupported(
                    message=f"value {value.name} has non-static type {value.type}",
                    details={"value": value.name},
                )

        inputs = []
        for k, value in enumerate(fn.inputs):
            buffer = Buffer(self._unique(f"arg{k}"), value.type, BufferRole.INPUT)
            self.buffers[value] = buffer
            inputs.append(buffer)

        for op in fn.ops:
            if op.kind is OpKind.CONSTANT:
                payload = op.attributes["value"]
                assert isinstance(payload, TensorValue)
                buffer = Buffer(self._unique(op.result.name), op.result.type, BufferRole.GLOBAL, initial=payload)
                self.allocs.append(buffer)
                self.buffers[op.result] = buffer
                continue
            rule = self.rules.get(op.kind)
            if rule is None:
                raise UnloweredOp(message=f"no lowering rule for {op.kind.value}", details={"op": op.kind.value})
            out = Buffer(self._unique(op.result.name), op.result.type, BufferRole.ALLOC)
            self.allocs.append(out)
            self.buffers[op.result] = out
            if out.type.shape.elem_count == 0:
                logger.debug("%s produces an empty tensor, no nest emitted", op.kind.value)
                continue
            rule(op, [self.buffers[v] for v in op.operands], out)

        function = LoopFunction(fn.name, inputs, self.allocs, self.iterates, [self.buffers[v] for v in fn.results])
        loop_module = LoopModule(function, self.module.entry_point)
        diagnostics = verify_loop_module(loop_module)
        if diagnostics:
            raise VerificationError(
                message=f"lowered loop module is invalid: {diagnostics[0]}",
                details=diagnostics,
            )
        logger.debug("lowered %d op(s) into %d nest(s)", len(fn.ops), len(self.iterates))
        return loop_module

    # --- helpers -------------------------------------------------------------

    def _unique(self, base: str) -> str:
        name, k = base, 1
        while name in self._names:
            name = f"{base}_{k}"
            k += 1
        self._names.add(name)
        return name

    def _nest(self, op: GraphOp, out: Buffer) -> tuple[IterateOp, list[AffineExpr], tuple[int, ...]]:
        dims = out.type.shape.static_dims
        iterate, ivs = new_iterate(op.kind.value, dims)
        self.iterates.append(iterate)
        return iterate, ivs, dims

    def _accumulator(self, op: GraphOp) -> Buffer:
        acc = Buffer(self._unique(f"{op.result.name}_acc"), _ACCUMULATOR_TYPE, BufferRole.ACCUMULATOR)
        self.allocs.append(acc)
        return acc

    def _accumulate(self, body: BodyBuilder, acc: Buffer, kind: ScalarKind, term: ScalarValue) -> None:
        current = body.load(acc, (0,))
        body.store(body.binary(kind, current, term), acc, (0,))

    # --- rules ---------------------------------------------------------------

    def _lower_binary(self, op: GraphOp, operands: list[Buffer], out: Buffer) -> None:
        iterate, ivs, dims = self._nest(op, out)
        body = BodyBuilder(iterate.body)
        lhs = body.load(operands[0], broadcast_indices(operands[0].type.shape, dims, ivs))
        rhs = body.load(operands[1], broadcast_indices(operands[1].type.shape, dims, ivs))
        body.store(body.binary(_BINARY[op.kind], lhs, rhs), out, ivs)

    def _lower_unary(self, op: GraphOp, operands: list[Buffer], out: Buffer) -> None:
        iterate, ivs, _ = self._nest(op, out)
        body = BodyBuilder(iterate.body)
        body.store(body.unary(_UNARY[op.kind], body.load(operands[0], ivs)), out, ivs)

    def _lower_identity(self, op: GraphOp, operands: list[Buffer], out: Buffer) -> None:
        iterate, ivs, _ = self._nest(op, out)
        body = BodyBuilder(iterate.body)
        body.store(body.load(operands[0], ivs), out, ivs)

    def _lower_relu(self, op: GraphOp, operands: list[Buffer], out: Buffer) -> None:
        iterate, ivs, _ = self._nest(op, out)
        body = BodyBuilder(iterate.body)
        x = body.load(operands[0], ivs)
        zero = body.constf(0.0)
        body.store(body.select(body.cmp_ge(x, zero), x, zero), out, ivs)

    def _lower_leaky_relu(self, op: GraphOp, operands: list[Buffer], out: Buffer) -> None:
        iterate, ivs, _ = self._nest(op, out)
        body = BodyBuilder(iterate.body)
        x = body.load(operands[0], ivs)
        zero = body.constf(0.0)
        cond = body.cmp_ge(x, zero)
        scaled = body.binary(ScalarKind.MUL, x, body.constf(float(op.attributes["alpha"])))  # type: ignore[arg-type]
        body.store(body.select(cond, x, scaled), out, ivs)

    def _matmul_nest(self, op: GraphOp, a: Buffer, b: Buffer, out: Buffer) -> tuple[IterateOp, list[AffineExpr], Buffer]:
        iterate, ivs, _ = self._nest(op, out)
        k_extent = a.type.shape.static_dims[1]
        acc = self._accumulator(op)
        prologue = BodyBuilder(iterate.prologue)
        prologue.store(prologue.constf(0.0), acc, (0,))
        k = add_reduction(iterate, (0,), (k_extent,))
        body = BodyBuilder(iterate.body)
        product = body.binary(ScalarKind.MUL, body.load(a, (ivs[0], k)), body.load(b, (k, ivs[1])))
        self._accumulate(body, acc, ScalarKind.ADD, product)
        return iterate, ivs, acc

    def _lower_matmul(self, op: GraphOp, operands: list[Buffer], out: Buffer) -> None:
        iterate, ivs, acc = self._matmul_nest(op, operands[0], operands[1], out)
        epilogue = BodyBuilder(iterate.epilogue)
        epilogue.store(epilogue.load(acc, (0,)), out, ivs)

    def _lower_gemm(self, op: GraphOp, operands: list[Buffer], out: Buffer) -> None:
        a, b, c = operands
        iterate, ivs, acc = self._matmul_nest(op, a, b, out)
        epilogue = BodyBuilder(iterate.epilogue)
        scaled = epilogue.binary(
            ScalarKind.MUL, epilogue.load(acc, (0,)), epilogue.constf(float(op.attributes["alpha"]))  # type: ignore[arg-type]
        )
        bias = epilogue.load(c, broadcast_indices(c.type.shape, out.type.shape.static_dims, ivs))
        scaled_bias = epilogue.binary(ScalarKind.MUL, bias, epilogue.constf(float(op.attributes["beta"])))  # type: ignore[arg-type]
        epilogue.store(epilogue.binary(ScalarKind.ADD, scaled, scaled_bias), out, ivs)

    def _lower_conv(self, op: GraphOp, operands: list[Buffer], out: Buffer) -> None:
        x, w = operands
        _, channels, height, width = x.type.shape.static_dims
        _, _, kernel_h, kernel_w = w.type.shape.static_dims
        sh, sw = op.attributes["strides"]  # type: ignore[misc]
        pt, pl, _, _ = op.attributes["pads"]  # type: ignore[misc]

        iterate, ivs, _ = self._nest(op, out)
        n, co, oh, ow = ivs
        acc = self._accumulator(op)
        prologue = BodyBuilder(iterate.prologue)
        prologue.store(prologue.constf(0.0), acc, (0,))
        ci = add_reduction(iterate, (0,), (channels,))
        kh = _window_bounds(iterate, oh, height, kernel_h, sh, pt)
        kw = _window_bounds(iterate, ow, width, kernel_w, sw, pl)
        body = BodyBuilder(iterate.body)
        pixel = body.load(x, (n, ci, oh * sh - pt + kh, ow * sw - pl + kw))
        weight = body.load(w, (co, ci, kh, kw))
        self._accumulate(body, acc, ScalarKind.ADD, body.binary(ScalarKind.MUL, pixel, weight))
        epilogue = BodyBuilder(iterate.epilogue)
        epilogue.store(epilogue.load(acc, (0,)), out, ivs)

    def _lower_max_pool(self, op: GraphOp, operands: list[Buffer], out: Buffer) -> None:
        (x,) = operands
        _, _, height, width = x.type.shape.static_dims
        kernel_h, kernel_w = op.attributes["kernel_shape"]  # type: ignore[misc]
        sh, sw = op.attributes["strides"]  # type: ignore[misc]
        pt, pl, _, _ = op.attributes["pads"]  # type: ignore[misc]

        iterate, ivs, _ = self._nest(op, out)
        n, c, oh, ow = ivs
        acc = self._accumulator(op)
        prologue = BodyBuilder(iterate.prologue)
        prologue.store(prologue.constf(float("-inf")), acc, (0,))
        kh = _window_bounds(iterate, oh, height, kernel_h, sh, pt)
        kw = _window_bounds(iterate, ow, width, kernel_w, sw, pl)
        body = BodyBuilder(iterate.body)
        pixel = body.load(x, (n, c, oh * sh - pt + kh, ow * sw - pl + kw))
        self._accumulate(body, acc, ScalarKind.MAX, pixel)
        epilogue = BodyBuilder(iterate.epilogue)
        epilogue.store(epilogue.load(acc, (0,)), out, ivs)

    def _lower_reduce_sum(self, op: GraphOp, operands: list[Buffer], out: Buffer) -> None:
        (x,) = operands
        in_dims = x.type.shape.static_dims
        axes = set(normalize_axes(op.attributes["axes"], len(in_dims)) or range(len(in_dims)))  # type: ignore[arg-type]
        keepdims = bool(op.attributes["keepdims"])

        iterate, ivs, _ = self._nest(op, out)
        acc = self._accumulator(op)
        prologue = BodyBuilder(iterate.prologue)
        prologue.store(prologue.constf(0.0), acc, (0,))
        indices: list[AffineExpr] = []
        kept = 0
        for axis, dim in enumerate(in_dims):
            if axis in axes:
                indices.append(add_reduction(iterate, (0,), (dim,)))
            else:
                indices.append(ivs[axis if keepdims else kept])
                kept += 1
        body = BodyBuilder(iterate.body)
        self._accumulate(body, acc, ScalarKind.ADD, body.load(x, indices))
        epilogue = BodyBuilder(iterate.epilogue)
        epilogue.store(epilogue.load(acc, (0,)), out, ivs)

    def _lower_reshape(self, op: GraphOp, operands: list[Buffer], out: Buffer) -> None:
        iterate, ivs, _ = self._nest(op, out)
        offset = AffineExpr.constant(0)
        for iv, stride in zip(ivs, strides(out.type.shape)):
            offset = offset + iv * stride
        body = BodyBuilder(iterate.body)
        body.store(body.load(operands[0], (offset,), linear=True), out, ivs)


def lower_graph_to_loops(module: GraphModule) -> LoopModule:
    """`--convert-onnx-to-krnl` analog."""

    return GraphToLoopsLowering(module).lower()
