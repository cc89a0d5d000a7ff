"""Repository layer for serialized affine programs."""

from __future__ import annotations

import base64
import json
import logging
from pathlib import Path
from typing import Any

import numpy as np
from marshmallow import ValidationError as MarshmallowValidationError

from loomc.errors import IoError, ParseError
from loomc.models.affine import AffineFor, AffineItem, AffineIV, AffineNest, AffineProgram
from loomc.models.affine_expr import AffineExpr
from loomc.models.graph import EntryPointDescriptor
from loomc.models.loop_ir import Buffer, BufferRole, ScalarKind, ScalarOp, ScalarType, ScalarValue
from loomc.models.tensor import DType, Shape, TensorType, TensorValue
from loomc.schemas.plan import PLAN_FORMAT, PLAN_VERSION, PlanSchema

logger = logging.getLogger(__name__)


def _encode_data(value: TensorValue) -> str:
    little = value.data.astype(value.dtype.numpy.newbyteorder("<"), copy=False)
    return base64.b64encode(little.tobytes()).decode("ascii")


def _decode_data(text: str, type_: TensorType, name: str) -> TensorValue:
    try:
        raw = base64.b64decode(text.encode("ascii"), validate=True)
    except ValueError as exc:
        raise ParseError(message=f"buffer {name}: payload is not valid base64") from exc
    dtype = type_.dtype.numpy.newbyteorder("<")
    if len(raw) != type_.shape.elem_count * dtype.itemsize:
        raise ParseError(
            message=f"buffer {name}: payload has {len(raw)} bytes, {type_} needs {type_.shape.elem_count * dtype.itemsize}"
        )
    return TensorValue(type_.dtype, type_.shape, np.frombuffer(raw, dtype=dtype).astype(type_.dtype.numpy))


class _NestWriter:
    def __init__(self) -> None:
        self.ivs: dict[int, int] = {}
        self.values: dict[int, int] = {}

    def expr(self, expr: AffineExpr) -> dict[str, Any]:
        return {"const": expr.const, "terms": [[self.ivs[id(s)], c] for s, c in expr.terms]}

    def _value(self, value: ScalarValue) -> int:
        return self.values.setdefault(id(value), len(self.values))

    def op(self, op: ScalarOp) -> dict[str, Any]:
        data: dict[str, Any] = {"kind": op.kind.value}
        if op.result is not None:
            data["result"] = self._value(op.result)
            data["type"] = op.result.type.value
        if op.operands:
            data["operands"] = [self.values[id(v)] for v in op.operands]
        if op.buffer is not None:
            data["buffer"] = op.buffer.name
            data["indices"] = [self.expr(e) for e in op.indices]
        if op.value is not None:
            data["value"] = op.value
        if op.linear:
            data["linear"] = True
        return data

    def items(self, items: list[AffineItem]) -> list[dict[str, Any]]:
        out: list[dict[str, Any]] = []
        for item in items:
            if isinstance(item, AffineFor):
                lowers = [self.expr(e) for e in item.lowers]
                uppers = [self.expr(e) for e in item.uppers]
                index = self.ivs[id(item.iv)] = len(self.ivs)
                loop = {
                    "iv": index,
                    "name": item.iv.name,
                    "lowers": lowers,
                    "uppers": uppers,
                    "step": item.step,
                    "body": self.items(item.body),
                }
                out.append({"loop": loop})
            else:
                out.append({"op": self.op(item)})
        return out


class _NestReader:
    def __init__(self, buffers: dict[str, Buffer]) -> None:
        self.buffers = buffers
        self.ivs: dict[int, AffineIV] = {}
        self.values: dict[int, ScalarValue] = {}

    def expr(self, data: dict[str, Any]) -> AffineExpr:
        out = AffineExpr.constant(data["const"])
        for index, coeff in data["terms"]:
            iv = self.ivs.get(index)
            if iv is None:
                raise ParseError(message=f"expression refers to iv #{index}, which no enclosing loop defines")
            out = out + AffineExpr.var(iv, coeff)
        return out

    def _operand(self, index: int) -> ScalarValue:
        value = self.values.get(index)
        if value is None:
            raise ParseError(message=f"statement uses value #{index} before its definition")
        return value

    def op(self, data: dict[str, Any]) -> ScalarOp:
        kind = ScalarKind(data["kind"])
        result = None
        if data.get("result") is not None:
            result = self.values[data["result"]] = ScalarValue(ScalarType(data["type"]))
        buffer = None
        if data.get("buffer") is not None:
            buffer = self.buffers.get(data["buffer"])
            if buffer is None:
                raise ParseError(message=f"statement uses undeclared buffer {data['buffer']}")
        value: float | int | None = data.get("value")
        if value is not None and kind is ScalarKind.CONSTI:
            value = int(value)
        return ScalarOp(
            kind,
            result,
            tuple(self._operand(v) for v in data["operands"]),
            buffer,
            tuple(self.expr(e) for e in data["indices"]),
            value,
            data["linear"],
        )

    def items(self, items: list[dict[str, Any]]) -> list[AffineItem]:
        out: list[AffineItem] = []
        for item in items:
            if item.get("loop") is not None:
                loop = item["loop"]
                lowers = tuple(self.expr(e) for e in loop["lowers"])
                uppers = tuple(self.expr(e) for e in loop["uppers"])
                iv = self.ivs[loop["iv"]] = AffineIV(loop["name"])
                out.append(AffineFor(iv, lowers, uppers, loop["step"], self.items(loop["body"])))
            else:
                out.append(self.op(item["op"]))
        return out


def program_to_plan(program: AffineProgram) -> dict[str, Any]:
    def buffer(b: Buffer) -> dict[str, Any]:
        data: dict[str, Any] = {
            "name": b.name,
            "role": b.role.value,
            "dtype": b.type.dtype.value,
            "dims": list(b.type.shape.static_dims),
        }
        if b.initial is not None:
            data["data"] = _encode_data(b.initial)
        return data

    nests = []
    for nest in program.nests:
        writer = _NestWriter()
        body = writer.items(nest.body)
        nests.append(
            {
                "op_kind": nest.op_kind,
                "schedule_depth": nest.schedule_depth,
                "original_ivs": [writer.expr(e) for e in nest.original_ivs],
                "body": body,
            }
        )
    entry = program.entry_point
    return {
        "format": PLAN_FORMAT,
        "version": PLAN_VERSION,
        "name": program.name,
        "entry_point": {"func": entry.func, "num_inputs": entry.num_inputs, "num_outputs": entry.num_outputs},
        "inputs": [buffer(b) for b in program.inputs],
        "buffers": [buffer(b) for b in program.buffers],
        "results": [b.name for b in program.results],
        "nests": nests,
    }


def plan_to_program(plan: dict[str, Any]) -> AffineProgram:
    buffers: dict[str, Buffer] = {}

    def buffer(data: dict[str, Any]) -> Buffer:
        type_ = TensorType(DType(data["dtype"]), Shape.from_dims(data["dims"]))
        initial = _decode_data(data["data"], type_, data["name"]) if data.get("data") is not None else None
        b = Buffer(data["name"], type_, BufferRole(data["role"]), initial)
        buffers[b.name] = b
        return b

    inputs = [buffer(b) for b in plan["inputs"]]
    allocs = [buffer(b) for b in plan["buffers"]]
    nests = []
    for nest in plan["nests"]:
        reader = _NestReader(buffers)
        body = reader.items(nest["body"])
        # original ivs only refer to scheduled loops, all defined by now
        original_ivs = tuple(reader.expr(e) for e in nest["original_ivs"])
        nests.append(AffineNest(nest["op_kind"], body, original_ivs, nest["schedule_depth"]))
    entry = plan["entry_point"]
    return AffineProgram(
        plan["name"],
        inputs,
        allocs,
        nests,
        [buffers[name] for name in plan["results"]],
        EntryPointDescriptor(entry["func"], entry["num_inputs"], entry["num_outputs"]),
    )


class PlanRepository:
    """Load and store affine programs as JSON plans."""

    def __init__(self) -> None:
        self._schema = PlanSchema()

    def dumps(self, program: AffineProgram) -> str:
        return json.dumps(program_to_plan(program), indent=1, sort_keys=True) + "\n"

    def loads(self, text: str, source: str = "<plan>") -> AffineProgram:
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(message=f"{source}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from exc
        try:
            plan = self._schema.load(raw)
        except MarshmallowValidationError as exc:
            raise ParseError(message=f"{source}: malformed plan", details=exc.messages) from exc
        program = plan_to_program(plan)
        logger.debug("Loaded plan %s with %d nest(s)", source, len(program.nests))
        return program

    def load(self, path: str | Path) -> AffineProgram:
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise IoError(message=f"cannot read plan {path}: {exc.strerror or exc}") from exc
        return self.loads(text, source=str(path))

    def store(self, program: AffineProgram, path: str | Path) -> Path:
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(self.dumps(program), encoding="utf-8")
        except OSError as exc:
            raise IoError(message=f"cannot write plan {path}: {exc.strerror or exc}") from exc
        return path


def is_plan(raw: Any) -> bool:
    return isinstance(raw, dict) and raw.get("format") == PLAN_FORMAT

