"""Parser for the textual graph IR produced by `graph_printer.print_graph`."""

from __future__ import annotations

import re
from typing import Any

import numpy as np

from loomc.errors import IrSyntaxError, LoomError, UnsupportedOp, VerificationError
from loomc.models.graph import (
    EntryPointDescriptor,
    GraphFunction,
    GraphModule,
    GraphOp,
    GraphValue,
    OpKind,
)
from loomc.models.tensor import DType, Shape, TensorType, TensorValue
from loomc.services.op_registry import build_attributes
from loomc.services.verifier import verify

_NUMBER = re.compile(r"-?(?:\d+\.\d*(?:[eE][+-]?\d+)?|\d+[eE][+-]?\d+|\d+|inf)|nan")
_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_.]*")
_VALUE = re.compile(r"%[A-Za-z0-9_]+")
_INT = re.compile(r"-?\d+$")


class _Cursor:
    """Character cursor with line/column tracking."""

    def __init__(self, text: str) -> None:
        self.text = text
        self.pos = 0

    def location(self, pos: int | None = None) -> tuple[int, int]:
        pos = self.pos if pos is None else pos
        line = self.text.count("\n", 0, pos) + 1
        column = pos - (self.text.rfind("\n", 0, pos) + 1) + 1
        return line, column

    def error(self, message: str, pos: int | None = None) -> IrSyntaxError:
        line, column = self.location(pos)
        return IrSyntaxError(message, line, column)

    def skip(self) -> None:
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def at_end(self) -> bool:
        self.skip()
        return self.pos >= len(self.text)

    def peek(self, literal: str) -> bool:
        self.skip()
        return self.text.startswith(literal, self.pos)

    def accept(self, literal: str) -> bool:
        if self.peek(literal):
            self.pos += len(literal)
            return True
        return False

    def expect(self, literal: str) -> None:
        if not self.accept(literal):
            found = self.text[self.pos : self.pos + 12].split("\n")[0] or "end of input"
            raise self.error(f"expected '{literal}', found '{found}'")

    def match(self, pattern: re.Pattern[str], what: str) -> str:
        self.skip()
        m = pattern.match(self.text, self.pos)
        if not m:
            raise self.error(f"expected {what}")
        self.pos = m.end()
        return m.group(0)

    def until_angle_close(self) -> str:
        """Consume `<...>` (already past '<') up to the matching '>'."""

        depth = 1
        start = self.pos
        while self.pos < len(self.text):
            ch = self.text[self.pos]
            if ch == "<":
                depth += 1
            elif ch == ">":
                depth -= 1
                if depth == 0:
                    body = self.text[start : self.pos]
                    self.pos += 1
                    return body
            self.pos += 1
        raise self.error("unterminated '<'", start)


def parse_tensor_type(cur: _Cursor) -> TensorType:
    cur.skip()
    start = cur.pos
    cur.expect("tensor<")
    body = cur.until_angle_close().strip()
    parts = body.split("x")
    try:
        dtype = DType(parts[-1])
    except ValueError:
        raise cur.error(f"unknown element type '{parts[-1]}'", start) from None
    dims = parts[:-1]
    if dims == ["*"]:
        return TensorType(dtype, Shape.unranked())
    parsed: list[int | None] = []
    for d in dims:
        if d == "?":
            parsed.append(None)
        elif d.isdigit():
            parsed.append(int(d))
        else:
            raise cur.error(f"bad dimension '{d}' in tensor type", start)
    return TensorType(dtype, Shape.of(*parsed))


def _parse_number(cur: _Cursor) -> int | float:
    token = cur.match(_NUMBER, "a number")
    return int(token) if _INT.match(token) else float(token)


def _parse_nested(cur: _Cursor) -> Any:
    if cur.accept("["):
        items: list[Any] = []
        if not cur.accept("]"):
            while True:
                items.append(_parse_nested(cur))
                if cur.accept("]"):
                    break
                cur.expect(",")
        return items
    return _parse_number(cur)


def _parse_dense(cur: _Cursor) -> TensorValue:
    start = cur.pos
    cur.expect("dense<")
    nested = _parse_nested(cur)
    cur.expect(">")
    cur.expect(":")
    type_ = parse_tensor_type(cur)
    if not type_.shape.is_static:
        raise cur.error("dense attribute needs a static type", start)
    try:
        array = np.array(nested, dtype=type_.dtype.numpy)
    except (ValueError, OverflowError):
        raise cur.error("ragged or non-numeric dense literal", start) from None
    if array.shape != type_.shape.static_dims and not (array.size == 0 and type_.shape.elem_count == 0):
        raise cur.error(f"dense literal of shape {list(array.shape)} does not match {type_}", start)
    return TensorValue(type_.dtype, type_.shape, array.reshape(-1))


def _parse_attribute_value(cur: _Cursor) -> Any:
    if cur.peek("dense<"):
        return _parse_dense(cur)
    if cur.accept("["):
        items: list[Any] = []
        if not cur.accept("]"):
            while True:
                items.append(_parse_number(cur))
                if cur.accept("]"):
                    break
                cur.expect(",")
        return items
    return _parse_number(cur)


def _type_list(cur: _Cursor) -> list[TensorType]:
    types: list[TensorType] = []
    cur.expect("(")
    if cur.accept(")"):
        return types
    while True:
        types.append(parse_tensor_type(cur))
        if cur.accept(")"):
            return types
        cur.expect(",")


class _FunctionParser:
    def __init__(self, cur: _Cursor) -> None:
        self.cur = cur
        self.values: dict[str, GraphValue] = {}
        self.forward: dict[str, GraphValue] = {}
        self.defined: set[str] = set()

    def use(self, name: str, type_: TensorType) -> GraphValue:
        if name in self.values:
            return self.values[name]
        if name not in self.forward:
            self.forward[name] = GraphValue(name.lstrip("%"), type_)
        return self.forward[name]

    def define(self, name: str, type_: TensorType, pos: int) -> GraphValue:
        if name in self.defined:
            raise self.cur.error(f"redefinition of {name}", pos)
        self.defined.add(name)
        value = self.forward.pop(name, None)
        if value is None:
            value = GraphValue(name.lstrip("%"), type_)
        else:
            value.type = type_
        self.values[name] = value
        return value

    def parse(self) -> GraphFunction:
        cur = self.cur
        cur.expect("func")
        cur.expect("@")
        fn_name = cur.match(_IDENT, "a function name")
        cur.expect("(")
        inputs: list[GraphValue] = []
        if not cur.accept(")"):
            while True:
                cur.skip()
                pos = cur.pos
                name = cur.match(_VALUE, "an argument name")
                cur.expect(":")
                inputs.append(self.define(name, parse_tensor_type(cur), pos))
                if cur.accept(")"):
                    break
                cur.expect(",")
        cur.expect("->")
        if cur.peek("("):
            declared_results = _type_list(cur)
        else:
            declared_results = [parse_tensor_type(cur)]
        cur.expect("{")

        ops: list[GraphOp] = []
        while not cur.peek("std.return"):
            ops.append(self.parse_op())

        cur.expect("std.return")
        names: list[str] = []
        while cur.peek("%"):
            names.append(cur.match(_VALUE, "a value"))
            if not cur.accept(","):
                break
        types: list[TensorType] = []
        if cur.accept(":"):
            while True:
                types.append(parse_tensor_type(cur))
                if not cur.accept(","):
                    break
        if len(types) != len(names):
            raise cur.error(f"return lists {len(names)} values but {len(types)} types")
        if types != declared_results:
            raise cur.error("return types do not match the function signature")
        results = [self.use(n, t) for n, t in zip(names, types)]
        cur.expect("}")
        return GraphFunction(fn_name, inputs, ops, results)

    def parse_op(self) -> GraphOp:
        cur = self.cur
        cur.skip()
        pos = cur.pos
        result_name = cur.match(_VALUE, "an op result or 'std.return'")
        cur.expect("=")
        cur.expect('"onnx.')
        kind_name = cur.match(_IDENT, "an op name")
        cur.expect('"')
        kind = OpKind.parse(kind_name)
        if kind is None:
            line, column = cur.location(pos)
            raise UnsupportedOp(
                message=f"{line}:{column}: unsupported operator onnx.{kind_name}",
                details={"op": kind_name, "line": line, "column": column},
            )
        cur.expect("(")
        operand_names: list[str] = []
        if not cur.accept(")"):
            while True:
                operand_names.append(cur.match(_VALUE, "an operand"))
                if cur.accept(")"):
                    break
                cur.expect(",")
        raw_attrs: dict[str, Any] = {}
        if cur.accept("{"):
            while True:
                name = cur.match(_IDENT, "an attribute name")
                cur.expect("=")
                raw_attrs[name] = _parse_attribute_value(cur)
                if cur.accept("}"):
                    break
                cur.expect(",")
        cur.expect(":")
        operand_types = _type_list(cur)
        cur.expect("->")
        result_type = parse_tensor_type(cur)
        if len(operand_types) != len(operand_names):
            raise cur.error(f"{len(operand_names)} operands but {len(operand_types)} operand types", pos)
        try:
            attrs = build_attributes(kind, raw_attrs)
        except LoomError as exc:
            raise cur.error(exc.message, pos) from exc
        operands = []
        for name, type_ in zip(operand_names, operand_types):
            value = self.use(name, type_)
            if value.type != type_:
                raise cur.error(f"{name} has type {value.type}, used as {type_}", pos)
            operands.append(value)
        result = self.define(result_name, result_type, pos)
        return GraphOp(kind, operands, [result], attrs)


def _parse_entry_point(cur: _Cursor) -> EntryPointDescriptor:
    cur.expect('"onnx.EntryPoint"')
    cur.expect("(")
    cur.expect(")")
    cur.expect("{")
    cur.expect("func")
    cur.expect("=")
    cur.expect("@")
    func = cur.match(_IDENT, "a function name")
    cur.expect(",")
    cur.expect("numInputs")
    cur.expect("=")
    num_inputs = int(cur.match(_NUMBER, "an integer"))
    cur.expect(":")
    cur.expect("i32")
    cur.expect(",")
    cur.expect("numOutputs")
    cur.expect("=")
    num_outputs = int(cur.match(_NUMBER, "an integer"))
    cur.expect(":")
    cur.expect("i32")
    cur.expect("}")
    cur.expect(":")
    cur.expect("(")
    cur.expect(")")
    cur.expect("->")
    cur.expect("(")
    cur.expect(")")
    return EntryPointDescriptor(func, num_inputs, num_outputs)


def parse_graph_text(text: str) -> GraphModule:
    """Parse printer output back into a verified module."""

    cur = _Cursor(text)
    cur.expect("module")
    cur.expect("{")
    functions: list[GraphFunction] = []
    entry: EntryPointDescriptor | None = None
    while not cur.accept("}"):
        if cur.peek("func"):
            functions.append(_FunctionParser(cur).parse())
        elif cur.peek('"onnx.EntryPoint"'):
            if entry is not None:
                raise cur.error("duplicate onnx.EntryPoint")
            entry = _parse_entry_point(cur)
        else:
            raise cur.error("expected 'func', '\"onnx.EntryPoint\"' or '}'")
    if not cur.at_end():
        raise cur.error("trailing text after module")
    if entry is None:
        raise cur.error("module has no onnx.EntryPoint")

    module = GraphModule(functions, entry)
    diagnostics = verify(module)
    if diagnostics:
        raise VerificationError(
            message="; ".join(str(d) for d in diagnostics),
            details=diagnostics,
        )
    return module
