"""Import and export of on-disk models (`model.json` + `.tensor` payloads)."""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from loomc.errors import ParseError, PayloadSizeMismatch, UnsupportedOp, VerificationError
from loomc.models.graph import (
    MAIN_GRAPH,
    EntryPointDescriptor,
    GraphFunction,
    GraphModule,
    GraphOp,
    GraphValue,
    OpKind,
)
from loomc.models.tensor import DType, Shape, TensorType, TensorValue
from loomc.repositories.model_repository import MANIFEST_NAME, ModelRepository
from loomc.repositories.payload_repository import TENSOR_SUFFIX, PayloadRepository
from loomc.services.op_registry import REGISTRY, AttrKind, build_attributes
from loomc.services.verifier import verify

logger = logging.getLogger(__name__)

# ONNX attributes accepted only at their default value, then dropped.
_TOLERATED: dict[OpKind, dict[str, Any]] = {
    OpKind.GEMM: {"transA": 0, "transB": 0},
    OpKind.CONV: {"dilations": [1, 1], "group": 1, "auto_pad": "NOTSET"},
    OpKind.MAX_POOL: {"dilations": [1, 1], "auto_pad": "NOTSET", "ceil_mode": 0, "storage_order": 0},
    OpKind.REDUCE_SUM: {"noop_with_empty_axes": 0},
    OpKind.REDUCE_L1: {"noop_with_empty_axes": 0},
    OpKind.RESHAPE: {"allowzero": 0},
}

_UNSAFE = re.compile(r"[^A-Za-z0-9_.-]")


@dataclass(frozen=True)
class ExportResult:
    manifest_path: Path
    manifest: dict[str, Any]
    payload_paths: tuple[Path, ...]


def tensor_type_from_proto(type_proto: Mapping[str, Any] | None, fallback: DType = DType.F32) -> TensorType:
    if type_proto is None:
        return TensorType(fallback, Shape.unranked())
    tensor_type = type_proto["tensor_type"]
    dtype = DType.from_onnx_code(tensor_type["elem_type"])
    shape_proto = tensor_type.get("shape")
    if shape_proto is None:
        return TensorType(dtype, Shape.unranked())
    dims = [d.get("dim_value") for d in shape_proto["dim"]]
    return TensorType(dtype, Shape.of(*dims))


def tensor_type_to_proto(type_: TensorType) -> dict[str, Any]:
    tensor_type: dict[str, Any] = {"elem_type": type_.dtype.onnx_code}
    if type_.shape.rank_known:
        tensor_type["shape"] = {
            "dim": [{"dim_param": "?"} if d is None else {"dim_value": d} for d in type_.shape.dims]
        }
    return {"tensor_type": tensor_type}


class ModelImporter:
    """Translate between manifests and graph modules."""

    def __init__(
        self,
        model_repository: ModelRepository | None = None,
        payload_repository: PayloadRepository | None = None,
    ) -> None:
        self.models = model_repository or ModelRepository()
        self.payloads = payload_repository or PayloadRepository()

    # --- import --------------------------------------------------------------

    def import_model(self, manifest_path: str | Path, payload_dir: str | Path | None = None) -> GraphModule:
        manifest_path = Path(manifest_path)
        manifest = self.models.load(manifest_path)
        return self.import_manifest(manifest, Path(payload_dir) if payload_dir else manifest_path.parent)

    def import_manifest(self, manifest: Mapping[str, Any], payload_dir: Path) -> GraphModule:
        graph = manifest["graph"]
        declared: dict[str, TensorType] = {}
        for info in [*graph["value_info"], *graph["output"], *graph["input"]]:
            if info["type"] is not None:
                declared[info["name"]] = tensor_type_from_proto(info["type"])

        env: dict[str, GraphValue] = {}
        ops: list[GraphOp] = []
        initializer_names = {t["name"] for t in graph["initializer"]}

        for proto in graph["initializer"]:
            value = self._tensor(proto, payload_dir, proto["name"])
            ops.append(self._constant_op(proto["name"], value))
            env[proto["name"]] = ops[-1].result

        inputs: list[GraphValue] = []
        for info in graph["input"]:
            name = info["name"]
            if name in initializer_names:
                continue
            if info["type"] is None:
                raise ParseError(message=f"graph input {name!r} has no type")
            if name in env:
                raise ParseError(message=f"graph input {name!r} listed twice")
            env[name] = GraphValue(name, declared[name])
            inputs.append(env[name])

        for index, node in enumerate(graph["node"]):
            ops.append(self._node(index, node, env, declared, payload_dir))
            env[node["output"][0]] = ops[-1].result

        results = []
        for info in graph["output"]:
            if info["name"] not in env:
                raise ParseError(message=f"graph output {info['name']!r} is never produced")
            results.append(env[info["name"]])

        fn = GraphFunction(MAIN_GRAPH, inputs, ops, results)
        module = GraphModule([fn], EntryPointDescriptor(MAIN_GRAPH, len(inputs), len(results)))
        diagnostics = verify(module)
        if diagnostics:
            raise VerificationError(message="; ".join(str(d) for d in diagnostics), details=diagnostics)
        logger.debug("Imported %d op(s), %d input(s), %d output(s)", len(ops), len(inputs), len(results))
        return module

    def _tensor(self, proto: Mapping[str, Any], payload_dir: Path, name: str) -> TensorValue:
        dtype = DType.from_onnx_code(proto["data_type"])
        dims = [int(d) for d in proto["dims"]]
        shape = Shape.of(*dims)
        float_data, int_data = proto.get("float_data"), proto.get("int64_data")
        if (dtype is DType.F32 and int_data is not None) or (dtype is DType.I64 and float_data is not None):
            raise ParseError(message=f"tensor {name!r}: inline data does not match data_type {proto['data_type']}")
        inline = float_data if dtype is DType.F32 else int_data
        if inline is not None:
            if len(inline) != shape.elem_count:
                raise PayloadSizeMismatch(
                    message=f"tensor {name!r} has {len(inline)} inline element(s), dims {dims} need {shape.elem_count}",
                )
            return TensorValue(dtype, shape, np.asarray(inline, dtype=dtype.numpy))

        path = payload_dir / f"{name}{TENSOR_SUFFIX}"
        if not path.is_file():
            raise ParseError(message=f"tensor {name!r} has neither inline data nor a payload at {path}")
        value = self.payloads.read(path)
        if value.dtype is not dtype:
            raise ParseError(message=f"payload {path} holds {value.dtype.value}, manifest says {dtype.value}")
        if list(value.shape.static_dims) != dims:
            raise PayloadSizeMismatch(
                message=f"payload {path} has dims {list(value.shape.static_dims)}, manifest says {dims}",
            )
        return value

    @staticmethod
    def _constant_op(name: str, value: TensorValue) -> GraphOp:
        return GraphOp(OpKind.CONSTANT, [], [GraphValue(name, value.type)], {"value": value})

    def _node(
        self,
        index: int,
        node: Mapping[str, Any],
        env: dict[str, GraphValue],
        declared: Mapping[str, TensorType],
        payload_dir: Path,
    ) -> GraphOp:
        op_type = node["op_type"]
        kind = OpKind.parse(op_type)
        if kind is None:
            raise UnsupportedOp(message=f"unsupported operator {op_type}", details={"op": op_type, "node": index})
        spec = REGISTRY[kind]
        if len(node["output"]) != spec.num_results:
            raise UnsupportedOp(
                message=f"{op_type} with {len(node['output'])} outputs is not supported",
                details={"op": op_type, "node": index},
            )
        if len(node["input"]) != spec.num_operands or any(not name for name in node["input"]):
            raise ParseError(
                message=f"node {index} ({op_type}) takes {spec.num_operands} input(s), got {node['input']}",
            )
        operands = []
        for name in node["input"]:
            if name not in env:
                raise ParseError(message=f"node {index} ({op_type}) uses {name!r} before it is defined")
            operands.append(env[name])

        output = node["output"][0]
        raw = {a["name"]: self._attribute(a, payload_dir, output) for a in node["attribute"]}
        given = self._drop_tolerated(kind, raw, operands)
        attrs = build_attributes(kind, given)

        if kind is OpKind.CONSTANT:
            value = attrs["value"]
            assert isinstance(value, TensorValue)
            result_type = value.type
        elif output in declared:
            result_type = declared[output]
        else:
            guess = operands[0].type.dtype if kind in (OpKind.RESHAPE, OpKind.IDENTITY) else DType.F32
            result_type = TensorType(guess, Shape.unranked())
        return GraphOp(kind, operands, [GraphValue(output, result_type)], attrs)

    def _attribute(self, attr: Mapping[str, Any], payload_dir: Path, output: str) -> Any:
        order = {"FLOAT": "f", "INT": "i", "INTS": "ints", "TENSOR": "t", "STRING": "s", "FLOATS": "floats"}
        key = order.get(attr["type"] or "", None)
        if key is None or key not in attr:
            key = next(k for k in ("t", "f", "i", "ints", "floats", "s") if k in attr)
        if key == "t":
            proto = attr["t"]
            return self._tensor(proto, payload_dir, proto["name"] or output)
        value = attr[key]
        return list(value) if isinstance(value, (list, tuple)) else value

    @staticmethod
    def _drop_tolerated(kind: OpKind, raw: dict[str, Any], operands: list[GraphValue]) -> dict[str, Any]:
        tolerated = dict(_TOLERATED.get(kind, {}))
        if kind is OpKind.CONV:
            w = operands[1].type.shape
            tolerated["kernel_shape"] = list(w.dims[2:]) if w.rank_known and w.rank == 4 else None
        given: dict[str, Any] = {}
        for name, value in raw.items():
            if name not in tolerated:
                given[name] = value
                continue
            default = tolerated[name]
            if default is None or value == default:
                continue
            raise UnsupportedOp(
                message=f"{kind.value} attribute {name}={value!r} is not supported (only {default!r})",
                details={"op": kind.value, "attribute": name},
            )
        return given

    # --- export --------------------------------------------------------------

    def export_model(self, module: GraphModule, out_dir: str | Path) -> ExportResult:
        diagnostics = verify(module)
        if diagnostics:
            raise VerificationError(message="; ".join(str(d) for d in diagnostics), details=diagnostics)
        out_dir = Path(out_dir)
        fn = module.main
        names = _unique_names(fn)
        payload_paths: list[Path] = []

        nodes: list[dict[str, Any]] = []
        value_info: list[dict[str, Any]] = []
        returned = set(fn.results)
        for op in fn.ops:
            result = op.result
            attrs: list[dict[str, Any]] = []
            for name in sorted(op.attributes):
                value = op.attributes[name]
                spec = REGISTRY[op.kind].attr(name)
                assert spec is not None
                if spec.kind is AttrKind.TENSOR:
                    assert isinstance(value, TensorValue)
                    payload_paths.append(self.payloads.write(out_dir / f"{names[result]}{TENSOR_SUFFIX}", value))
                    tensor = {"name": names[result], "data_type": value.dtype.onnx_code, "dims": list(value.shape.static_dims)}
                    attrs.append({"name": name, "type": "TENSOR", "t": tensor})
                elif spec.kind is AttrKind.FLOAT:
                    attrs.append({"name": name, "type": "FLOAT", "f": float(value)})  # type: ignore[arg-type]
                elif spec.kind is AttrKind.INT:
                    attrs.append({"name": name, "type": "INT", "i": int(value)})  # type: ignore[call-overload]
                else:
                    attrs.append({"name": name, "type": "INTS", "ints": list(value)})  # type: ignore[call-overload]
            nodes.append(
                {
                    "name": f"{op.kind.value}_{len(nodes)}",
                    "op_type": op.kind.value,
                    "input": [names[v] for v in op.operands],
                    "output": [names[result]],
                    "attribute": attrs,
                }
            )
            if result not in returned:
                value_info.append({"name": names[result], "type": tensor_type_to_proto(result.type)})

        manifest = {
            "ir_version": 7,
            "producer_name": "loomc",
            "graph": {
                "name": fn.name,
                "node": nodes,
                "input": [{"name": names[v], "type": tensor_type_to_proto(v.type)} for v in fn.inputs],
                "output": [{"name": names[v], "type": tensor_type_to_proto(v.type)} for v in fn.results],
                "initializer": [],
                "value_info": value_info,
            },
        }
        manifest_path = self.models.store(out_dir / MANIFEST_NAME, manifest)
        logger.debug("Exported %d node(s) and %d payload(s) to %s", len(nodes), len(payload_paths), out_dir)
        return ExportResult(manifest_path, manifest, tuple(payload_paths))


def _unique_names(fn: GraphFunction) -> dict[GraphValue, str]:
    """Filesystem-safe, case-insensitively unique names for every value."""

    names: dict[GraphValue, str] = {}
    taken: set[str] = set()
    for value in fn.values():
        base = _UNSAFE.sub("_", value.name) or "v"
        if base in (".", ".."):
            base = "v"
        candidate, n = base, 0
        while candidate.lower() in taken:
            n += 1
            candidate = f"{base}_{n}"
        taken.add(candidate.lower())
        names[value] = candidate
    return names


def import_model(manifest_path: str | Path, payload_dir: str | Path | None = None) -> GraphModule:
    return ModelImporter().import_model(manifest_path, payload_dir)


def export_model(module: GraphModule, out_dir: str | Path) -> ExportResult:
    return ModelImporter().export_model(module, out_dir)
