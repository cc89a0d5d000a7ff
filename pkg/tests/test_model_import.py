from __future__ import annotations

import json

import numpy as np
import pytest

from helpers import REPO_ROOT
from loomc.errors import IrSyntaxError, ParseError, PayloadSizeMismatch, UnsupportedDtype, UnsupportedOp, VerificationError
from loomc.models.graph import OpKind
from loomc.models.tensor import DType, Shape, TensorValue
from loomc.repositories.payload_repository import HEADER, decode_payload, encode_payload
from loomc.services.graph_parser import parse_graph_text
from loomc.services.graph_printer import print_graph
from loomc.services.model_importer import ModelImporter, import_model
from loomc.services.model_zoo import add_model, f32, leaky_relu_model, mnist_small

MODELS = REPO_ROOT / "models"


def _manifest(nodes, inputs, outputs, initializer=()):
    def info(name, dims, elem_type=1):
        return {"name": name, "type": {"tensor_type": {"elem_type": elem_type, "shape": {"dim": [{"dim_value": d} for d in dims]}}}}

    return {
        "ir_version": 7,
        "graph": {
            "name": "main_graph",
            "node": nodes,
            "input": [info(*i) for i in inputs],
            "output": [info(*o) for o in outputs],
            "initializer": list(initializer),
        },
    }


def _write(tmp_path, manifest):
    path = tmp_path / "model.json"
    path.write_text(json.dumps(manifest), encoding="utf-8")
    return path


def test_import_bundled_add_model(golden):
    module = import_model(MODELS / "add" / "model.json")
    assert print_graph(module) == golden("add.graph.mlir")


def test_import_bundled_leaky_relu_keeps_alpha():
    module = import_model(MODELS / "leaky_relu" / "model.json")
    (op,) = module.main.ops
    assert op.kind is OpKind.LEAKY_RELU
    assert op.attributes["alpha"] == float(np.float32(0.1))
    assert module.main.results[0].type == f32(3)


def test_import_bundled_matmul_model():
    module = import_model(MODELS / "matmul" / "model.json")
    assert [v.type for v in module.main.inputs] == [f32(4, 6), f32(6, 4)]
    assert module.main.ops[0].kind is OpKind.MATMUL


def test_import_rejects_unknown_operator(tmp_path):
    manifest = _manifest(
        [{"op_type": "LSTM", "input": ["x"], "output": ["y"]}],
        [("x", [1, 2, 3])],
        [("y", [1, 2, 3])],
    )
    with pytest.raises(UnsupportedOp, match="LSTM"):
        import_model(_write(tmp_path, manifest))


def test_import_rejects_non_default_tolerated_attribute(tmp_path):
    manifest = _manifest(
        [
            {
                "op_type": "Gemm",
                "input": ["a", "b", "c"],
                "output": ["y"],
                "attribute": [{"name": "transA", "type": "INT", "i": 1}],
            }
        ],
        [("a", [2, 2]), ("b", [2, 2]), ("c", [2])],
        [("y", [2, 2])],
    )
    with pytest.raises(UnsupportedOp, match="transA"):
        import_model(_write(tmp_path, manifest))


def test_import_rejects_float16(tmp_path):
    manifest = _manifest([{"op_type": "Abs", "input": ["x"], "output": ["y"]}], [("x", [2], 10)], [("y", [2])])
    with pytest.raises(UnsupportedDtype, match="float16"):
        import_model(_write(tmp_path, manifest))


def test_import_inline_initializer(tmp_path):
    initializer = {"name": "w", "data_type": 1, "dims": [2], "float_data": [1.0, 2.0]}
    manifest = _manifest(
        [{"op_type": "Add", "input": ["x", "w"], "output": ["y"]}],
        [("x", [2])],
        [("y", [2])],
        [initializer],
    )
    module = import_model(_write(tmp_path, manifest))
    assert [op.kind for op in module.main.ops] == [OpKind.CONSTANT, OpKind.ADD]
    assert len(module.main.inputs) == 1


def test_import_rejects_short_inline_initializer(tmp_path):
    initializer = {"name": "w", "data_type": 1, "dims": [3], "float_data": [1.0, 2.0]}
    manifest = _manifest(
        [{"op_type": "Add", "input": ["x", "w"], "output": ["y"]}],
        [("x", [3])],
        [("y", [3])],
        [initializer],
    )
    with pytest.raises(PayloadSizeMismatch):
        import_model(_write(tmp_path, manifest))


def test_import_rejects_malformed_manifest(tmp_path):
    path = tmp_path / "model.json"
    path.write_text('{"graph": {"node": []}}', encoding="utf-8")
    with pytest.raises(ParseError):
        import_model(path)


def test_import_rejects_use_before_definition(tmp_path):
    manifest = _manifest(
        [
            {"op_type": "Abs", "input": ["t"], "output": ["y"]},
            {"op_type": "Abs", "input": ["x"], "output": ["t"]},
        ],
        [("x", [2])],
        [("y", [2])],
    )
    with pytest.raises(ParseError, match="before it is defined"):
        import_model(_write(tmp_path, manifest))


def test_export_then_import_is_a_fixpoint(tmp_path):
    importer = ModelImporter()
    first = importer.export_model(mnist_small(), tmp_path / "first")
    reimported = importer.import_model(first.manifest_path)
    second = importer.export_model(reimported, tmp_path / "second")
    assert second.manifest == first.manifest
    assert print_graph(reimported) == print_graph(mnist_small())
    for a, b in zip(first.payload_paths, second.payload_paths):
        assert a.read_bytes() == b.read_bytes()


def test_exported_constant_payload_layout(tmp_path):
    result = ModelImporter().export_model(add_model(), tmp_path)
    assert result.payload_paths == ()

    from loomc.services.graph_builder import GraphBuilder

    builder = GraphBuilder()
    x = builder.add_input("x", f32(3, 4, 5))
    c = builder.constant(TensorValue.from_array(np.ones((3, 4, 5), dtype=np.float32)), name="ones")
    module = builder.build([builder.op(OpKind.ADD, [x, c], name="out")])
    (payload,) = ModelImporter().export_model(module, tmp_path / "const").payload_paths
    data = payload.read_bytes()
    assert len(data) == HEADER.size + 3 * 8 + 240
    assert data[:4] == b"MOOL"


def test_payload_decodes_on_either_host_order(rng):
    value = TensorValue.from_array(rng.normal(size=(2, 3)).astype(np.float32))
    wire = encode_payload(value, host_byteorder="little")
    assert wire == encode_payload(value, host_byteorder="big")
    assert decode_payload(wire, host_byteorder="big") == value
    assert decode_payload(wire, host_byteorder="little") == value


def test_payload_rejects_truncated_body():
    wire = encode_payload(TensorValue.from_array(np.arange(4, dtype=np.int64)))
    decoded = decode_payload(wire)
    assert decoded.dtype is DType.I64 and decoded.shape == Shape.of(4)
    with pytest.raises(PayloadSizeMismatch):
        decode_payload(wire[:-1])
    with pytest.raises(ParseError):
        decode_payload(b"\x00" * 16)


def test_parse_printed_text_round_trips():
    for module in (add_model(), leaky_relu_model(), mnist_small()):
        text = print_graph(module)
        assert print_graph(parse_graph_text(text)) == text


def test_parse_empty_text_is_a_syntax_error():
    with pytest.raises(IrSyntaxError) as info:
        parse_graph_text("")
    assert info.value.details["line"] == 1


def test_parse_undefined_value_fails_verification():
    text = print_graph(add_model()).replace('"onnx.Add"(%arg0, %arg1)', '"onnx.Add"(%arg0, %7)')
    with pytest.raises(VerificationError) as info:
        parse_graph_text(text)
    assert [d.kind for d in info.value.details] == ["UndefinedValue"]
