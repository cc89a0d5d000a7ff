"""Schemas for `model.json` manifests.

Field names follow the ONNX ModelProto structure (`graph.node[].op_type`,
`type.tensor_type.elem_type`, `shape.dim[].dim_value`, ...) so a protobuf
model dumped to JSON loads without renaming.
"""

from __future__ import annotations

from marshmallow import EXCLUDE, Schema, ValidationError, fields, validate, validates_schema


class _OnnxSchema(Schema):
    class Meta:
        # Protobuf dumps carry doc_string, domain and friends; they are ignored.
        unknown = EXCLUDE


class DimSchema(_OnnxSchema):
    dim_value = fields.Integer(required=False, load_default=None, validate=validate.Range(min=0))
    dim_param = fields.String(required=False, load_default=None)


class TensorShapeSchema(_OnnxSchema):
    dim = fields.List(fields.Nested(DimSchema), required=False, load_default=list)


class TensorTypeSchema(_OnnxSchema):
    elem_type = fields.Integer(required=True)
    shape = fields.Nested(TensorShapeSchema, required=False, load_default=None)


class TypeSchema(_OnnxSchema):
    tensor_type = fields.Nested(TensorTypeSchema, required=True)


class ValueInfoSchema(_OnnxSchema):
    name = fields.String(required=True, validate=validate.Length(min=1))
    type = fields.Nested(TypeSchema, required=False, load_default=None)


class TensorSchema(_OnnxSchema):
    name = fields.String(required=False, load_default="")
    data_type = fields.Integer(required=True)
    dims = fields.List(fields.Integer(validate=validate.Range(min=0)), required=False, load_default=list)
    float_data = fields.List(fields.Float(allow_nan=True), required=False, load_default=None)
    int64_data = fields.List(fields.Integer(), required=False, load_default=None)

    @validates_schema
    def _validate_data(self, data, **kwargs):  # type: ignore[no-untyped-def]
        if data.get("float_data") is not None and data.get("int64_data") is not None:
            raise ValidationError({"float_data": ["A tensor carries either float_data or int64_data, not both"]})


class AttributeSchema(_OnnxSchema):
    name = fields.String(required=True, validate=validate.Length(min=1))
    type = fields.String(
        required=False,
        load_default=None,
        validate=validate.OneOf(["FLOAT", "INT", "INTS", "TENSOR", "STRING", "FLOATS"]),
    )
    f = fields.Float(required=False, allow_nan=True)
    i = fields.Integer(required=False)
    ints = fields.List(fields.Integer(), required=False)
    floats = fields.List(fields.Float(allow_nan=True), required=False)
    s = fields.String(required=False)
    t = fields.Nested(TensorSchema, required=False)

    @validates_schema
    def _validate_payload(self, data, **kwargs):  # type: ignore[no-untyped-def]
        present = [k for k in ("f", "i", "ints", "floats", "s", "t") if k in data]
        if not present:
            raise ValidationError({"attribute": [f"attribute {data.get('name')!r} has no value"]})


class NodeSchema(_OnnxSchema):
    name = fields.String(required=False, load_default="")
    op_type = fields.String(required=True, validate=validate.Length(min=1))
    input = fields.List(fields.String(), required=False, load_default=list)
    output = fields.List(fields.String(validate=validate.Length(min=1)), required=True, validate=validate.Length(min=1))
    attribute = fields.List(fields.Nested(AttributeSchema), required=False, load_default=list)


class GraphSchema(_OnnxSchema):
    name = fields.String(required=False, load_default="main_graph")
    node = fields.List(fields.Nested(NodeSchema), required=False, load_default=list)
    input = fields.List(fields.Nested(ValueInfoSchema), required=False, load_default=list)
    output = fields.List(fields.Nested(ValueInfoSchema), required=True, validate=validate.Length(min=1))
    initializer = fields.List(fields.Nested(TensorSchema), required=False, load_default=list)
    value_info = fields.List(fields.Nested(ValueInfoSchema), required=False, load_default=list)

    @validates_schema
    def _validate_names(self, data, **kwargs):  # type: ignore[no-untyped-def]
        defined: list[str] = [t["name"] for t in data.get("initializer") or []]
        if any(not name for name in defined):
            raise ValidationError({"initializer": ["Initializers must be named"]})
        for node in data.get("node") or []:
            defined.extend(node["output"])
        duplicates = sorted({n for n in defined if defined.count(n) > 1})
        if duplicates:
            raise ValidationError({"node": [f"Values defined more than once: {', '.join(duplicates)}"]})


class ModelManifestSchema(_OnnxSchema):
    ir_version = fields.Integer(required=False, load_default=7)
    producer_name = fields.String(required=False, load_default="")
    graph = fields.Nested(GraphSchema, required=True)
