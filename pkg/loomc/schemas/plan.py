"""Schemas for serialized affine programs (`--emit=plan`)."""

from __future__ import annotations

from marshmallow import Schema, ValidationError, fields, validate, validates_schema

PLAN_FORMAT = "loomc-plan"
PLAN_VERSION = 1

SCALAR_KINDS = [
    "load",
    "store",
    "constf",
    "consti",
    "add",
    "sub",
    "mul",
    "div",
    "max",
    "abs",
    "exp",
    "cmp_ge",
    "select",
]


class AffineExprSchema(Schema):
    const = fields.Integer(required=True)
    # [iv index, coefficient] pairs
    terms = fields.List(
        fields.List(fields.Integer(), validate=validate.Length(equal=2)),
        required=False,
        load_default=list,
    )


class BufferSchema(Schema):
    name = fields.String(required=True, validate=validate.Length(min=1))
    role = fields.String(required=True, validate=validate.OneOf(["input", "alloc", "global", "accumulator"]))
    dtype = fields.String(required=True, validate=validate.OneOf(["f32", "i64"]))
    dims = fields.List(fields.Integer(validate=validate.Range(min=0)), required=True)
    data = fields.String(required=False, load_default=None)

    @validates_schema
    def _validate_payload(self, data, **kwargs):  # type: ignore[no-untyped-def]
        if data["role"] == "global" and data.get("data") is None:
            raise ValidationError({"data": ["Global buffers need a payload"]})


class ScalarOpSchema(Schema):
    kind = fields.String(required=True, validate=validate.OneOf(SCALAR_KINDS))
    result = fields.Integer(required=False, load_default=None)
    type = fields.String(required=False, load_default=None, validate=validate.OneOf(["f32", "i64", "i1"]))
    operands = fields.List(fields.Integer(), required=False, load_default=list)
    buffer = fields.String(required=False, load_default=None)
    indices = fields.List(fields.Nested(AffineExprSchema), required=False, load_default=list)
    value = fields.Float(required=False, load_default=None, allow_nan=True)
    linear = fields.Boolean(required=False, load_default=False)

    @validates_schema
    def _validate_shape(self, data, **kwargs):  # type: ignore[no-untyped-def]
        if data["kind"] in ("load", "store") and not data.get("buffer"):
            raise ValidationError({"buffer": ["Loads and stores name a buffer"]})
        if data["kind"] != "store" and (data.get("result") is None or data.get("type") is None):
            raise ValidationError({"result": ["Every statement but store defines a typed result"]})


class AffineForSchema(Schema):
    iv = fields.Integer(required=True, validate=validate.Range(min=0))
    name = fields.String(required=True)
    lowers = fields.List(fields.Nested(AffineExprSchema), required=True, validate=validate.Length(min=1))
    uppers = fields.List(fields.Nested(AffineExprSchema), required=True, validate=validate.Length(min=1))
    step = fields.Integer(required=False, load_default=1, validate=validate.Range(min=1))
    body = fields.List(fields.Nested(lambda: AffineItemSchema()), required=False, load_default=list)


class AffineItemSchema(Schema):
    loop = fields.Nested(AffineForSchema, required=False, load_default=None)
    op = fields.Nested(ScalarOpSchema, required=False, load_default=None)

    @validates_schema
    def _validate_one_of(self, data, **kwargs):  # type: ignore[no-untyped-def]
        if (data.get("loop") is None) == (data.get("op") is None):
            raise ValidationError({"loop": ["An item is either a loop or an op"]})


class AffineNestSchema(Schema):
    op_kind = fields.String(required=True)
    schedule_depth = fields.Integer(required=False, load_default=0, validate=validate.Range(min=0))
    original_ivs = fields.List(fields.Nested(AffineExprSchema), required=False, load_default=list)
    body = fields.List(fields.Nested(AffineItemSchema), required=True)


class EntryPointSchema(Schema):
    func = fields.String(required=True)
    num_inputs = fields.Integer(required=True, validate=validate.Range(min=0))
    num_outputs = fields.Integer(required=True, validate=validate.Range(min=0))


class PlanSchema(Schema):
    format = fields.String(required=True, validate=validate.Equal(PLAN_FORMAT))
    version = fields.Integer(required=True, validate=validate.Equal(PLAN_VERSION))
    name = fields.String(required=True)
    entry_point = fields.Nested(EntryPointSchema, required=True)
    inputs = fields.List(fields.Nested(BufferSchema), required=True)
    buffers = fields.List(fields.Nested(BufferSchema), required=False, load_default=list)
    results = fields.List(fields.String(), required=True)
    nests = fields.List(fields.Nested(AffineNestSchema), required=False, load_default=list)

    @validates_schema
    def _validate_names(self, data, **kwargs):  # type: ignore[no-untyped-def]
        names = [b["name"] for b in [*data.get("inputs", []), *data.get("buffers", [])]]
        if len(names) != len(set(names)):
            raise ValidationError({"buffers": ["Buffer names must be unique"]})
        missing = [r for r in data.get("results", []) if r not in names]
        if missing:
            raise ValidationError({"results": [f"Unknown result buffer(s): {', '.join(missing)}"]})
