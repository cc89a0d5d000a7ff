"""Repository layer for `.tensor` payload files.

Layout (all integers little-endian)::

    u32 magic "LOOM" | u8 dtype code | u8 rank | u16 reserved | u64 element count
    rank x u64 dims
    body: element count x itemsize bytes, little-endian
"""

from __future__ import annotations

import logging
import struct
import sys
from pathlib import Path

import numpy as np

from loomc.errors import IoError, ParseError, PayloadSizeMismatch
from loomc.models.tensor import DType, Shape, TensorValue

logger = logging.getLogger(__name__)

MAGIC = 0x4C4F4F4D
HEADER = struct.Struct("<IBBHQ")
TENSOR_SUFFIX = ".tensor"


def _host_dtype(dtype: DType, host_byteorder: str) -> np.dtype:
    return dtype.numpy.newbyteorder("<" if host_byteorder == "little" else ">")


def _wire_dtype(dtype: DType) -> np.dtype:
    return dtype.numpy.newbyteorder("<")


def encode_payload(value: TensorValue, host_byteorder: str = sys.byteorder) -> bytes:
    dims = value.shape.static_dims
    header = HEADER.pack(MAGIC, value.dtype.onnx_code, len(dims), 0, value.shape.elem_count)
    dims_bytes = struct.pack(f"<{len(dims)}Q", *dims)
    host = value.data.astype(_host_dtype(value.dtype, host_byteorder))
    return header + dims_bytes + host.astype(_wire_dtype(value.dtype)).tobytes()


def decode_payload(data: bytes, host_byteorder: str = sys.byteorder) -> TensorValue:
    """Decode a payload; `host_byteorder` selects the in-memory order the body is converted to."""

    if len(data) < HEADER.size:
        raise ParseError(message=f"payload too short for header ({len(data)} bytes)")
    magic, code, rank, reserved, count = HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise ParseError(message=f"bad payload magic 0x{magic:08X}, expected 0x{MAGIC:08X}")
    if reserved != 0:
        raise ParseError(message=f"reserved header field is {reserved}, expected 0")
    dtype = DType.from_onnx_code(code)
    dims_end = HEADER.size + 8 * rank
    if len(data) < dims_end:
        raise ParseError(message=f"payload header declares rank {rank} but is truncated")
    dims = struct.unpack_from(f"<{rank}Q", data, HEADER.size)
    shape = Shape.of(*dims)
    if shape.elem_count != count:
        raise PayloadSizeMismatch(
            message=f"header counts {count} elements but dims {list(dims)} hold {shape.elem_count}",
            details={"count": count, "dims": list(dims)},
        )
    body = data[dims_end:]
    expected = count * dtype.itemsize
    if len(body) != expected:
        raise PayloadSizeMismatch(
            message=f"payload body is {len(body)} bytes, expected {expected}",
            details={"expected": expected, "actual": len(body)},
        )
    wire = np.frombuffer(body, dtype=_wire_dtype(dtype))
    return TensorValue(dtype, shape, wire.astype(_host_dtype(dtype, host_byteorder)))


class PayloadRepository:
    """Read and write payload files."""

    def read(self, path: str | Path) -> TensorValue:
        path = Path(path)
        try:
            data = path.read_bytes()
        except OSError as exc:
            raise IoError(message=f"cannot read payload {path}: {exc.strerror or exc}") from exc
        value = decode_payload(data)
        logger.debug("Read payload %s: %s", path, value.type)
        return value

    def write(self, path: str | Path, value: TensorValue) -> Path:
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_bytes(encode_payload(value))
        except OSError as exc:
            raise IoError(message=f"cannot write payload {path}: {exc.strerror or exc}") from exc
        logger.debug("Wrote payload %s: %s", path, value.type)
        return path
