"""Custom exceptions for centralized error handling."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any


@dataclass(eq=False)
class LoomError(Exception):
    """Base compiler error."""

    code: str
    message: str
    exit_code: int = 1
    details: Any | None = None

    def __str__(self) -> str:
        return self.message


class ParseError(LoomError):
    """Malformed manifest, plan, or payload."""

    def __init__(self, message: str = "Parse error", details: Any | None = None) -> None:
        super().__init__(code="parse_error", message=message, details=details)


class IrSyntaxError(LoomError):
    """Textual IR does not follow the printer grammar."""

    def __init__(self, message: str, line: int, column: int) -> None:
        super().__init__(
            code="syntax_error",
            message=f"{line}:{column}: {message}",
            details={"line": line, "column": column},
        )
        self.line = line
        self.column = column


class UnsupportedOp(LoomError):
    """Operator outside the registry (or an unsupported attribute form)."""

    def __init__(self, message: str = "Unsupported operator", details: Any | None = None) -> None:
        super().__init__(code="unsupported_op", message=message, details=details)


class UnsupportedDtype(LoomError):
    """Element type other than f32/i64."""

    def __init__(self, message: str = "Unsupported dtype", details: Any | None = None) -> None:
        super().__init__(code="unsupported_dtype", message=message, details=details)


class PayloadSizeMismatch(LoomError):
    """Payload body length disagrees with its header or declaration."""

    def __init__(self, message: str = "Payload size mismatch", details: Any | None = None) -> None:
        super().__init__(code="payload_size_mismatch", message=message, details=details)


class IncompatibleShapes(LoomError):
    """Shapes cannot be broadcast together."""

    def __init__(self, message: str = "Incompatible shapes", details: Any | None = None) -> None:
        super().__init__(code="incompatible_shapes", message=message, details=details)


class OutOfRange(LoomError):
    """Index tuple outside a shape."""

    def __init__(self, message: str = "Index out of range", details: Any | None = None) -> None:
        super().__init__(code="out_of_range", message=message, details=details)


class ShapeMismatch(LoomError):
    """Shape inference found contradicting operand shapes."""

    def __init__(self, message: str = "Shape mismatch", details: Any | None = None) -> None:
        super().__init__(code="shape_mismatch", message=message, details=details)


class FixpointOverflow(LoomError):
    """A rewrite driver exceeded its sweep limit."""

    def __init__(self, message: str = "Rewrite fixpoint not reached", details: Any | None = None) -> None:
        super().__init__(code="fixpoint_overflow", message=message, details=details)


class InvalidBounds(LoomError):
    def __init__(self, message: str = "Invalid loop bounds", details: Any | None = None) -> None:
        super().__init__(code="invalid_bounds", message=message, details=details)


class InvalidPermutation(LoomError):
    def __init__(self, message: str = "Invalid permutation", details: Any | None = None) -> None:
        super().__init__(code="invalid_permutation", message=message, details=details)


class InvalidSkew(LoomError):
    def __init__(self, message: str = "Invalid skew", details: Any | None = None) -> None:
        super().__init__(code="invalid_skew", message=message, details=details)


class ScheduleExpansionError(LoomError):
    """A schedule could not be expanded into affine loops."""

    def __init__(self, message: str = "Schedule expansion failed", details: Any | None = None) -> None:
        super().__init__(code="schedule_expansion_error", message=message, details=details)


class DynamicShapeUnsupported(LoomError):
    def __init__(self, message: str = "Dynamic shapes cannot be lowered", details: Any | None = None) -> None:
        super().__init__(code="dynamic_shape_unsupported", message=message, details=details)


class UnloweredOp(LoomError):
    def __init__(self, message: str = "No lowering rule", details: Any | None = None) -> None:
        super().__init__(code="unlowered_op", message=message, details=details)


class ArityMismatch(LoomError):
    def __init__(self, message: str = "Wrong number of inputs", details: Any | None = None) -> None:
        super().__init__(code="arity_mismatch", message=message, details=details)


class TypeMismatch(LoomError):
    def __init__(self, message: str = "Input type mismatch", details: Any | None = None) -> None:
        super().__init__(code="type_mismatch", message=message, details=details)


class UninitializedRead(LoomError):
    def __init__(self, message: str = "Read of uninitialized buffer element", details: Any | None = None) -> None:
        super().__init__(code="uninitialized_read", message=message, details=details)


class IoError(LoomError):
    def __init__(self, message: str = "I/O error", details: Any | None = None) -> None:
        super().__init__(code="io_error", message=message, details=details)


class VerificationError(LoomError):
    """IR failed verification; `details` holds the diagnostics."""

    def __init__(self, message: str = "Verification failed", details: Any | None = None) -> None:
        super().__init__(code="verification_failed", message=message, details=details)


class UsageError(LoomError):
    """Bad command-line usage."""

    def __init__(self, message: str = "Usage error", details: Any | None = None) -> None:
        super().__init__(code="usage_error", message=message, exit_code=2, details=details)
