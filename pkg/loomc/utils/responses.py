"""Helpers for consistent command output."""

from __future__ import annotations

import sys
from typing import Any


def ok(text: str, end: str = "\n") -> int:
    """Success output on stdout."""

    sys.stdout.write(text)
    if end and not text.endswith(end):
        sys.stdout.write(end)
    sys.stdout.flush()
    return 0


def fail(code: str, message: str, exit_code: int, details: Any | None = None) -> int:
    """Error diagnostic on stderr; returns the process exit code."""

    sys.stderr.write(f"loomc: error[{code}]: {message}\n")
    if isinstance(details, (list, tuple)):
        for item in details:
            sys.stderr.write(f"  {item}\n")
    elif isinstance(details, dict):
        for key, value in details.items():
            sys.stderr.write(f"  {key}: {value}\n")
    sys.stderr.flush()
    return exit_code
