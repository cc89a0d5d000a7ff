"""Centralized error handlers."""

from __future__ import annotations

import logging
from typing import Callable

from loomc.errors import IoError, LoomError
from loomc.utils.responses import fail

logger = logging.getLogger(__name__)


def run_guarded(fn: Callable[[], int]) -> int:
    """Run a command and turn any exception into a diagnostic plus exit code."""

    try:
        return fn()
    except LoomError as exc:
        return fail(exc.code, exc.message, exc.exit_code, exc.details)
    except OSError as exc:
        logger.info("I/O error", exc_info=exc)
        wrapped = IoError(message=f"{exc.filename or 'I/O'}: {exc.strerror or exc}")
        return fail(wrapped.code, wrapped.message, wrapped.exit_code, wrapped.details)
    except KeyboardInterrupt:
        return fail("interrupted", "Interrupted", 130)
    except Exception:
        logger.exception("Unhandled exception")
        return fail("internal_error", "Internal compiler error", 1)
