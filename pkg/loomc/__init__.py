"""loomc: a small multi-level inference compiler."""

from __future__ import annotations

import pathlib
from typing import TYPE_CHECKING

try:
    from dotenv import load_dotenv
except Exception:  # pragma: no cover
    load_dotenv = None  # type: ignore[assignment]

if TYPE_CHECKING:
    from loomc.services.pipeline import Compiler


def create_compiler() -> "Compiler":
    """Compiler factory.

    Returns:
        A `Compiler` wired to the environment's configuration.
    """
    if load_dotenv is not None:
        load_dotenv()
        env_local = pathlib.Path(".env.local")
        if env_local.exists():
            load_dotenv(dotenv_path=env_local, override=True)

    from loomc.config import get_config
    from loomc.logging_config import configure_logging
    from loomc.services.pipeline import Compiler

    config = get_config()
    configure_logging(config)
    return Compiler(config)
