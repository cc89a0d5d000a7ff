"""Logging configuration."""

from __future__ import annotations

import logging
import sys

from loomc.config import BaseConfig


def configure_logging(config: BaseConfig) -> None:
    """Configure plain stderr logs for the compiler driver."""

    level_name = str(config.LOG_LEVEL or "WARNING").upper()
    level = getattr(logging, level_name, logging.WARNING)

    logging.basicConfig(
        level=level,
        format="%(asctime)s %(levelname)s %(name)s %(message)s",
        stream=sys.stderr,
    )

    # The interpreter logs every nest at DEBUG; keep it quiet unless asked for.
    if level > logging.DEBUG:
        logging.getLogger("loomc.services.affine_interpreter").setLevel(logging.INFO)
