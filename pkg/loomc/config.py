"""Environment-based configuration."""

from __future__ import annotations

import os
from dataclasses import dataclass, field


def env_flag(name: str) -> bool:
    """Interpret an environment variable as a boolean switch."""

    return os.getenv(name, "").strip().lower() in ("1", "true", "yes", "on")


def env_int(name: str, default: int) -> int:
    raw = os.getenv(name)
    if not raw:
        return default
    try:
        return int(raw)
    except ValueError:
        return default


@dataclass(frozen=True)
class BaseConfig:
    """Base configuration shared by all environments."""

    LOOMC_ENV: str = field(default_factory=lambda: os.getenv("LOOMC_ENV", "release"))
    LOG_LEVEL: str = field(default_factory=lambda: os.getenv("LOG_LEVEL", "WARNING"))
    MAX_REWRITE_SWEEPS: int = field(default_factory=lambda: env_int("LOOMC_MAX_SWEEPS", 64))
    SHOW_PROGRESS: bool = field(default_factory=lambda: env_flag("LOOMC_PROGRESS"))
    DEBUG: bool = False


@dataclass(frozen=True)
class DebugConfig(BaseConfig):
    """Debug configuration: the interpreter rejects reads of unwritten buffer elements."""

    DEBUG: bool = True


@dataclass(frozen=True)
class ReleaseConfig(BaseConfig):
    """Release configuration: unwritten buffer elements read as zero."""

    DEBUG: bool = False


def get_config() -> BaseConfig:
    """Resolve configuration based on LOOMC_DEBUG."""

    if env_flag("LOOMC_DEBUG"):
        return DebugConfig()
    return ReleaseConfig()
