from __future__ import annotations

from pathlib import Path
from typing import Callable

import numpy as np
import pytest

from loomc.config import DebugConfig, ReleaseConfig
from loomc.models.affine import AffineProgram
from loomc.models.graph import GraphModule
from loomc.services.pipeline import CompileOptions, Compiler, EmitLevel

GOLDEN_DIR = Path(__file__).parent / "golden"


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240607)


@pytest.fixture
def debug_config() -> DebugConfig:
    return DebugConfig()


@pytest.fixture
def compiler() -> Compiler:
    return Compiler(config=DebugConfig())


@pytest.fixture
def release_compiler() -> Compiler:
    return Compiler(config=ReleaseConfig())


@pytest.fixture
def golden() -> Callable[[str], str]:
    def read(name: str) -> str:
        return (GOLDEN_DIR / name).read_text(encoding="utf-8")

    return read


@pytest.fixture
def compile_program(compiler: Compiler) -> Callable[..., AffineProgram]:
    """Graph -> affine program through the default pass pipeline."""

    def run(module: GraphModule, options: CompileOptions | None = None) -> AffineProgram:
        compilation = compiler.compile(module, options or CompileOptions(), EmitLevel.AFFINE)
        assert compilation.program is not None
        return compilation.program

    return run

