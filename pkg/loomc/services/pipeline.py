"""The compiler service: import -> graph passes -> loops -> affine -> interpreter."""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

from loomc.config import BaseConfig, get_config
from loomc.errors import IoError, ParseError, UsageError, VerificationError
from loomc.models.affine import AffineProgram
from loomc.models.graph import GraphModule, OpKind
from loomc.models.loop_ir import LoopModule
from loomc.models.tensor import TensorValue
from loomc.repositories.model_repository import ModelRepository
from loomc.repositories.payload_repository import TENSOR_SUFFIX, PayloadRepository
from loomc.repositories.plan_repository import PlanRepository, is_plan
from loomc.services.affine_interpreter import interpret
from loomc.services.affine_printer import emit_affine_text
from loomc.services.graph_printer import print_graph
from loomc.services.loop_printer import print_loop_module
from loomc.services.loop_verifier import verify_loop_module
from loomc.services.lowering.graph_to_loops import lower_graph_to_loops
from loomc.services.lowering.loops_to_affine import lower_loops_to_affine
from loomc.services.model_importer import ModelImporter
from loomc.services.passes.pass_manager import PassManager, PipelineReport, default_passes
from loomc.services.reference_evaluator import reference_eval
from loomc.services.scheduling import tile_iterate

logger = logging.getLogger(__name__)


class EmitLevel(str, Enum):
    GRAPH = "graph"
    GRAPH_OPT = "graph-opt"
    LOOP = "loop"
    AFFINE = "affine"
    PLAN = "plan"


@dataclass(frozen=True)
class CompileOptions:
    decompose: bool = True
    rewrite: bool = True
    constprop: bool = True
    tiles: tuple[tuple[OpKind, int], ...] = ()


@dataclass
class Compilation:
    """Artifacts of one compile, filled up to the requested level."""

    graph: GraphModule | None = None
    optimized: GraphModule | None = None
    report: PipelineReport | None = None
    loops: LoopModule | None = None
    program: AffineProgram | None = None
    seconds: float = 0.0


@dataclass(frozen=True)
class RunResult:
    outputs: list[TensorValue]
    output_paths: list[Path]
    compile_seconds: float
    run_seconds: float
    reference: list[TensorValue] | None = None
    max_abs_diff: float | None = None
    tolerance: float | None = None
    compilation: Compilation | None = None

    @property
    def verified(self) -> bool:
        return self.max_abs_diff is None or self.max_abs_diff <= (self.tolerance or 0.0)


@dataclass
class Source:
    """A loaded model: a graph to compile or an already compiled plan."""

    path: Path
    graph: GraphModule | None = None
    program: AffineProgram | None = None


def parse_tile(spec: str) -> tuple[OpKind, int]:
    """`MatMul:2` -> (OpKind.MATMUL, 2)."""

    kind_name, sep, size_text = spec.partition(":")
    kind = OpKind.parse(kind_name)
    if not sep or kind is None:
        raise UsageError(message=f"--tile expects <op-kind>:<size>, got {spec!r}")
    try:
        size = int(size_text)
    except ValueError:
        raise UsageError(message=f"--tile size must be an integer, got {size_text!r}") from None
    if size < 1:
        raise UsageError(message=f"--tile size must be >= 1, got {size}")
    return kind, size


def max_abs_diff(actual: Sequence[TensorValue], expected: Sequence[TensorValue]) -> float:
    worst = 0.0
    for a, e in zip(actual, expected):
        if a.data.size:
            diff = np.abs(a.data.astype(np.float64) - e.data.astype(np.float64))
            # NaN == NaN counts as agreement
            worst = max(worst, float(np.max(np.where(np.isnan(diff), 0.0, diff))))
    return worst


class Compiler:
    def __init__(
        self,
        config: BaseConfig | None = None,
        importer: ModelImporter | None = None,
        plans: PlanRepository | None = None,
        payloads: PayloadRepository | None = None,
    ) -> None:
        self.config = config or get_config()
        self.payloads = payloads or PayloadRepository()
        self.importer = importer or ModelImporter(ModelRepository(), self.payloads)
        self.plans = plans or PlanRepository()

    # --- loading --------------------------------------------------------------

    def load(self, path: str | Path) -> Source:
        """Load a `model.json` manifest (or a directory holding one) or a plan file."""

        path = Path(path)
        if path.is_dir():
            path = path / "model.json"
        text = self._read_text(path)
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(message=f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from exc
        if is_plan(raw):
            return Source(path, program=self.plans.loads(text, source=str(path)))
        manifest = self.importer.models.loads(text, source=str(path))
        return Source(path, graph=self.importer.import_manifest(manifest, path.parent))

    @staticmethod
    def _read_text(path: Path) -> str:
        try:
            return path.read_text(encoding="utf-8")
        except OSError as exc:
            raise IoError(message=f"cannot read {path}: {exc.strerror or exc}") from exc

    # --- compilation ----------------------------------------------------------

    def optimize(self, module: GraphModule, options: CompileOptions) -> PipelineReport:
        passes = default_passes(options.decompose, options.rewrite, options.constprop)
        return PassManager(passes, self.config.MAX_REWRITE_SWEEPS).run(module.clone())

    def lower(self, module: GraphModule, options: CompileOptions) -> LoopModule:
        loops = lower_graph_to_loops(module)
        for kind, size in options.tiles:
            tiled = sum(tile_iterate(it, size) for it in loops.function.iterates if it.op_kind == kind.value)
            logger.debug("tiled %d %s nest(s) by %d", tiled, kind.value, size)
        if options.tiles:
            diagnostics = verify_loop_module(loops)
            if diagnostics:
                raise VerificationError(
                    message="tiled loop module is invalid: " + "; ".join(str(d) for d in diagnostics),
                    details=diagnostics,
                )
        return loops

    def compile(self, graph: GraphModule, options: CompileOptions, level: EmitLevel = EmitLevel.AFFINE) -> Compilation:
        started = time.perf_counter()
        result = Compilation(graph)
        if level is not EmitLevel.GRAPH:
            result.report = self.optimize(graph, options)
            result.optimized = result.report.module
        if level in (EmitLevel.LOOP, EmitLevel.AFFINE, EmitLevel.PLAN):
            assert result.optimized is not None
            result.loops = self.lower(result.optimized, options)
        if level in (EmitLevel.AFFINE, EmitLevel.PLAN):
            assert result.loops is not None
            result.program = lower_loops_to_affine(result.loops)
        result.seconds = time.perf_counter() - started
        logger.debug("compiled to %s in %.3f s", level.value, result.seconds)
        return result

    def emit(self, compilation: Compilation, level: EmitLevel) -> str:
        if level is EmitLevel.GRAPH:
            assert compilation.graph is not None
            return print_graph(compilation.graph)
        if level is EmitLevel.GRAPH_OPT:
            assert compilation.optimized is not None
            return print_graph(compilation.optimized)
        if level is EmitLevel.LOOP:
            assert compilation.loops is not None
            return print_loop_module(compilation.loops)
        assert compilation.program is not None
        if level is EmitLevel.AFFINE:
            return emit_affine_text(compilation.program)
        return self.plans.dumps(compilation.program)

    # --- execution ------------------------------------------------------------

    def run(
        self,
        source: Source,
        input_paths: Sequence[str | Path],
        out_dir: str | Path,
        options: CompileOptions | None = None,
        verify: bool = False,
    ) -> RunResult:
        options = options or CompileOptions()
        compile_seconds = 0.0
        compilation: Compilation | None = None
        if source.program is not None:
            if verify:
                raise UsageError(message="--verify needs a model.json; plans carry no graph to check against")
            program = source.program
        else:
            assert source.graph is not None
            compilation = self.compile(source.graph, options, EmitLevel.AFFINE)
            assert compilation.program is not None
            program = compilation.program
            compile_seconds = compilation.seconds

        inputs = [self.payloads.read(p) for p in input_paths]
        started = time.perf_counter()
        outputs = interpret(program, inputs, self.config)
        run_seconds = time.perf_counter() - started

        out_dir = Path(out_dir)
        output_paths = [
            self.payloads.write(out_dir / f"output_{i}{TENSOR_SUFFIX}", value) for i, value in enumerate(outputs)
        ]

        if not verify:
            return RunResult(outputs, output_paths, compile_seconds, run_seconds, compilation=compilation)
        assert source.graph is not None
        reference = reference_eval(source.graph, inputs)
        diff = max_abs_diff(outputs, reference)
        scale = max((float(np.max(np.abs(r.data))) for r in reference if r.data.size), default=0.0)
        return RunResult(
            outputs,
            output_paths,
            compile_seconds,
            run_seconds,
            reference,
            diff,
            1e-5 * (1.0 + scale),
            compilation,
        )
