"""Ordered graph pass pipeline with per-pass timing and re-verification."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, replace
from typing import Callable

from loomc.errors import VerificationError
from loomc.models.graph import GraphModule
from loomc.services.passes.constprop import pass_constprop
from loomc.services.passes.decompose import pass_decompose
from loomc.services.passes.graph_rewrite import pass_graph_rewrite
from loomc.services.passes.result import PassResult
from loomc.services.passes.shape_inference import pass_shape_inference
from loomc.services.verifier import verify

logger = logging.getLogger(__name__)

GraphPass = Callable[[GraphModule, int], PassResult]


@dataclass(frozen=True)
class PassEntry:
    name: str
    run: GraphPass
    enabled: bool = True


@dataclass(frozen=True)
class PipelineReport:
    module: GraphModule
    results: tuple[PassResult, ...]

    @property
    def total_ms(self) -> float:
        return sum(r.elapsed_ms for r in self.results)


def default_passes(decompose: bool = True, rewrite: bool = True, constprop: bool = True) -> list[PassEntry]:
    """decompose -> shape-inference -> rewrite -> constprop; shape inference is always on."""

    return [
        PassEntry("decompose", pass_decompose, decompose),
        PassEntry("shape-inference", pass_shape_inference, True),
        PassEntry("rewrite", pass_graph_rewrite, rewrite),
        PassEntry("constprop", pass_constprop, constprop),
    ]


class PassManager:
    def __init__(self, passes: list[PassEntry] | None = None, max_sweeps: int = 64) -> None:
        self.passes = passes if passes is not None else default_passes()
        self.max_sweeps = max_sweeps

    def run(self, module: GraphModule) -> PipelineReport:
        results: list[PassResult] = []
        for entry in self.passes:
            if not entry.enabled:
                logger.info("pass %s: disabled", entry.name)
                continue
            started = time.perf_counter()
            result = entry.run(module, self.max_sweeps)
            elapsed_ms = (time.perf_counter() - started) * 1000.0
            result = replace(result, elapsed_ms=elapsed_ms)
            diagnostics = verify(result.module)
            if diagnostics:
                raise VerificationError(
                    message=f"module invalid after pass {entry.name}: " + "; ".join(str(d) for d in diagnostics),
                    details=diagnostics,
                )
            logger.info(
                "pass %s: %d -> %d ops, %d rewrite(s), %d sweep(s), %.3f ms",
                entry.name,
                result.ops_before,
                result.ops_after,
                result.rewrites,
                result.sweeps,
                elapsed_ms,
            )
            results.append(result)
            module = result.module
        return PipelineReport(module, tuple(results))
