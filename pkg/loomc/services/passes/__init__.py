"""Graph-level optimization passes."""

from loomc.services.passes.constprop import pass_constprop
from loomc.services.passes.decompose import pass_decompose
from loomc.services.passes.graph_rewrite import pass_graph_rewrite
from loomc.services.passes.pass_manager import PassEntry, PassManager, PipelineReport, default_passes
from loomc.services.passes.result import PassResult
from loomc.services.passes.shape_inference import pass_shape_inference

__all__ = [
    "PassEntry",
    "PassManager",
    "PassResult",
    "PipelineReport",
    "default_passes",
    "pass_constprop",
    "pass_decompose",
    "pass_graph_rewrite",
    "pass_shape_inference",
]
