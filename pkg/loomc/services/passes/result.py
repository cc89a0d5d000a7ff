from __future__ import annotations

from dataclasses import dataclass, field

from loomc.models.graph import GraphModule


@dataclass(frozen=True)
class PassResult:
    """Outcome of one graph pass. `module` is the (mutated) input module."""

    name: str
    module: GraphModule
    changed: bool
    rewrites: int = 0
    sweeps: int = 0
    fired: dict[str, int] = field(default_factory=dict)
    ops_before: int = 0
    ops_after: int = 0
    elapsed_ms: float = 0.0
