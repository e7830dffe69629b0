"""popgraph: stochastic population protocols on graphs.

A deterministic, seedable simulator for pairwise-interaction protocols on
connected graphs, with three stable leader-election protocols (a six-state
token protocol, a max-identifier protocol, and a streak-clock-driven
space-efficient protocol), epidemic broadcast and random-walk measurement
tools, analytic bound formulas, and the cover/isolation machinery behind
the matching lower-bound constructions.
"""

from .engine import (
    Configuration,
    Interaction,
    ProtocolSpec,
    Rng,
    TrialResult,
    TrialStats,
    run_trials,
    run_until_stable,
    sample_interaction,
    step,
)
from .graph import (
    Cover,
    Graph,
    GraphMetrics,
    ball,
    clique,
    compute_metrics,
    cycle,
    cycle_cover,
    diameter,
    edge_expansion_exact,
    from_edges,
    generate,
    generate_renitent,
    generate_target_time,
    gnp,
    path,
    read_edgelist,
    star,
    torus,
    write_edgelist,
)
from . import analysis, clock, dynamics, protocols

__version__ = "0.1.0"

__all__ = [
    "Configuration",
    "Interaction",
    "ProtocolSpec",
    "Rng",
    "TrialResult",
    "TrialStats",
    "run_trials",
    "run_until_stable",
    "sample_interaction",
    "step",
    "Cover",
    "Graph",
    "GraphMetrics",
    "ball",
    "clique",
    "compute_metrics",
    "cycle",
    "cycle_cover",
    "diameter",
    "edge_expansion_exact",
    "from_edges",
    "generate",
    "generate_renitent",
    "generate_target_time",
    "gnp",
    "path",
    "read_edgelist",
    "star",
    "torus",
    "write_edgelist",
    "analysis",
    "clock",
    "dynamics",
    "protocols",
    "__version__",
]
