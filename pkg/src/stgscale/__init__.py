"""stgscale: automated space/time scaling of feed-forward streaming task graphs.

The library enumerates area/throughput implementation variants for each graph
node, selects implementations, replica counts and fork/join interconnect to
either minimize area under a throughput target or maximize throughput under an
area budget, and validates every result with a cycle-level blocking-FIFO
simulator.
"""

from stgscale.model import (
    Application,
    Assignment,
    Channel,
    CompositeNode,
    Implementation,
    ImplementationLibrary,
    OpGraph,
    OpKind,
    OpNode,
    OptimizationTarget,
    Selection,
    total_area,
    validate_application,
)

__version__ = "0.1.0"

__all__ = [
    "Application",
    "Assignment",
    "Channel",
    "CompositeNode",
    "Implementation",
    "ImplementationLibrary",
    "OpGraph",
    "OpKind",
    "OpNode",
    "OptimizationTarget",
    "Selection",
    "total_area",
    "validate_application",
    "__version__",
]
