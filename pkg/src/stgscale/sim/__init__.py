"""Cycle-level blocking-FIFO simulator.

The hot stepping loop lives in a compiled extension
(:mod:`stgscale.sim._kernel`) with a pure-Python fallback selected at import
time; see :mod:`stgscale.sim.backend`.
"""

from stgscale.sim.backend import backend_name
from stgscale.sim.engine import (
    SimReport,
    check_equivalence,
    sim_report_csv,
    simulate,
    simulate_implementation,
)

__all__ = [
    "SimReport",
    "backend_name",
    "check_equivalence",
    "sim_report_csv",
    "simulate",
    "simulate_implementation",
]
