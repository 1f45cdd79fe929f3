"""Exception hierarchy shared across the package."""

from __future__ import annotations


class StgError(Exception):
    """Base class for all stgscale errors."""


class StructuralError(StgError):
    """A reference or graph structure is broken (dangling id, missing port)."""


class ParameterError(StgError):
    """An operation was called with an out-of-range parameter."""


class LegalityError(StgError):
    """A transformation would change program semantics (e.g. replicating a
    stateful node)."""


class InfeasibleError(StgError):
    """No assignment satisfies the optimization target."""


class InternalError(StgError):
    """An internal invariant failed; indicates a bug, maps to exit status 3."""
