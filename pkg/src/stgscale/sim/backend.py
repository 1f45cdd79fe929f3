"""Kernel backend selection.

The compiled extension is preferred when importable; set
``STGSCALE_BACKEND=python`` to force the pure-Python fallback (used by the
backend-equivalence tests and the benchmark).
"""

from __future__ import annotations

import os

from stgscale.sim import _kernel_py

_forced = os.environ.get("STGSCALE_BACKEND", "auto").lower()

if _forced == "python":
    _impl = _kernel_py
elif _forced in ("auto", "compiled"):
    try:
        from stgscale.sim import _kernel as _impl  # type: ignore
    except ImportError:
        if _forced == "compiled":
            raise
        _impl = _kernel_py
else:
    raise RuntimeError(f"unknown STGSCALE_BACKEND {_forced!r}")


def backend_name() -> str:
    return _impl.BACKEND


def run(machine):
    return _impl.run(machine)


def run_with(machine, name: str):
    """Run on an explicitly chosen backend (benchmark helper)."""
    if name == "python":
        return _kernel_py.run(machine)
    from stgscale.sim import _kernel
    return _kernel.run(machine)
