"""Selects the branch-and-prune backend at import time.

The compiled extension is used when it was built; otherwise the
pure-Python kernel takes over.  Setting ``FICUT_PURE_PYTHON=1`` forces
the fallback, which the parity tests and the benchmark rely on.
"""
from __future__ import annotations

import os

from . import _kernel_py

BACKEND = "python"
solve = _kernel_py.solve
eval_tape = _kernel_py.eval_tape

if os.environ.get("FICUT_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernel as _compiled
    except ImportError:  # extension not built
        _compiled = None
    if _compiled is not None:
        BACKEND = "cython"
        solve = _compiled.solve
        eval_tape = _compiled.eval_tape


def backends() -> dict:
    """All importable backends by name (used by parity tests and benchmarks)."""
    out = {"python": _kernel_py}
    try:
        from . import _kernel as _compiled
        out["cython"] = _compiled
    except ImportError:
        pass
    return out
