"""State-recursion kernels, compiled when available.

The Cython extension ``carbontax._kernels`` is used if it was built; the
pure-Python module is the fallback.  Set ``CARBONTAX_PURE_PYTHON=1`` to
force the fallback.
"""

from __future__ import annotations

import os

from . import _kernels_py

if os.environ.get("CARBONTAX_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

pruned_states = _impl.pruned_states
unpruned_states = _impl.unpruned_states
risky_fixed_point = _impl.risky_fixed_point

__all__ = ["BACKEND", "pruned_states", "unpruned_states", "risky_fixed_point"]
