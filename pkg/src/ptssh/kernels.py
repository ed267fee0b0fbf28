"""Backend selection for the RK4 propagation kernel.

The compiled Cython extension is used when it can be imported; otherwise the
numpy implementation is used.  ``PTSSH_BACKEND=python`` forces the fallback.
"""
import os

from . import _rk4_py

try:
    from . import _rk4 as _compiled
except ImportError:  # extension not built
    _compiled = None

BACKENDS = {"python": _rk4_py.propagate}
if _compiled is not None:
    BACKENDS["compiled"] = _compiled.propagate

if os.environ.get("PTSSH_BACKEND", "").lower() == "python" or _compiled is None:
    BACKEND = "python"
else:
    BACKEND = "compiled"

propagate = BACKENDS[BACKEND]


def get_propagator(name=None):
    """Return the propagate function for ``name`` (default: the selected backend)."""
    if name is None:
        return propagate
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"backend {name!r} unavailable; have {sorted(BACKENDS)}") from None
