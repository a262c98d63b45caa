"""Pick the event-loop implementation at import time.

``SLOWBOND_BACKEND=python`` forces the pure-Python loop; otherwise the
compiled extension is used when it imports.
"""

import os

from . import _pykernel

try:
    from . import _kernel as _compiled
except ImportError:  # extension not built
    _compiled = None

BACKENDS = {"python": _pykernel}
if _compiled is not None:
    BACKENDS["compiled"] = _compiled


def _choose():
    requested = os.environ.get("SLOWBOND_BACKEND", "").strip().lower()
    if requested == "python" or _compiled is None:
        return "python"
    return "compiled"


NAME = _choose()
advance = BACKENDS[NAME].advance
advance_count = BACKENDS[NAME].advance_count


def get(name=None):
    """Return the kernel module of a named backend (default: the active one)."""
    if name is None:
        name = NAME
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"backend {name!r} unavailable; have {sorted(BACKENDS)}") from None
