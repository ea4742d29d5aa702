"""Backend selection for the hot kernels.

``DEMCRACK_BACKEND`` picks the implementation: ``numba`` (JIT, the default
when numba imports), ``numpy`` (vectorised fallback) or ``auto``.
"""

from __future__ import annotations

import logging
import os

log = logging.getLogger(__name__)

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f

BACKENDS = ("numba", "numpy")


def requested_backend() -> str:
    name = os.environ.get("DEMCRACK_BACKEND", "auto").strip().lower()
    if name in ("", "auto"):
        return "numba" if HAVE_NUMBA else "numpy"
    if name not in BACKENDS:
        raise ValueError(f"DEMCRACK_BACKEND must be one of {BACKENDS} or 'auto', got {name!r}")
    if name == "numba" and not HAVE_NUMBA:
        log.warning("numba requested but not importable, using numpy kernels")
        return "numpy"
    return name
