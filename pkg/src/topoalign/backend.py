"""Kernel backend selection.

The hot numeric kernels (pairwise distances, the union-find edge sweep,
nearest cross-label lookup) exist twice: as numba-compiled loops and as a
pure-numpy fallback.  The backend is chosen once at import time from the
``TOPOALIGN_BACKEND`` environment variable:

    auto   (default) use numba when importable, numpy otherwise
    numba  require numba, fail loudly if it is missing
    numpy  force the pure-numpy fallback

Both backends implement identical semantics; ``benchmarks/bench_backends.py``
times them side by side.
"""

import os

_requested = os.environ.get("TOPOALIGN_BACKEND", "auto").strip().lower()
if _requested not in ("auto", "numba", "numpy"):
    raise RuntimeError(
        f"TOPOALIGN_BACKEND must be one of auto|numba|numpy, got {_requested!r}"
    )

try:
    import numba  # noqa: F401

    NUMBA_AVAILABLE = True
except ImportError:
    NUMBA_AVAILABLE = False

if _requested == "numba" and not NUMBA_AVAILABLE:
    raise RuntimeError("TOPOALIGN_BACKEND=numba but numba is not importable")

USE_NUMBA = NUMBA_AVAILABLE and _requested != "numpy"


def backend_name() -> str:
    """Name of the kernel backend in use ('numba' or 'numpy')."""
    return "numba" if USE_NUMBA else "numpy"
