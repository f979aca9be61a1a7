"""Kernel backend selection.

The compiled extension implements the hot loops; the pure-Python module is a
drop-in replacement producing bit-identical draws.  Selection happens once at
import; set POLYAURN_LDA_BACKEND=python (or =cython) to force a choice.
Callers access kernels late-bound as ``backend.impl.<fn>`` so tests and
benchmarks can swap the module.
"""

import os

_choice = os.environ.get("POLYAURN_LDA_BACKEND", "auto").strip().lower()

if _choice in ("", "auto"):
    try:
        from . import _core as impl
    except ImportError:
        from . import _pykernels as impl
elif _choice in ("python", "py", "pure"):
    from . import _pykernels as impl
elif _choice in ("cython", "c", "compiled"):
    from . import _core as impl
else:
    raise ImportError(f"unknown POLYAURN_LDA_BACKEND={_choice!r}")


def name():
    """Name of the active kernel implementation."""
    return impl.IMPL
