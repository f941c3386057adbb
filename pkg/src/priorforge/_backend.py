"""Kernel backend selection.

Set ``PRIOR_FORGE_NUMBA=0`` to force the pure-numpy kernels; any other value
(or unset) selects the numba-compiled kernels when numba is importable. The
choice is made once, on first use. `benchmarks/bench_kernels.py` compares the
two backends head to head.
"""

import os
import sys

_kernels = None
_name = None


def _select():
    global _kernels, _name
    if os.environ.get("PRIOR_FORGE_NUMBA", "1") == "0":
        from . import _kernels_np as mod

        _kernels, _name = mod, "numpy"
        return
    try:
        from . import _kernels_nb as mod

        _kernels, _name = mod, "numba"
    except ImportError:
        print(
            "priorforge: numba not available, falling back to numpy kernels",
            file=sys.stderr,
        )
        from . import _kernels_np as mod

        _kernels, _name = mod, "numpy"


def get_kernels():
    if _kernels is None:
        _select()
    return _kernels


def backend_name() -> str:
    if _kernels is None:
        _select()
    return _name
