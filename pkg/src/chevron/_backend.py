"""Kernel backend selection.

The compiled extension is used when it imports; ``CHEVRON_BACKEND=python``
forces the pure-Python kernels. :func:`use_backend` switches at run time
(benchmarks and parity tests).
"""

import logging
import os

from . import _pykernels

log = logging.getLogger(__name__)

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

kernels = _pykernels


def available():
    return ["compiled", "python"] if _compiled is not None else ["python"]


def use_backend(name):
    """Select ``"compiled"`` or ``"python"`` kernels; returns the previous name."""
    global kernels
    previous = kernels.BACKEND
    if name == "compiled":
        if _compiled is None:
            raise ImportError("chevron._kernels is not built; run `pip install -e .`")
        kernels = _compiled
    elif name == "python":
        kernels = _pykernels
    else:
        raise ValueError(f"unknown backend {name!r}")
    return previous


def current():
    return kernels.BACKEND


_requested = os.environ.get("CHEVRON_BACKEND", "").strip().lower()
if _requested == "python" or _compiled is None:
    if _requested not in ("", "python"):
        log.warning("CHEVRON_BACKEND=%s unavailable, using python kernels", _requested)
    kernels = _pykernels
else:
    kernels = _compiled
