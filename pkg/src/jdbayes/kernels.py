"""Backend selection for the hot kernels.

The compiled extension is used when importable; setting the environment
variable ``JDBAYES_PURE_PYTHON=1`` forces the pure-Python fallback.
"""
import os

from . import _pykernels

BACKENDS = {"python": _pykernels}

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None
else:
    BACKENDS["cython"] = _ckernels

if os.environ.get("JDBAYES_PURE_PYTHON", "") not in ("", "0") or _ckernels is None:
    BACKEND = "python"
else:
    BACKEND = "cython"

active = BACKENDS[BACKEND]


def get(name=None):
    """Return the kernel module ``name`` (default: the active one)."""
    return active if name is None else BACKENDS[name]


CONTRAST0_MU = _pykernels.CONTRAST0_MU
CONTRAST1_SIGMA = _pykernels.CONTRAST1_SIGMA
CONTRAST1_MU = _pykernels.CONTRAST1_MU
CONTRAST2_ALPHA = _pykernels.CONTRAST2_ALPHA
MPCN = _pykernels.MPCN
RWM = _pykernels.RWM
