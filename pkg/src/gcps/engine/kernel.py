"""Selects the simulation kernel at import time.

The compiled ``_ckernel`` extension is used when it was built; otherwise, or
when ``GCPS_PURE_PYTHON=1`` is set, the pure-Python ``_pykernel`` is used.
Both expose the same ``run_chunk`` and produce identical trajectories.
"""

import os

from . import _pykernel

try:
    from . import _ckernel
except ImportError:  # extension not built
    _ckernel = None

BACKENDS = {"python": _pykernel.run_chunk}
if _ckernel is not None:
    BACKENDS["cython"] = _ckernel.run_chunk

if os.environ.get("GCPS_PURE_PYTHON", "").lower() in ("1", "true", "yes") or _ckernel is None:
    BACKEND = "python"
else:
    BACKEND = "cython"


def get_kernel(name=None):
    name = name or BACKEND
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"kernel backend {name!r} unavailable; have {sorted(BACKENDS)}") from None
