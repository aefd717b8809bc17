"""Backend selection for the time-step kernels.

The compiled extension is preferred. Setting ``NNCDA_PURE_PYTHON=1`` in the
environment forces the NumPy fallback, as does a missing or broken build.
"""

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("NNCDA_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py

spectral_velocity = _impl.spectral_velocity
basdevant_products = _impl.basdevant_products
assemble_tendency = _impl.assemble_tendency
if_euler_update = _impl.if_euler_update


def backend(name: str):
    """Return the kernel module for ``name`` ("python" or "cython")."""
    if name == "python":
        return _kernels_py
    if name == "cython":
        from . import _kernels

        return _kernels
    raise ValueError(f"unknown kernel backend {name!r}")
