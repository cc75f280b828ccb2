"""Hot loops, compiled when the extension is available.

``BACKEND`` names the implementation in use. Setting the environment variable
``RBSIM_PURE_PYTHON=1`` forces the numpy fallback.
"""

import os

from . import _kernels_py

_IMPLS = {"python": _kernels_py}
try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None
else:
    _IMPLS["cython"] = _ckernels

BACKEND = "python" if (_ckernels is None or os.environ.get("RBSIM_PURE_PYTHON") == "1") else "cython"
_impl = _IMPLS[BACKEND]

first_exceedance = _impl.first_exceedance
max_plus_update = _impl.max_plus_update
midpoint_refine = _impl.midpoint_refine


def available():
    return sorted(_IMPLS)


def implementation(name):
    """Kernel namespace for ``name`` ('python' or 'cython')."""
    try:
        return _IMPLS[name]
    except KeyError:
        raise ValueError(f"kernel backend {name!r} not available") from None
