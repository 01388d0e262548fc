"""Hot numeric kernels with a compiled core and a numpy fallback.

The compiled module is used when it imports; set ``PATHRAG_KERNELS=python``
to force the fallback. ``BACKEND`` names the active implementation.
"""

import os

from . import _pykernels

_compiled = None
if os.environ.get("PATHRAG_KERNELS", "").lower() != "python":
    try:
        from . import _ckernels as _compiled
    except ImportError:
        _compiled = None

_active = _compiled if _compiled is not None else _pykernels
BACKEND = "cython" if _compiled is not None else "python"

binary_open_cross = _active.binary_open_cross
label_components = _active.label_components
knn_edges = _active.knn_edges


def implementations():
    """Map backend name to module, for equivalence tests and benchmarks."""
    impls = {"python": _pykernels}
    if _compiled is not None:
        impls["cython"] = _compiled
    return impls
