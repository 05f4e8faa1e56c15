"""Backend selection for the raster kernels.

The compiled extension is used when it imports; otherwise the pure-Python
module takes over. Set ``SEMVOS_BACKEND=python`` to force the fallback.
"""
import os

from . import _pykernels

if os.environ.get("SEMVOS_BACKEND", "").lower() == "python":
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl
    except ImportError:  # extension not built
        _impl = _pykernels

BACKEND = "compiled" if _impl is not _pykernels else "python"

label_components = _impl.label_components
absorb_unlabeled = _impl.absorb_unlabeled
near_mask = _impl.near_mask


def available_backends():
    """Return ``{name: module}`` for every importable backend."""
    backends = {"python": _pykernels}
    try:
        from . import _ckernels
    except ImportError:
        pass
    else:
        backends["compiled"] = _ckernels
    return backends
