"""Backend selection for the hot loops.

The compiled extension ``_ckernels`` is used when it was built and
``EDCNET_PURE_PYTHON`` is not set to ``1``; otherwise the NumPy versions in
``_pykernels`` are used. Both expose the same four functions.
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

if _ckernels is not None and os.environ.get("EDCNET_PURE_PYTHON", "") != "1":
    BACKEND = "cython"
else:
    BACKEND = "python"

_impl = BACKENDS[BACKEND]

splat_images = _impl.splat_images
tail_energy = _impl.tail_energy
sticky_signs = _impl.sticky_signs
render_frames = _impl.render_frames

__all__ = [
    "BACKEND",
    "BACKENDS",
    "splat_images",
    "tail_energy",
    "sticky_signs",
    "render_frames",
]
