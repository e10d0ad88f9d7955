"""Hot conv/pool kernels with import-time backend selection.

The compiled extension is used when it has been built; otherwise the numpy
implementation is used. Set ``COUNTPOINT_KERNELS=python`` to force the
fallback.
"""

from __future__ import annotations

import os

from . import _pykernels

BACKEND = "python"
conv_pool_forward = _pykernels.conv_pool_forward
conv_pool_backward = _pykernels.conv_pool_backward

if os.environ.get("COUNTPOINT_KERNELS", "").lower() != "python":
    try:
        from . import _ckernels
    except ImportError:
        pass
    else:
        BACKEND = "cython"
        conv_pool_forward = _ckernels.conv_pool_forward
        conv_pool_backward = _ckernels.conv_pool_backward


def backends():
    """Mapping of every importable backend name to its module."""
    out = {"python": _pykernels}
    try:
        from . import _ckernels
    except ImportError:
        return out
    out["cython"] = _ckernels
    return out
