"""Backend selection for the convolution patch kernels.

The compiled Cython extension is preferred; the numpy implementation is a
drop-in fallback producing bit-identical results.  ``SUSING_KERNELS`` set to
``numpy`` or ``cython`` forces a backend (the latter fails loudly if the
extension is missing, so a broken build cannot silently degrade).
"""

import os

import numpy as np

from . import _convkern_py

_FORCED = os.environ.get("SUSING_KERNELS", "").strip().lower()

try:
    from . import _convkern as _compiled
except ImportError:
    _compiled = None

if _FORCED == "numpy":
    _impl = _convkern_py
elif _FORCED == "cython":
    if _compiled is None:
        raise ImportError("SUSING_KERNELS=cython but the compiled extension is unavailable")
    _impl = _compiled
else:
    _impl = _compiled if _compiled is not None else _convkern_py


def backend_name():
    return "cython" if _impl is _compiled else "numpy"


def available_backends():
    names = ["numpy"]
    if _compiled is not None:
        names.insert(0, "cython")
    return names


def get_backend(name):
    """Return the raw kernel module for an explicit backend (benchmarks)."""
    if name == "numpy":
        return _convkern_py
    if name == "cython":
        if _compiled is None:
            raise ValueError("compiled kernel extension is not available")
        return _compiled
    raise ValueError(f"unknown kernel backend {name!r}")


def _prep(x):
    x = np.ascontiguousarray(x)
    if x.dtype not in (np.float32, np.float64):
        x = x.astype(np.float64)
    return x


def im2col2d(x, kh, kw, stride, ph, pw, impl=None):
    """Unfold a (C, H, W) map into a (C*kh*kw, Ho*Wo) patch matrix."""
    impl = impl or _impl
    return impl.im2col2d(_prep(x), kh, kw, stride, ph, pw)


def col2im2d(cols, shape, kh, kw, stride, ph, pw, impl=None):
    """Adjoint of :func:`im2col2d`: scatter-add patches back onto (C, H, W)."""
    impl = impl or _impl
    c, h, w = shape
    return impl.col2im2d(_prep(cols), c, h, w, kh, kw, stride, ph, pw)
