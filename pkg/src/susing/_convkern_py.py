"""Numpy fallback for the compiled patch-extraction kernels.

Same layout contract as ``_convkern``: im2col row index is
``(c*kh + i)*kw + j``, column index ``oi*Wo + oj``; col2im scatter-adds.
"""

import numpy as np
from numpy.lib.stride_tricks import as_strided


def _out_len(n, k, stride, pad):
    return (n + 2 * pad - k) // stride + 1


def im2col2d(x, kh, kw, stride, ph, pw):
    c, h, w = x.shape
    ho = _out_len(h, kh, stride, ph)
    wo = _out_len(w, kw, stride, pw)
    xp = np.pad(x, ((0, 0), (ph, ph), (pw, pw))) if (ph or pw) else x
    s0, s1, s2 = xp.strides
    view = as_strided(xp, shape=(c, kh, kw, ho, wo),
                      strides=(s0, s1, s2, s1 * stride, s2 * stride))
    return view.reshape(c * kh * kw, ho * wo)


def col2im2d(cols, c, h, w, kh, kw, stride, ph, pw):
    ho = _out_len(h, kh, stride, ph)
    wo = _out_len(w, kw, stride, pw)
    blocks = cols.reshape(c, kh, kw, ho, wo)
    out = np.zeros((c, h + 2 * ph, w + 2 * pw), dtype=cols.dtype)
    for i in range(kh):
        for j in range(kw):
            out[:, i:i + stride * ho:stride, j:j + stride * wo:stride] += blocks[:, i, j]
    return np.ascontiguousarray(out[:, ph:ph + h, pw:pw + w])
