# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled patch-extraction kernels backing the convolution ops.

Layout contract (shared with the numpy fallback in ``_convkern_py``):
``im2col2d`` of a (C, H, W) map yields a (C*kh*kw, Ho*Wo) matrix whose
row index is ``(c*kh + i)*kw + j`` and whose column index is
``oi*Wo + oj``; ``col2im2d`` is its exact adjoint (scatter-add).
"""

import numpy as np

cimport cython

ctypedef fused real:
    float
    double


cdef inline int _out_len(int n, int k, int stride, int pad) nogil:
    return (n + 2 * pad - k) // stride + 1


@cython.boundscheck(False)
@cython.wraparound(False)
def im2col2d(real[:, :, ::1] x, int kh, int kw, int stride, int ph, int pw):
    cdef int C = x.shape[0]
    cdef int H = x.shape[1]
    cdef int W = x.shape[2]
    cdef int Ho = _out_len(H, kh, stride, ph)
    cdef int Wo = _out_len(W, kw, stride, pw)

    dtype = np.float32 if real is float else np.float64
    cols_arr = np.zeros((C * kh * kw, Ho * Wo), dtype=dtype)
    cdef real[:, ::1] cols = cols_arr

    cdef int c, i, j, oi, oj, ii, row
    cdef int oi_lo, oi_hi, oj_lo, oj_hi, num
    with nogil:
        for c in range(C):
            for i in range(kh):
                # valid oi satisfy 0 <= oi*stride + i - ph < H
                oi_lo = (ph - i + stride - 1) // stride if ph > i else 0
                num = H - 1 - i + ph
                oi_hi = min(Ho, num // stride + 1) if num >= 0 else 0
                for j in range(kw):
                    oj_lo = (pw - j + stride - 1) // stride if pw > j else 0
                    num = W - 1 - j + pw
                    oj_hi = min(Wo, num // stride + 1) if num >= 0 else 0
                    row = (c * kh + i) * kw + j
                    for oi in range(oi_lo, oi_hi):
                        ii = oi * stride + i - ph
                        for oj in range(oj_lo, oj_hi):
                            cols[row, oi * Wo + oj] = x[c, ii, oj * stride + j - pw]
    return cols_arr


@cython.boundscheck(False)
@cython.wraparound(False)
def col2im2d(real[:, ::1] cols, int C, int H, int W,
             int kh, int kw, int stride, int ph, int pw):
    cdef int Ho = _out_len(H, kh, stride, ph)
    cdef int Wo = _out_len(W, kw, stride, pw)

    dtype = np.float32 if real is float else np.float64
    out_arr = np.zeros((C, H, W), dtype=dtype)
    cdef real[:, :, ::1] out = out_arr

    cdef int c, i, j, oi, oj, ii, row
    cdef int oi_lo, oi_hi, oj_lo, oj_hi, num
    with nogil:
        for c in range(C):
            for i in range(kh):
                oi_lo = (ph - i + stride - 1) // stride if ph > i else 0
                num = H - 1 - i + ph
                oi_hi = min(Ho, num // stride + 1) if num >= 0 else 0
                for j in range(kw):
                    oj_lo = (pw - j + stride - 1) // stride if pw > j else 0
                    num = W - 1 - j + pw
                    oj_hi = min(Wo, num // stride + 1) if num >= 0 else 0
                    row = (c * kh + i) * kw + j
                    for oi in range(oi_lo, oi_hi):
                        ii = oi * stride + i - ph
                        for oj in range(oj_lo, oj_hi):
                            out[c, ii, oj * stride + j - pw] += cols[row, oi * Wo + oj]
    return out_arr
