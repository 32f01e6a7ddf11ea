"""Independent loop-based oracles for the tensor ops.

These deliberately avoid im2col, GEMM, and any code under ``susing`` so they
can act as references.  They are slow; keep the shapes small except where a
test explicitly needs a production-sized case.
"""

import math

import numpy as np


def naive_conv2d(x, kernel, bias, stride, pad):
    co, ci, kh, kw = kernel.shape
    c, h, w = x.shape
    assert c == ci
    ho = (h + 2 * pad - kh) // stride + 1
    wo = (w + 2 * pad - kw) // stride + 1
    out = np.zeros((co, ho, wo), dtype=x.dtype)
    for o in range(co):
        for oi in range(ho):
            for oj in range(wo):
                acc = 0.0
                for c_ in range(ci):
                    for i in range(kh):
                        ii = oi * stride + i - pad
                        if ii < 0 or ii >= h:
                            continue
                        for j in range(kw):
                            jj = oj * stride + j - pad
                            if 0 <= jj < w:
                                acc += x[c_, ii, jj] * kernel[o, c_, i, j]
                out[o, oi, oj] = acc + bias[o]
    return out


def naive_conv2d_patch(x, kernel, bias, stride, pad):
    """Per-output-pixel patch products; usable on production-sized inputs."""
    co, ci, kh, kw = kernel.shape
    c, h, w = x.shape
    assert c == ci
    xp = np.pad(x, ((0, 0), (pad, pad), (pad, pad)))
    ho = (h + 2 * pad - kh) // stride + 1
    wo = (w + 2 * pad - kw) // stride + 1
    out = np.zeros((co, ho, wo), dtype=x.dtype)
    for oi in range(ho):
        for oj in range(wo):
            patch = xp[:, oi * stride:oi * stride + kh, oj * stride:oj * stride + kw]
            for o in range(co):
                out[o, oi, oj] = (patch * kernel[o]).sum() + bias[o]
    return out


def naive_transposed_conv2d(x, kernel, bias, stride, pad, out_size):
    c0, c1, kh, kw = kernel.shape
    assert x.shape[0] == c0
    ho, wo = out_size
    out = np.zeros((c1, ho, wo), dtype=x.dtype)
    for c_ in range(c0):
        for i in range(x.shape[1]):
            for j in range(x.shape[2]):
                v = x[c_, i, j]
                for o in range(c1):
                    for ki in range(kh):
                        ii = i * stride + ki - pad
                        if ii < 0 or ii >= ho:
                            continue
                        for kj in range(kw):
                            jj = j * stride + kj - pad
                            if 0 <= jj < wo:
                                out[o, ii, jj] += v * kernel[c_, o, ki, kj]
    return out + bias[:, None, None]


def naive_conv1d(x, kernel, bias, stride, pad):
    co, ci, k = kernel.shape
    c, n = x.shape
    assert c == ci
    lo = (n + 2 * pad - k) // stride + 1
    out = np.zeros((co, lo), dtype=x.dtype)
    for o in range(co):
        for ol in range(lo):
            acc = 0.0
            for c_ in range(ci):
                for t in range(k):
                    tt = ol * stride + t - pad
                    if 0 <= tt < n:
                        acc += x[c_, tt] * kernel[o, c_, t]
            out[o, ol] = acc + bias[o]
    return out


def naive_dense(x, w, b):
    lead = x.shape[:-1]
    x2 = x.reshape(-1, x.shape[-1])
    out = np.zeros((x2.shape[0], w.shape[0]), dtype=x.dtype)
    for r in range(x2.shape[0]):
        for o in range(w.shape[0]):
            acc = 0.0
            for d in range(w.shape[1]):
                acc += x2[r, d] * w[o, d]
            out[r, o] = acc + b[o]
    return out.reshape(lead + (w.shape[0],))


def naive_axis_mean(x, axis):
    c, h, w = x.shape
    if axis == "width":
        out = np.zeros((c, h), dtype=x.dtype)
        for c_ in range(c):
            for i in range(h):
                out[c_, i] = sum(x[c_, i, j] for j in range(w)) / w
        return out
    out = np.zeros((c, w), dtype=x.dtype)
    for c_ in range(c):
        for j in range(w):
            out[c_, j] = sum(x[c_, i, j] for i in range(h)) / h
    return out


def _sigmoid(v):
    return 1.0 / (1.0 + math.exp(-v))


def naive_stripe_pool(x, kh_w, kh_b, kv_w, kv_b, fuse_w, fuse_b):
    """Direct-loop stripe gating: row/column means, per-direction length-3
    convolutions (pad 1), broadcast sum, 1x1 fuse, sigmoid gate, multiply."""
    c, h, w = x.shape
    row_mean = naive_axis_mean(x, "width")
    col_mean = naive_axis_mean(x, "height")

    yh = np.zeros((c, h), dtype=x.dtype)
    for o in range(c):
        for i in range(h):
            acc = 0.0
            for c_ in range(c):
                for t in range(3):
                    ii = i + t - 1
                    if 0 <= ii < h:
                        acc += row_mean[c_, ii] * kh_w[o, c_, t]
            yh[o, i] = acc + kh_b[o]

    yv = np.zeros((c, w), dtype=x.dtype)
    for o in range(c):
        for j in range(w):
            acc = 0.0
            for c_ in range(c):
                for t in range(3):
                    jj = j + t - 1
                    if 0 <= jj < w:
                        acc += col_mean[c_, jj] * kv_w[o, c_, t]
            yv[o, j] = acc + kv_b[o]

    z = np.zeros_like(x)
    for o in range(c):
        for i in range(h):
            for j in range(w):
                pre = fuse_b[o]
                for c_ in range(c):
                    pre += fuse_w[o, c_, 0, 0] * (yh[c_, i] + yv[c_, j])
                z[o, i, j] = x[o, i, j] * _sigmoid(pre)
    return z


def naive_dft_power(signal, n_fft, hop, window):
    """Total |X|^2 over centered frames via an explicit DFT matrix."""
    half = n_fft // 2
    padded = np.concatenate([signal[half:0:-1], signal, signal[-2:-half - 2:-1]])
    n_frames = 1 + len(signal) // hop
    k = np.arange(n_fft // 2 + 1)
    n = np.arange(n_fft)
    dft_re = np.cos(-2 * np.pi * np.outer(k, n) / n_fft)
    dft_im = np.sin(-2 * np.pi * np.outer(k, n) / n_fft)
    total = 0.0
    for t in range(n_frames):
        frame = padded[t * hop:t * hop + n_fft] * window
        re = dft_re @ frame
        im = dft_im @ frame
        total += float((re * re + im * im).sum())
    return total
