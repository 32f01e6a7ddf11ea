"""Dense-tensor operations with analytically derived backward passes.

All convolutions use the cross-correlation convention (no kernel flip) so the
compiled kernels, the naive test oracles, and the gradients agree on one
layout.  Every op is a small stateful object: ``forward`` retains whatever the
backward pass needs, ``backward`` returns a :class:`GradBundle`.  Module-level
functions offer the stateless one-shot form.

Verification paths (gradient checks, oracles) run in float64; training may run
in float32 via :func:`set_default_dtype`.
"""

from dataclasses import dataclass, field

import numpy as np

from . import kernels

Tensor = np.ndarray

_DEFAULT_DTYPE = np.float64


def set_default_dtype(dtype):
    """Set the dtype used when initializing parameters ("single"/"double" ok)."""
    global _DEFAULT_DTYPE
    if dtype in ("single", "float32", np.float32):
        _DEFAULT_DTYPE = np.float32
    elif dtype in ("double", "float64", np.float64):
        _DEFAULT_DTYPE = np.float64
    else:
        raise ValueError(f"unsupported dtype {dtype!r}")


def default_dtype():
    return _DEFAULT_DTYPE


class ShapeError(ValueError):
    """Dimension mismatch carrying the offending shapes."""

    def __init__(self, what, expected, actual):
        self.what = what
        self.expected = expected
        self.actual = actual
        super().__init__(f"{what}: expected {expected}, got {actual}")


class StateError(RuntimeError):
    """Backward requested before the matching forward."""


def check_finite(x, what="tensor"):
    if not np.isfinite(x).all():
        raise FloatingPointError(f"non-finite values in {what}")
    return x


@dataclass(frozen=True)
class ConvSpec:
    """Kernel/bias plus stride/padding for the 1-D and 2-D convolutions.

    Kernel layout is (out_ch, in_ch, kH, kW) for 2-D and (out_ch, in_ch, k)
    for 1-D.  Transposed convolution shares the layout and reads it
    adjoint-wise: dim 0 is its input channel count, dim 1 its output.
    """

    kernel: Tensor
    bias: Tensor
    stride: int = 1
    padding: int = 0
    dilation: int = 1

    def __post_init__(self):
        if self.dilation != 1:
            raise ValueError(f"dilation must be 1, got {self.dilation}")
        if self.stride < 1:
            raise ValueError(f"stride must be >= 1, got {self.stride}")
        if self.padding < 0:
            raise ValueError(f"padding must be >= 0, got {self.padding}")
        if self.kernel.ndim not in (3, 4):
            raise ShapeError("kernel ndim", "3 (1-D) or 4 (2-D)", self.kernel.ndim)
        if self.bias.ndim != 1:
            raise ShapeError("bias ndim", 1, self.bias.ndim)

    @property
    def is_1d(self):
        return self.kernel.ndim == 3


@dataclass
class GradBundle:
    """Gradients keyed by operation input name and by parameter name."""

    inputs: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)


def conv_out_len(n, k, stride, pad):
    if n + 2 * pad < k:
        raise ShapeError("padded length vs kernel", f">= {k}", n + 2 * pad)
    return (n + 2 * pad - k) // stride + 1


def deconv_out_sizes(n_in, k, stride, pad):
    """All output lengths whose conv with (k, stride, pad) yields ``n_in``."""
    base = (n_in - 1) * stride + k - 2 * pad
    return [n for n in range(base, base + stride) if n >= 1]


class Conv2d:
    """2-D cross-correlation over a (C_in, H, W) map."""

    def __init__(self, spec):
        if spec.is_1d:
            raise ShapeError("conv2d kernel ndim", 4, spec.kernel.ndim)
        if spec.bias.shape[0] != spec.kernel.shape[0]:
            raise ShapeError("bias length", spec.kernel.shape[0], spec.bias.shape[0])
        self.spec = spec
        self._ctx = None

    def forward(self, x):
        k = self.spec.kernel
        if x.ndim != 3:
            raise ShapeError("conv2d input ndim", 3, x.ndim)
        if x.shape[0] != k.shape[1]:
            raise ShapeError("conv2d input channels", k.shape[1], x.shape[0])
        co, ci, kh, kw = k.shape
        s, p = self.spec.stride, self.spec.padding
        ho = conv_out_len(x.shape[1], kh, s, p)
        wo = conv_out_len(x.shape[2], kw, s, p)
        cols = kernels.im2col2d(x, kh, kw, s, p, p)
        y = k.reshape(co, ci * kh * kw) @ cols + self.spec.bias[:, None]
        self._ctx = (x.shape, cols)
        return check_finite(y.reshape(co, ho, wo), "conv2d output")

    def backward(self, gy):
        if self._ctx is None:
            raise StateError("conv2d backward before forward")
        x_shape, cols = self._ctx
        k = self.spec.kernel
        co, ci, kh, kw = k.shape
        s, p = self.spec.stride, self.spec.padding
        g = gy.reshape(co, -1)
        gk = (g @ cols.T).reshape(k.shape)
        gb = g.sum(axis=1)
        gcols = k.reshape(co, ci * kh * kw).T @ g
        gx = kernels.col2im2d(gcols, x_shape, kh, kw, s, p, p)
        return GradBundle(inputs={"x": gx}, params={"kernel": gk, "bias": gb})


class TransposedConv2d:
    """Adjoint of :class:`Conv2d` with the same kernel layout.

    The caller supplies ``out_size`` recorded from the mirrored conv, because
    several output sizes are consistent with one (stride, padding) pair.
    Bias has one entry per output channel, i.e. ``kernel.shape[1]``.
    """

    def __init__(self, spec):
        if spec.is_1d:
            raise ShapeError("transposed_conv2d kernel ndim", 4, spec.kernel.ndim)
        if spec.bias.shape[0] != spec.kernel.shape[1]:
            raise ShapeError("bias length", spec.kernel.shape[1], spec.bias.shape[0])
        self.spec = spec
        self._ctx = None

    def forward(self, x, out_size):
        k = self.spec.kernel
        if x.ndim != 3:
            raise ShapeError("transposed_conv2d input ndim", 3, x.ndim)
        if x.shape[0] != k.shape[0]:
            raise ShapeError("transposed_conv2d input channels", k.shape[0], x.shape[0])
        c0, c1, kh, kw = k.shape
        s, p = self.spec.stride, self.spec.padding
        ho, wo = out_size
        if conv_out_len(ho, kh, s, p) != x.shape[1] or conv_out_len(wo, kw, s, p) != x.shape[2]:
            raise ShapeError(
                "transposed_conv2d out_size",
                f"a size mapping to {x.shape[1:]} under k={kh},s={s},p={p}",
                tuple(out_size),
            )
        g = x.reshape(c0, -1)
        cols = k.reshape(c0, c1 * kh * kw).T @ g
        y = kernels.col2im2d(cols, (c1, ho, wo), kh, kw, s, p, p)
        y += self.spec.bias[:, None, None]
        self._ctx = (x, out_size)
        return check_finite(y, "transposed_conv2d output")

    def backward(self, gy):
        if self._ctx is None:
            raise StateError("transposed_conv2d backward before forward")
        x, _ = self._ctx
        k = self.spec.kernel
        c0, c1, kh, kw = k.shape
        s, p = self.spec.stride, self.spec.padding
        gcols = kernels.im2col2d(gy, kh, kw, s, p, p)
        gx = (k.reshape(c0, c1 * kh * kw) @ gcols).reshape(x.shape)
        gk = (x.reshape(c0, -1) @ gcols.T).reshape(k.shape)
        gb = gy.sum(axis=(1, 2))
        return GradBundle(inputs={"x": gx}, params={"kernel": gk, "bias": gb})


class Conv1d:
    """1-D cross-correlation over a (C_in, L) sequence."""

    def __init__(self, spec):
        if not spec.is_1d:
            raise ShapeError("conv1d kernel ndim", 3, spec.kernel.ndim)
        if spec.bias.shape[0] != spec.kernel.shape[0]:
            raise ShapeError("bias length", spec.kernel.shape[0], spec.bias.shape[0])
        self.spec = spec
        self._conv2d = Conv2d(ConvSpec(
            kernel=spec.kernel[:, :, None, :],
            bias=spec.bias,
            stride=spec.stride,
            padding=0,
        ))
        self._pad = spec.padding

    def forward(self, x):
        if x.ndim != 2:
            raise ShapeError("conv1d input ndim", 2, x.ndim)
        xp = np.pad(x, ((0, 0), (self._pad, self._pad))) if self._pad else x
        y = self._conv2d.forward(xp[:, None, :])
        return y[:, 0, :]

    def backward(self, gy):
        bundle = self._conv2d.backward(gy[:, None, :])
        gx = bundle.inputs["x"][:, 0, :]
        if self._pad:
            gx = gx[:, self._pad:gx.shape[1] - self._pad]
        bundle.inputs["x"] = np.ascontiguousarray(gx)
        bundle.params["kernel"] = bundle.params["kernel"][:, :, 0, :]
        return bundle


class Dense:
    """Affine map along the trailing dimension: y = x @ W.T + b."""

    def __init__(self, w, b):
        if w.ndim != 2:
            raise ShapeError("dense weight ndim", 2, w.ndim)
        if b.shape != (w.shape[0],):
            raise ShapeError("dense bias shape", (w.shape[0],), b.shape)
        self.w = w
        self.b = b
        self._ctx = None

    def forward(self, x):
        if x.shape[-1] != self.w.shape[1]:
            raise ShapeError("dense input dim", self.w.shape[1], x.shape[-1])
        self._ctx = x
        y = x @ self.w.T + self.b
        return check_finite(y, "dense output")

    def backward(self, gy):
        if self._ctx is None:
            raise StateError("dense backward before forward")
        x = self._ctx
        gx = gy @ self.w
        g2 = gy.reshape(-1, self.w.shape[0])
        x2 = x.reshape(-1, self.w.shape[1])
        gw = g2.T @ x2
        gb = g2.sum(axis=0)
        return GradBundle(inputs={"x": gx}, params={"w": gw, "b": gb})


ACTIVATION_KINDS = ("relu", "leaky_relu", "sigmoid")


class Activation:
    """Elementwise relu / leaky_relu(alpha) / sigmoid."""

    def __init__(self, kind, alpha=0.2):
        if kind not in ACTIVATION_KINDS:
            raise ValueError(f"unknown activation {kind!r}")
        self.kind = kind
        self.alpha = alpha
        self._ctx = None

    def forward(self, x):
        if self.kind == "relu":
            y = np.maximum(x, 0)
            self._ctx = x
        elif self.kind == "leaky_relu":
            y = np.where(x > 0, x, self.alpha * x)
            self._ctx = x
        else:
            # sigmoid, computed without overflow for large |x|; clamped to the
            # open interval so saturated values never round to exactly 0 or 1
            y = np.empty_like(x)
            pos = x >= 0
            y[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
            ex = np.exp(x[~pos])
            y[~pos] = ex / (1.0 + ex)
            fi = np.finfo(y.dtype)
            np.clip(y, fi.tiny, 1.0 - fi.epsneg, out=y)
            self._ctx = y
        return check_finite(y, f"{self.kind} output")

    def backward(self, gy):
        if self._ctx is None:
            raise StateError("activation backward before forward")
        if self.kind == "relu":
            return GradBundle(inputs={"x": gy * (self._ctx > 0)})
        if self.kind == "leaky_relu":
            return GradBundle(inputs={"x": gy * np.where(self._ctx > 0, 1.0, self.alpha)})
        s = self._ctx
        return GradBundle(inputs={"x": gy * s * (1.0 - s)})


class AxisMean:
    """Per-channel mean over width (-> C,H) or height (-> C,W)."""

    def __init__(self, axis):
        if axis not in ("width", "height"):
            raise ValueError(f"axis must be 'width' or 'height', got {axis!r}")
        self.axis = axis
        self._ctx = None

    def forward(self, x):
        if x.ndim != 3:
            raise ShapeError("axis_mean input ndim", 3, x.ndim)
        self._ctx = x.shape
        if self.axis == "width":
            y = x.mean(axis=2)
        else:
            y = x.mean(axis=1)
        return check_finite(y, "axis_mean output")

    def backward(self, gy):
        if self._ctx is None:
            raise StateError("axis_mean backward before forward")
        c, h, w = self._ctx
        if self.axis == "width":
            gx = np.broadcast_to(gy[:, :, None] / w, (c, h, w)).copy()
        else:
            gx = np.broadcast_to(gy[:, None, :] / h, (c, h, w)).copy()
        return GradBundle(inputs={"x": gx})


def conv2d(x, spec):
    return Conv2d(spec).forward(x)


def transposed_conv2d(x, spec, out_size):
    return TransposedConv2d(spec).forward(x, out_size)


def conv1d(x, spec):
    return Conv1d(spec).forward(x)


def dense(x, w, b):
    return Dense(w, b).forward(x)


def activation(x, kind, alpha=0.2):
    return Activation(kind, alpha).forward(x)


def axis_mean(x, axis):
    return AxisMean(axis).forward(x)


def finite_diff_check(f, x, analytic_grad, eps=1e-5):
    """Max relative error of ``analytic_grad`` against central differences.

    ``f`` must be a pure scalar function of ``x``.  Per coordinate the error
    is |analytic - numeric| / max(1e-8, |numeric|); the max over coordinates
    is returned.  Run in float64: central differences are unreliable in
    single precision.
    """
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    x = np.asarray(x, dtype=np.float64)
    if analytic_grad.shape != x.shape:
        raise ShapeError("analytic gradient shape", x.shape, analytic_grad.shape)
    flat = x.ravel()
    numeric = np.empty_like(flat)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        fp = f(x)
        flat[i] = orig - eps
        fm = f(x)
        flat[i] = orig
        numeric[i] = (fp - fm) / (2.0 * eps)
    numeric = numeric.reshape(x.shape)
    denom = np.maximum(1e-8, np.abs(numeric))
    return float(np.max(np.abs(analytic_grad - numeric) / denom))
