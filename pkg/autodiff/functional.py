"""
Differentiable operations over `Tensor`.

Each operation is a `Function` subclass plus a thin wrapper that validates
shapes and calls `apply`. Gradients of broadcast operands are summed back to
the operand's shape.
"""
import logging
from typing import Any, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from autodiff.resampling import interpolation_matrix
from autodiff.tensor import Function, Tensor
from utils.errors import ShapeError

logger = logging.getLogger(__name__)

Operand = Union[Tensor, float, int]
Axis = Union[None, int, Tuple[int, ...]]


def _as_tensor(value: Operand, like: Tensor) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(np.asarray(value, dtype=like.data.dtype), _raw=True)


def _check_broadcast(op: str, a: Tensor, b: Tensor) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} are not broadcast-compatible") from None


# ---------------------------------------------------------------- elementwise


class Add(Function):
    def forward(self, x, y):
        self.saved["shapes"] = (x.shape, y.shape)
        return x + y

    def backward(self, grad):
        xs, ys = self.saved["shapes"]
        return Function.unbroadcast(grad, xs), Function.unbroadcast(grad, ys)


class Sub(Function):
    def forward(self, x, y):
        self.saved["shapes"] = (x.shape, y.shape)
        return x - y

    def backward(self, grad):
        xs, ys = self.saved["shapes"]
        return Function.unbroadcast(grad, xs), Function.unbroadcast(-grad, ys)


class Mul(Function):
    def forward(self, x, y):
        self.saved.update(x=x, y=y)
        return x * y

    def backward(self, grad):
        x, y = self.saved["x"], self.saved["y"]
        return Function.unbroadcast(grad * y, x.shape), Function.unbroadcast(grad * x, y.shape)


class Div(Function):
    def forward(self, x, y):
        self.saved.update(x=x, y=y)
        return x / y

    def backward(self, grad):
        x, y = self.saved["x"], self.saved["y"]
        return (
            Function.unbroadcast(grad / y, x.shape),
            Function.unbroadcast(-grad * x / (y * y), y.shape),
        )


class Scale(Function):
    def forward(self, x, factor: float = 1.0):
        self.saved["factor"] = factor
        return x * factor

    def backward(self, grad):
        return (grad * self.saved["factor"],)


class Power(Function):
    def forward(self, x, exponent: float = 1.0):
        self.saved.update(x=x, exponent=exponent)
        return np.power(x, exponent)

    def backward(self, grad):
        x, p = self.saved["x"], self.saved["exponent"]
        return (grad * p * np.power(x, p - 1.0),)


class Abs(Function):
    def forward(self, x):
        self.saved["sign"] = np.sign(x)
        return np.abs(x)

    def backward(self, grad):
        return (grad * self.saved["sign"],)


class Sigmoid(Function):
    def forward(self, x):
        out = expit(x)
        self.saved["out"] = out
        return out

    def backward(self, grad):
        s = self.saved["out"]
        return (grad * s * (1.0 - s),)


class Relu(Function):
    def forward(self, x):
        self.saved["mask"] = x > 0
        return np.where(self.saved["mask"], x, 0.0)

    def backward(self, grad):
        return (grad * self.saved["mask"],)


class LeakyRelu(Function):
    def forward(self, x, slope: float = 0.2):
        self.saved["slope"] = np.where(x > 0, 1.0, slope)
        return x * self.saved["slope"]

    def backward(self, grad):
        return (grad * self.saved["slope"],)


class Clamp(Function):
    """Hard clamp forward; straight-through gradient inside the interval."""

    def forward(self, x, low: float = 0.0, high: float = 1.0):
        self.saved["inside"] = (x >= low) & (x <= high)
        return np.clip(x, low, high)

    def backward(self, grad):
        return (grad * self.saved["inside"],)


def add(a: Tensor, b: Operand) -> Tensor:
    b = _as_tensor(b, a)
    _check_broadcast("add", a, b)
    return Add.apply(a, b)


def sub(a: Tensor, b: Operand) -> Tensor:
    b = _as_tensor(b, a)
    _check_broadcast("sub", a, b)
    return Sub.apply(a, b)


def mul(a: Tensor, b: Operand) -> Tensor:
    b = _as_tensor(b, a)
    _check_broadcast("mul", a, b)
    return Mul.apply(a, b)


def div(a: Tensor, b: Operand) -> Tensor:
    b = _as_tensor(b, a)
    _check_broadcast("div", a, b)
    return Div.apply(a, b)


def scale(a: Tensor, factor: float) -> Tensor:
    return Scale.apply(a, factor=float(factor))


def power(a: Tensor, exponent: float) -> Tensor:
    return Power.apply(a, exponent=float(exponent))


def absolute(a: Tensor) -> Tensor:
    return Abs.apply(a)


def sigmoid(a: Tensor) -> Tensor:
    return Sigmoid.apply(a)


def relu(a: Tensor) -> Tensor:
    return Relu.apply(a)


def leaky_relu(a: Tensor, slope: float = 0.2) -> Tensor:
    return LeakyRelu.apply(a, slope=float(slope))


def clamp(a: Tensor, low: float = 0.0, high: float = 1.0) -> Tensor:
    return Clamp.apply(a, low=float(low), high=float(high))


_ELEMENTWISE = {
    "add": add,
    "sub": sub,
    "mul": mul,
    "div": div,
    "scale": scale,
    "pow": power,
}
_UNARY = {
    "abs": absolute,
    "sigmoid": sigmoid,
    "relu": relu,
    "leaky_relu": leaky_relu,
    "clamp": clamp,
}


def elementwise(op_kind: str, a: Tensor, b: Optional[Operand] = None) -> Tensor:
    """Dispatch an elementwise operation by name."""
    if op_kind in _ELEMENTWISE:
        if b is None:
            raise ValueError(f"elementwise {op_kind!r} needs a second operand")
        return _ELEMENTWISE[op_kind](a, b)
    if op_kind in _UNARY:
        return _UNARY[op_kind](a) if b is None else _UNARY[op_kind](a, b)
    raise ValueError(f"unknown elementwise operation {op_kind!r}")


# ---------------------------------------------------------------- dense


class MatMul(Function):
    def forward(self, x, y):
        self.saved.update(x=x, y=y)
        return np.matmul(x, y)

    def backward(self, grad):
        x, y = self.saved["x"], self.saved["y"]
        gx = np.matmul(grad, np.swapaxes(y, -1, -2))
        gy = np.matmul(np.swapaxes(x, -1, -2), grad)
        return Function.unbroadcast(gx, x.shape), Function.unbroadcast(gy, y.shape)


class Transpose(Function):
    def forward(self, x):
        return np.swapaxes(x, -1, -2)

    def backward(self, grad):
        return (np.swapaxes(grad, -1, -2),)


class Sum(Function):
    def forward(self, x, axis: Axis = None, keepdims: bool = False):
        self.saved.update(shape=x.shape, axis=axis, keepdims=keepdims)
        return np.sum(x, axis=axis, keepdims=keepdims)

    def backward(self, grad):
        shape, axis, keepdims = self.saved["shape"], self.saved["axis"], self.saved["keepdims"]
        if axis is not None and not keepdims:
            grad = np.expand_dims(grad, axis)
        return (np.broadcast_to(grad, shape).copy(),)


class Mean(Function):
    def forward(self, x, axis: Axis = None, keepdims: bool = False):
        count = x.size if axis is None else int(np.prod([x.shape[a] for a in np.atleast_1d(axis)]))
        self.saved.update(shape=x.shape, axis=axis, keepdims=keepdims, count=count)
        return np.mean(x, axis=axis, keepdims=keepdims)

    def backward(self, grad):
        shape, axis, keepdims = self.saved["shape"], self.saved["axis"], self.saved["keepdims"]
        if axis is not None and not keepdims:
            grad = np.expand_dims(grad, axis)
        return (np.broadcast_to(grad / self.saved["count"], shape).copy(),)


class Reshape(Function):
    def forward(self, x, shape: Tuple[int, ...] = ()):
        self.saved["shape"] = x.shape
        return x.reshape(shape)

    def backward(self, grad):
        return (grad.reshape(self.saved["shape"]),)


class Concat(Function):
    def forward(self, *arrays, axis: int = 0):
        self.saved.update(sizes=[a.shape[axis] for a in arrays], axis=axis)
        return np.concatenate(arrays, axis=axis)

    def backward(self, grad):
        cuts = np.cumsum(self.saved["sizes"])[:-1]
        return tuple(np.split(grad, cuts, axis=self.saved["axis"]))


class Index(Function):
    def forward(self, x, index: Any = None):
        self.saved.update(shape=x.shape, index=index)
        return x[index]

    def backward(self, grad):
        out = np.zeros(self.saved["shape"], dtype=grad.dtype)
        np.add.at(out, self.saved["index"], grad)
        return (out,)


class Softmax(Function):
    def forward(self, x, axis: int = -1):
        shifted = x - np.max(x, axis=axis, keepdims=True)
        e = np.exp(shifted)
        out = e / np.sum(e, axis=axis, keepdims=True)
        self.saved.update(out=out, axis=axis)
        return out

    def backward(self, grad):
        s, axis = self.saved["out"], self.saved["axis"]
        return (s * (grad - np.sum(grad * s, axis=axis, keepdims=True)),)


class BatchNorm(Function):
    """
    Normalization over `axes` followed by `gamma * (scale * x_hat) + beta`.

    With `mean`/`var` given the statistics are constants (evaluation mode);
    otherwise batch statistics are used and differentiated through.
    """

    def forward(self, x, gamma, beta, axes=(0, 2, 3), eps=1e-5, scale=1.0, mean=None, var=None):
        bshape = tuple(1 if i in axes else n for i, n in enumerate(x.shape))
        training = mean is None
        if training:
            mu = np.mean(x, axis=axes, keepdims=True)
            var_ = np.var(x, axis=axes, keepdims=True)
        else:
            mu = np.reshape(mean, bshape)
            var_ = np.reshape(var, bshape)
        inv_std = 1.0 / np.sqrt(var_ + eps)
        x_hat = (x - mu) * inv_std
        g = np.reshape(gamma, bshape)
        self.saved.update(x_hat=x_hat, inv_std=inv_std, gamma=g, axes=axes, scale=scale, training=training)
        return g * (scale * x_hat) + np.reshape(beta, bshape)

    def backward(self, grad):
        s = self.saved
        axes, x_hat, inv_std, k = s["axes"], s["x_hat"], s["inv_std"], s["scale"]
        d_xhat = grad * s["gamma"] * k
        if s["training"]:
            count = x_hat.size // inv_std.size
            dx = inv_std / count * (
                count * d_xhat
                - np.sum(d_xhat, axis=axes, keepdims=True)
                - x_hat * np.sum(d_xhat * x_hat, axis=axes, keepdims=True)
            )
        else:
            dx = d_xhat * inv_std
        d_gamma = np.sum(grad * k * x_hat, axis=axes)
        d_beta = np.sum(grad, axis=axes)
        return dx, d_gamma, d_beta


def transpose(a: Tensor) -> Tensor:
    """Swap the last two axes."""
    if a.ndim < 2:
        raise ShapeError(f"transpose needs at least 2 dimensions, got {a.shape}")
    return Transpose.apply(a)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: shapes {a.shape} and {b.shape} are incompatible")
    return MatMul.apply(a, b)


def reduce_sum(a: Tensor, axis: Axis = None, keepdims: bool = False) -> Tensor:
    return Sum.apply(a, axis=axis, keepdims=keepdims)


def reduce_mean(a: Tensor, axis: Axis = None, keepdims: bool = False) -> Tensor:
    return Mean.apply(a, axis=axis, keepdims=keepdims)


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    return Reshape.apply(a, shape=tuple(shape))


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    if not tensors:
        raise ShapeError("concat needs at least one tensor")
    ref = tensors[0].shape
    for t in tensors[1:]:
        if t.ndim != len(ref) or any(x != y for i, (x, y) in enumerate(zip(t.shape, ref)) if i != axis % len(ref)):
            raise ShapeError(f"concat along axis {axis}: shapes {ref} and {t.shape} differ off-axis")
    return Concat.apply(*tensors, axis=axis)


def concat_channels(tensors: Sequence[Tensor]) -> Tensor:
    return concat(tensors, axis=1)


def index(a: Tensor, idx: Any) -> Tensor:
    return Index.apply(a, index=idx)


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    if a.ndim == 0 or a.shape[axis] == 0:
        raise ShapeError(f"softmax over an empty axis {axis} of shape {a.shape}")
    return Softmax.apply(a, axis=axis)


def global_avg_pool(a: Tensor) -> Tensor:
    if a.ndim != 4:
        raise ShapeError(f"global_avg_pool expects NCHW, got {a.shape}")
    return reduce_mean(a, axis=(2, 3))


def batch_norm(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    training: bool = True,
    running_mean: Optional[np.ndarray] = None,
    running_var: Optional[np.ndarray] = None,
    momentum: float = 0.1,
    eps: float = 1e-5,
    scale: float = 1.0,
    track_stats: bool = True,
) -> Tensor:
    """
    Per-channel batch normalization of an (N, C, ...) tensor.

    In training mode the running statistics, when given, are updated in
    place with `momentum` (unbiased variance); in evaluation mode they are
    used instead of the batch statistics.
    """
    axes = tuple(i for i in range(x.ndim) if i != 1)
    if gamma.shape != (x.shape[1],) or beta.shape != (x.shape[1],):
        raise ShapeError(f"batch_norm: affine shapes {gamma.shape}/{beta.shape} do not match channels of {x.shape}")
    if training:
        if running_mean is not None and track_stats:
            count = x.size // x.shape[1]
            mean = np.mean(x.data, axis=axes)
            var = np.var(x.data, axis=axes) * count / max(count - 1, 1)
            running_mean *= 1.0 - momentum
            running_mean += momentum * mean
            running_var *= 1.0 - momentum
            running_var += momentum * var
        return BatchNorm.apply(x, gamma, beta, axes=axes, eps=eps, scale=scale)
    if running_mean is None or running_var is None:
        raise ValueError("batch_norm in evaluation mode needs running statistics")
    return BatchNorm.apply(x, gamma, beta, axes=axes, eps=eps, scale=scale, mean=running_mean, var=running_var)


_DENSE = {
    "matmul": matmul,
    "reduce_mean": reduce_mean,
    "reduce_sum": reduce_sum,
    "softmax": softmax,
    "concat_channels": concat_channels,
    "global_avg_pool": global_avg_pool,
    "batch_norm": batch_norm,
}


def dense_ops(op_kind: str, *args: Any, **kwargs: Any) -> Tensor:
    """Dispatch a reduction / normalization / matrix operation by name."""
    if op_kind not in _DENSE:
        raise ValueError(f"unknown dense operation {op_kind!r}")
    return _DENSE[op_kind](*args, **kwargs)


# ---------------------------------------------------------------- spatial


class Conv2d(Function):
    """Cross-correlation of NCHW input with an OIHW kernel."""

    def forward(self, x, w, b=None, stride: int = 1, padding: int = 0):
        n, c, h, wd = x.shape
        o, _, kh, kw = w.shape
        xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding))) if padding else x
        windows = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
        ho, wo = windows.shape[2], windows.shape[3]
        out = np.tensordot(windows, w, axes=([1, 4, 5], [1, 2, 3])).transpose(0, 3, 1, 2)
        if b is not None:
            out = out + b.reshape(1, o, 1, 1)
        self.saved.update(
            windows=windows, w=w, padded_shape=xp.shape, in_hw=(h, wd), out_hw=(ho, wo),
            stride=stride, padding=padding, has_bias=b is not None,
        )
        return np.ascontiguousarray(out)

    def backward(self, grad):
        s = self.saved
        w, windows, stride, pad = s["w"], s["windows"], s["stride"], s["padding"]
        _, _, kh, kw = w.shape
        ho, wo = s["out_hw"]
        h, wd = s["in_hw"]

        d_w = np.tensordot(grad, windows, axes=([0, 2, 3], [0, 2, 3]))
        d_cols = np.tensordot(grad, w, axes=([1], [0]))
        d_xp = np.zeros(s["padded_shape"], dtype=grad.dtype)
        for i in range(kh):
            for j in range(kw):
                d_xp[:, :, i:i + stride * (ho - 1) + 1:stride, j:j + stride * (wo - 1) + 1:stride] += (
                    d_cols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
                )
        d_x = d_xp[:, :, pad:pad + h, pad:pad + wd] if pad else d_xp
        if s["has_bias"]:
            return d_x, d_w, np.sum(grad, axis=(0, 2, 3))
        return d_x, d_w


class AvgPool2(Function):
    def forward(self, x):
        n, c, h, w = x.shape
        return x.reshape(n, c, h // 2, 2, w // 2, 2).mean(axis=(3, 5))

    def backward(self, grad):
        return (np.repeat(np.repeat(grad, 2, axis=2), 2, axis=3) * 0.25,)


class Resize(Function):
    """Separable linear resize `M_h @ X @ M_w.T` over the last two axes."""

    def forward(self, x, rows: np.ndarray = None, cols: np.ndarray = None):
        rows = rows.astype(x.dtype, copy=False)
        cols = cols.astype(x.dtype, copy=False)
        self.saved.update(rows=rows, cols=cols)
        return np.matmul(np.matmul(rows, x), cols.T)

    def backward(self, grad):
        rows, cols = self.saved["rows"], self.saved["cols"]
        return (np.matmul(np.matmul(rows.T, grad), cols),)


def conv2d(
    input: Tensor,
    kernel: Tensor,
    bias: Optional[Tensor] = None,
    stride: int = 1,
    padding: int = 0,
) -> Tensor:
    """2-D cross-correlation (no kernel flip) with explicit stride and zero padding."""
    if input.ndim != 4 or kernel.ndim != 4:
        raise ShapeError(f"conv2d expects NCHW input and OIHW kernel, got {input.shape} and {kernel.shape}")
    if stride < 1 or padding < 0:
        raise ShapeError(f"conv2d needs stride >= 1 and padding >= 0, got {stride}/{padding}")
    if input.shape[1] != kernel.shape[1]:
        raise ShapeError(f"conv2d channel mismatch: input {input.shape} vs kernel {kernel.shape}")
    h_out = (input.shape[2] + 2 * padding - kernel.shape[2]) // stride + 1
    w_out = (input.shape[3] + 2 * padding - kernel.shape[3]) // stride + 1
    if input.shape[2] + 2 * padding < kernel.shape[2] or input.shape[3] + 2 * padding < kernel.shape[3] \
            or h_out < 1 or w_out < 1:
        raise ShapeError(f"conv2d output extent is not positive for input {input.shape}, kernel {kernel.shape}")
    if bias is not None:
        if bias.shape != (kernel.shape[0],):
            raise ShapeError(f"conv2d bias {bias.shape} does not match {kernel.shape[0]} output channels")
        return Conv2d.apply(input, kernel, bias, stride=stride, padding=padding)
    return Conv2d.apply(input, kernel, stride=stride, padding=padding)


def resize(input: Tensor, rows: np.ndarray, cols: np.ndarray) -> Tensor:
    """Apply fixed row/column resampling matrices to the last two axes."""
    if rows.shape[1] != input.shape[-2] or cols.shape[1] != input.shape[-1]:
        raise ShapeError(f"resize matrices {rows.shape}/{cols.shape} do not fit input {input.shape}")
    return Resize.apply(input, rows=rows, cols=cols)


def resample2(input: Tensor, direction: str) -> Tensor:
    """
    Scale an NCHW tensor by two.

    `down` is 2x2 average pooling; `up` is bilinear interpolation with
    half-pixel alignment.
    """
    if input.ndim != 4:
        raise ShapeError(f"resample2 expects NCHW, got {input.shape}")
    _, _, h, w = input.shape
    if direction == "down":
        if h % 2 or w % 2:
            raise ShapeError(f"resample2 down needs even extents, got {h}x{w}")
        return AvgPool2.apply(input)
    if direction == "up":
        rows = interpolation_matrix(h, 2 * h, "bilinear")
        cols = interpolation_matrix(w, 2 * w, "bilinear")
        return Resize.apply(input, rows=rows, cols=cols)
    raise ValueError(f"resample2 direction must be 'down' or 'up', got {direction!r}")
