"""Differentiable primitives every network in the package is assembled from.

Image tensors are channels-first, N x C x H x W. Convolution weights are laid out
Cout x Cin x k x k; transposed convolution weights Cin x Cout x k x k, which makes
`deconv2d(y, w)` the exact adjoint of `conv2d(x, w)` with respect to x.
"""
import logging

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from mman.src.tensor import Function, Tensor, as_tensor

logger = logging.getLogger(__name__)

ACTIVATIONS = ("leaky_relu", "sigmoid", "softmax")


def conv_output_extent(extent: int, kernel: int, stride: int, padding: int, dilation: int = 1) -> int:
    """H' = floor((H + 2p - d(k-1) - 1) / s) + 1"""
    effective = dilation * (kernel - 1) + 1
    return (extent + 2 * padding - effective) // stride + 1


def deconv_output_extent(extent: int, kernel: int, stride: int, padding: int) -> int:
    """H' = (H - 1)s - 2p + k"""
    return (extent - 1) * stride - 2 * padding + kernel


def _windows(padded: np.ndarray, kernel: int, stride: int, dilation: int) -> np.ndarray:
    """N x C x Ho x Wo x k x k view of every receptive window of a padded batch"""
    effective = dilation * (kernel - 1) + 1
    view = sliding_window_view(padded, (effective, effective), axis=(2, 3))
    return view[:, :, ::stride, ::stride, ::dilation, ::dilation]


def _scatter_windows(
        cols: np.ndarray,
        padded_shape: tuple[int, int, int, int],
        stride: int,
        dilation: int,
) -> np.ndarray:
    """adjoint of `_windows`: adds N x C x Ho x Wo x k x k columns back onto the padded grid"""
    n, c, ho, wo, kernel, _ = cols.shape
    out = np.zeros(padded_shape, dtype=cols.dtype)
    for i in range(kernel):
        row = i * dilation
        for j in range(kernel):
            col = j * dilation
            out[:, :, row:row + stride * (ho - 1) + 1:stride, col:col + stride * (wo - 1) + 1:stride] += cols[..., i, j]
    return out


def _pad(x: np.ndarray, padding: int) -> np.ndarray:
    if padding == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))


def _check_conv_args(name: str, x: np.ndarray, weight: np.ndarray, stride: int, padding: int, dilation: int = 1):
    if x.ndim != 4 or weight.ndim != 4:
        raise ValueError(f"{name} expects 4-D input and weight. Got input {x.shape} and weight {weight.shape}.")
    kernel = weight.shape[2]
    if weight.shape[2] != weight.shape[3] or kernel < 1:
        raise ValueError(f"{name} expects a square kernel. Got weight {weight.shape}.")
    if stride < 1 or padding < 0 or dilation < 1:
        raise ValueError(f"{name} needs stride >= 1, padding >= 0 and dilation >= 1. Got {stride}, {padding}, {dilation}.")


class Conv2d(Function):
    def forward(self, x, weight, bias=None, *, stride=1, padding=0, dilation=1):
        _check_conv_args("conv2d", x, weight, stride, padding, dilation)
        if x.shape[1] != weight.shape[1]:
            raise ValueError(
                f"conv2d channel mismatch: input {x.shape} has {x.shape[1]} channels "
                f"but weight {weight.shape} expects {weight.shape[1]}."
            )
        kernel = weight.shape[2]
        effective = dilation * (kernel - 1) + 1
        if x.shape[2] + 2 * padding < effective or x.shape[3] + 2 * padding < effective:
            raise ValueError(f"conv2d padded input {x.shape} is smaller than the {effective}x{effective} kernel.")

        padded = _pad(x, padding)
        windows = _windows(padded, kernel, stride, dilation)
        out = np.tensordot(windows, weight, axes=([1, 4, 5], [1, 2, 3])).transpose(0, 3, 1, 2)
        if bias is not None:
            out = out + bias[None, :, None, None]

        self.saved.update(
            windows=windows, weight=weight, padded_shape=padded.shape, x_shape=x.shape,
            stride=stride, padding=padding, dilation=dilation, has_bias=bias is not None,
        )
        return np.ascontiguousarray(out)

    def backward(self, grad):
        s = self.saved
        windows, weight = s["windows"], s["weight"]
        grad_weight = np.tensordot(grad, windows, axes=([0, 2, 3], [0, 2, 3]))

        cols = np.tensordot(grad, weight, axes=([1], [0])).transpose(0, 3, 1, 2, 4, 5)
        grad_padded = _scatter_windows(cols, s["padded_shape"], s["stride"], s["dilation"])
        p = s["padding"]
        h, w = s["x_shape"][2], s["x_shape"][3]
        grad_x = grad_padded[:, :, p:p + h, p:p + w]

        if s["has_bias"]:
            return grad_x, grad_weight, grad.sum(axis=(0, 2, 3))
        return grad_x, grad_weight


class Deconv2d(Function):
    def forward(self, x, weight, bias=None, *, stride=1, padding=0):
        _check_conv_args("deconv2d", x, weight, stride, padding)
        if x.shape[1] != weight.shape[0]:
            raise ValueError(
                f"deconv2d channel mismatch: input {x.shape} has {x.shape[1]} channels "
                f"but weight {weight.shape} expects {weight.shape[0]}."
            )
        n, _, h, w = x.shape
        kernel = weight.shape[2]
        out_h = deconv_output_extent(h, kernel, stride, padding)
        out_w = deconv_output_extent(w, kernel, stride, padding)
        if out_h < 1 or out_w < 1:
            raise ValueError(f"deconv2d output extent {out_h}x{out_w} is empty for input {x.shape}.")

        cols = np.tensordot(x, weight, axes=([1], [0])).transpose(0, 3, 1, 2, 4, 5)
        padded_shape = (n, weight.shape[1], (h - 1) * stride + kernel, (w - 1) * stride + kernel)
        out = _scatter_windows(cols, padded_shape, stride, 1)[:, :, padding:padding + out_h, padding:padding + out_w]
        if bias is not None:
            out = out + bias[None, :, None, None]

        self.saved.update(x=x, weight=weight, stride=stride, padding=padding, has_bias=bias is not None)
        return np.ascontiguousarray(out)

    def backward(self, grad):
        s = self.saved
        x, weight, stride, padding = s["x"], s["weight"], s["stride"], s["padding"]
        kernel = weight.shape[2]

        # the padded output grid was cropped by `padding` on every side; undo that first
        full_h = (x.shape[2] - 1) * stride + kernel
        full_w = (x.shape[3] - 1) * stride + kernel
        grad_full = np.zeros(grad.shape[:2] + (full_h, full_w), dtype=grad.dtype)
        grad_full[:, :, padding:padding + grad.shape[2], padding:padding + grad.shape[3]] = grad

        windows = _windows(grad_full, kernel, stride, 1)
        grad_x = np.tensordot(windows, weight, axes=([1, 4, 5], [1, 2, 3])).transpose(0, 3, 1, 2)
        grad_weight = np.tensordot(x, windows, axes=([0, 2, 3], [0, 2, 3]))

        if s["has_bias"]:
            return np.ascontiguousarray(grad_x), grad_weight, grad.sum(axis=(0, 2, 3))
        return np.ascontiguousarray(grad_x), grad_weight


class InstanceNorm(Function):
    def forward(self, x, gamma, beta, *, epsilon=1e-5):
        if x.ndim != 4 or gamma.shape != (x.shape[1],) or beta.shape != (x.shape[1],):
            raise ValueError(
                f"instance_norm expects N x C x H x W input with C-long gamma/beta. "
                f"Got input {x.shape}, gamma {gamma.shape}, beta {beta.shape}."
            )
        mean = x.mean(axis=(2, 3), keepdims=True)
        var = x.var(axis=(2, 3), keepdims=True)
        inv_std = 1.0 / np.sqrt(var + epsilon)
        x_hat = (x - mean) * inv_std
        self.saved.update(x_hat=x_hat, inv_std=inv_std, gamma=gamma)
        return x_hat * gamma[None, :, None, None] + beta[None, :, None, None]

    def backward(self, grad):
        x_hat, inv_std, gamma = self.saved["x_hat"], self.saved["inv_std"], self.saved["gamma"]
        grad_gamma = (grad * x_hat).sum(axis=(0, 2, 3))
        grad_beta = grad.sum(axis=(0, 2, 3))

        grad_hat = grad * gamma[None, :, None, None]
        grad_x = inv_std * (
                grad_hat
                - grad_hat.mean(axis=(2, 3), keepdims=True)
                - x_hat * (grad_hat * x_hat).mean(axis=(2, 3), keepdims=True)
        )
        return grad_x, grad_gamma, grad_beta


class LeakyRelu(Function):
    def forward(self, x, *, slope=0.2):
        positive = x > 0
        self.saved.update(positive=positive, slope=slope)
        return np.where(positive, x, slope * x)

    def backward(self, grad):
        return (np.where(self.saved["positive"], grad, self.saved["slope"] * grad),)


class Sigmoid(Function):
    def forward(self, x):
        out = 0.5 * (1.0 + np.tanh(0.5 * x))
        self.saved["out"] = out
        return out

    def backward(self, grad):
        out = self.saved["out"]
        return (grad * out * (1.0 - out),)


class ChannelSoftmax(Function):
    def forward(self, x):
        shifted = np.exp(x - x.max(axis=1, keepdims=True))
        out = shifted / shifted.sum(axis=1, keepdims=True)
        self.saved["out"] = out
        return out

    def backward(self, grad):
        out = self.saved["out"]
        return (out * (grad - (grad * out).sum(axis=1, keepdims=True)),)


class ConcatChannels(Function):
    def forward(self, a, b):
        if a.ndim != 4 or b.ndim != 4 or (a.shape[0], *a.shape[2:]) != (b.shape[0], *b.shape[2:]):
            raise ValueError(f"concat_channels needs matching N, H, W. Got {a.shape} and {b.shape}.")
        self.saved["split"] = a.shape[1]
        return np.concatenate((a, b), axis=1)

    def backward(self, grad):
        split = self.saved["split"]
        return grad[:, :split], grad[:, split:]


class ResizeBilinear(Function):
    """separable bilinear resampling written as two interpolation matrices"""

    def forward(self, x, *, size):
        rows = interpolation_matrix(x.shape[-2], size[0], x.dtype)
        cols = interpolation_matrix(x.shape[-1], size[1], x.dtype)
        self.saved.update(rows=rows, cols=cols)
        return np.matmul(np.matmul(rows, x), cols.T)

    def backward(self, grad):
        rows, cols = self.saved["rows"], self.saved["cols"]
        return (np.matmul(np.matmul(rows.T, grad), cols),)


class Mask(Function):
    def forward(self, x, *, mask):
        self.saved["mask"] = mask
        return x * mask

    def backward(self, grad):
        return (grad * self.saved["mask"],)


def interpolation_matrix(in_extent: int, out_extent: int, dtype=np.float64) -> np.ndarray:
    """out_extent x in_extent bilinear weights, half-pixel centers, edges clamped"""
    if out_extent < 1 or in_extent < 1:
        raise ValueError(f"Cannot resize an extent of {in_extent} to {out_extent}.")
    scale = in_extent / out_extent
    source = (np.arange(out_extent, dtype=np.float64) + 0.5) * scale - 0.5
    source = np.clip(source, 0.0, in_extent - 1)
    low = np.floor(source).astype(int)
    high = np.minimum(low + 1, in_extent - 1)
    frac = source - low

    matrix = np.zeros((out_extent, in_extent), dtype=np.float64)
    np.add.at(matrix, (np.arange(out_extent), low), 1.0 - frac)
    np.add.at(matrix, (np.arange(out_extent), high), frac)
    return matrix.astype(dtype)


def scaled_extent(extent: int, scale: float) -> int:
    """round(extent * scale), halves rounded up"""
    return int(np.floor(extent * scale + 0.5))


# ==== public functional api ====
def conv2d(
        x: Tensor,
        weight: Tensor,
        bias: Tensor | None = None,
        stride: int = 1,
        padding: int = 0,
        dilation: int = 1,
) -> Tensor:
    inputs = (x, weight) if bias is None else (x, weight, bias)
    return Conv2d.apply(*inputs, stride=stride, padding=padding, dilation=dilation)


def deconv2d(
        x: Tensor,
        weight: Tensor,
        bias: Tensor | None = None,
        stride: int = 1,
        padding: int = 0,
) -> Tensor:
    inputs = (x, weight) if bias is None else (x, weight, bias)
    return Deconv2d.apply(*inputs, stride=stride, padding=padding)


def instance_norm(x: Tensor, gamma: Tensor, beta: Tensor, epsilon: float = 1e-5) -> Tensor:
    if x.ndim == 4 and x.shape[2] * x.shape[3] < 1:
        raise ValueError(f"instance_norm needs at least one pixel per plane. Got {x.shape}.")
    return InstanceNorm.apply(x, gamma, beta, epsilon=epsilon)


def leaky_relu(x: Tensor, slope: float = 0.2) -> Tensor:
    return LeakyRelu.apply(x, slope=slope)


def sigmoid(x: Tensor) -> Tensor:
    return Sigmoid.apply(x)


def softmax_over_channels(x: Tensor) -> Tensor:
    if x.ndim < 2:
        raise ValueError(f"softmax_over_channels needs a channel axis. Got shape {x.shape}.")
    return ChannelSoftmax.apply(x)


def activation(x: Tensor, kind: str, slope: float = 0.2) -> Tensor:
    """dispatches on {leaky_relu, sigmoid, softmax}"""
    if kind == "leaky_relu":
        return leaky_relu(x, slope)
    if kind == "sigmoid":
        return sigmoid(x)
    if kind == "softmax":
        return softmax_over_channels(x)
    raise KeyError(f"Unknown activation `{kind}`. Expected one of {ACTIVATIONS}.")


def concat_channels(a: Tensor, b: Tensor) -> Tensor:
    return ConcatChannels.apply(a, b)


def resize_bilinear(
        x: Tensor,
        scale: float | None = None,
        size: tuple[int, int] | None = None,
) -> Tensor:
    """resizes the two trailing axes; give either `scale` or a target `size`"""
    if (scale is None) == (size is None):
        raise ValueError("resize_bilinear needs exactly one of `scale` or `size`.")
    if size is None:
        if scale <= 0:
            raise ValueError(f"resize scale must be positive. Got {scale}.")
        size = (scaled_extent(x.shape[-2], scale), scaled_extent(x.shape[-1], scale))
    if size[0] < 1 or size[1] < 1:
        raise ValueError(f"resize target {size} has an empty extent.")
    if tuple(size) == tuple(x.shape[-2:]):
        return x
    return ResizeBilinear.apply(x, size=tuple(size))


def dropout(x: Tensor, rate: float, training: bool, rng: np.random.Generator | None = None) -> Tensor:
    """inverted dropout; identity in inference mode or at rate 0"""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must lie in [0, 1). Got {rate}.")
    if not training or rate == 0.0:
        return x
    if rng is None:
        raise ValueError("dropout in training mode needs an rng stream.")
    keep = rng.random(x.shape) >= rate
    mask = keep.astype(x.dtype) / x.dtype.type(1.0 - rate)
    return Mask.apply(x, mask=mask)


def scalar(value: float, like: Tensor) -> Tensor:
    return as_tensor(np.asarray(value, dtype=like.dtype))
