"""Layer implementations with exact reverse-mode gradients.

Conventions: batched float64 arrays, channels last.  2-D feature maps are
(batch, height, width, channels); 1-D ones are (batch, length, channels).
Convolution is cross-correlation (no kernel flip), the usual deep-learning
convention.  All forward passes cache what their backward pass needs; a
backward call is only valid right after the matching forward.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ShapeError, ValidationError


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max subtraction for overflow safety."""
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _glorot(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int, fan_out: int):
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)


class Layer:
    """Base layer: parameter store plus forward/backward."""

    kind = "layer"

    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}

    def init(self, rng: np.random.Generator) -> None:
        """Draw initial parameters (no-op for parameter-free layers)."""

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        raise NotImplementedError

    def backward(self, dout: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def output_shape(self, in_shape: tuple[int, ...]) -> tuple[int, ...]:
        raise NotImplementedError

    def config(self) -> dict:
        return {}


# -- convolution core ------------------------------------------------------
#
# Shared by Conv2d and Conv1d (the latter runs with a width-1 second axis).
# Stride-1 convolutions (the only ones the standard architectures use) run
# as one matmul per kernel offset on shifted views of the padded input,
# which avoids the expensive im2col gather; other strides fall back to
# im2col, with the input gradient computed as a full correlation of the
# zero-dilated output gradient with the rotated kernel.


def _im2col(xp: np.ndarray, kh: int, kw: int, sh: int, sw: int) -> np.ndarray:
    view = sliding_window_view(xp, (kh, kw), axis=(1, 2))  # (B, Ho', Wo', C, kh, kw)
    view = view[:, ::sh, ::sw]
    b, ho, wo = view.shape[:3]
    cols = view.transpose(0, 1, 2, 4, 5, 3).reshape(b * ho * wo, -1)
    return np.ascontiguousarray(cols), ho, wo


def _conv_forward(x, w, bias, stride, pad):
    kh, kw = w.shape[:2]
    sh, sw = stride
    ph, pw = pad
    xp = np.pad(x, ((0, 0), (ph, ph), (pw, pw), (0, 0)))
    if sh == 1 and sw == 1:
        b = x.shape[0]
        ho = xp.shape[1] - kh + 1
        wo = xp.shape[2] - kw + 1
        out = np.empty((b, ho, wo, w.shape[-1]))
        out[...] = bias
        for u in range(kh):
            for v in range(kw):
                out += xp[:, u : u + ho, v : v + wo, :] @ w[u, v]
        return out, ("shift", xp)
    cols, ho, wo = _im2col(xp, kh, kw, sh, sw)
    out = cols @ w.reshape(-1, w.shape[-1]) + bias
    return out.reshape(x.shape[0], ho, wo, -1), ("cols", x.shape, cols)


def _conv_backward(dout, cache, w, stride, pad):
    kh, kw, c, r = w.shape
    ph, pw = pad
    dflat = dout.reshape(-1, r)
    db = dflat.sum(axis=0)

    if cache[0] == "shift":
        xp = cache[1]
        b, ho, wo, _ = dout.shape
        h, wd = xp.shape[1] - 2 * ph, xp.shape[2] - 2 * pw
        dw = np.empty_like(w)
        dxp = np.zeros_like(xp)
        for u in range(kh):
            for v in range(kw):
                xs = np.ascontiguousarray(xp[:, u : u + ho, v : v + wo, :]).reshape(-1, c)
                dw[u, v] = xs.T @ dflat
                dxp[:, u : u + ho, v : v + wo, :] += (dflat @ w[u, v].T).reshape(b, ho, wo, c)
        return dxp[:, ph : ph + h, pw : pw + wd], dw, db

    _, x_shape, cols = cache
    b, h, wd, _ = x_shape
    sh, sw = stride
    dw = (cols.T @ dflat).reshape(w.shape)
    if sh == 1 and sw == 1:
        d = dout
    else:
        _, ho, wo, _ = dout.shape
        d = np.zeros((b, (ho - 1) * sh + 1, (wo - 1) * sw + 1, r))
        d[:, ::sh, ::sw] = dout
    dp = np.pad(d, ((0, 0), (kh - 1, kh - 1), (kw - 1, kw - 1), (0, 0)))
    krot = w[::-1, ::-1].transpose(0, 1, 3, 2)  # (kh, kw, R, C)
    dcols, gh, gw = _im2col(dp, kh, kw, 1, 1)
    part = (dcols @ krot.reshape(-1, c)).reshape(b, gh, gw, c)
    hp, wp = h + 2 * ph, wd + 2 * pw
    dxp = np.zeros((b, hp, wp, c))
    dxp[:, :gh, :gw] = part
    return dxp[:, ph : ph + h, pw : pw + wd], dw, db


class Conv2d(Layer):
    """2-D convolution over (B, H, W, C) maps, optional shape-preserving zero padding."""

    kind = "conv2d"

    def __init__(self, in_channels: int, filters: int, kernel: int = 3, stride: int = 1,
                 same_padding: bool = True):
        super().__init__()
        if filters < 1:
            raise ValidationError(f"need at least one filter, got {filters}")
        if same_padding and kernel % 2 == 0:
            raise ValidationError("shape-preserving padding needs an odd kernel size")
        self.in_channels = in_channels
        self.filters = filters
        self.kernel = kernel
        self.stride = stride
        self.same_padding = same_padding
        self.pad = (kernel - 1) // 2 if same_padding else 0
        self.params = {
            "w": np.zeros((kernel, kernel, in_channels, filters)),
            "b": np.zeros(filters),
        }

    def init(self, rng):
        k, c, r = self.kernel, self.in_channels, self.filters
        self.params["w"] = _glorot(rng, (k, k, c, r), k * k * c, k * k * r)
        self.params["b"] = np.zeros(r)

    def output_shape(self, in_shape):
        if len(in_shape) != 3 or in_shape[2] != self.in_channels:
            raise ShapeError(
                f"conv2d expects (H, W, {self.in_channels}), got {in_shape}"
            )
        h = (in_shape[0] + 2 * self.pad - self.kernel) // self.stride + 1
        w = (in_shape[1] + 2 * self.pad - self.kernel) // self.stride + 1
        if h < 1 or w < 1:
            raise ShapeError(f"conv2d output collapses on input {in_shape}")
        return (h, w, self.filters)

    def forward(self, x, train=False):
        if x.ndim != 4 or x.shape[3] != self.in_channels:
            raise ShapeError(
                f"conv2d expects (B, H, W, {self.in_channels}), got {x.shape}"
            )
        out, cache = _conv_forward(
            x, self.params["w"], self.params["b"], (self.stride,) * 2, (self.pad,) * 2
        )
        self._cache = cache
        return out

    def backward(self, dout):
        dx, dw, db = _conv_backward(
            dout, self._cache, self.params["w"], (self.stride,) * 2, (self.pad,) * 2
        )
        self.grads = {"w": dw, "b": db}
        return dx

    def config(self):
        return {
            "in_channels": self.in_channels,
            "filters": self.filters,
            "kernel": self.kernel,
            "stride": self.stride,
            "same_padding": self.same_padding,
        }


class Conv1d(Layer):
    """1-D convolution over (B, L, C) sequences; runs on the 2-D core."""

    kind = "conv1d"

    def __init__(self, in_channels: int, filters: int, kernel: int = 3, stride: int = 1,
                 same_padding: bool = True):
        super().__init__()
        if filters < 1:
            raise ValidationError(f"need at least one filter, got {filters}")
        if same_padding and kernel % 2 == 0:
            raise ValidationError("shape-preserving padding needs an odd kernel size")
        self.in_channels = in_channels
        self.filters = filters
        self.kernel = kernel
        self.stride = stride
        self.same_padding = same_padding
        self.pad = (kernel - 1) // 2 if same_padding else 0
        self.params = {
            "w": np.zeros((kernel, in_channels, filters)),
            "b": np.zeros(filters),
        }

    def init(self, rng):
        k, c, r = self.kernel, self.in_channels, self.filters
        self.params["w"] = _glorot(rng, (k, c, r), k * c, k * r)
        self.params["b"] = np.zeros(r)

    def output_shape(self, in_shape):
        if len(in_shape) != 2 or in_shape[1] != self.in_channels:
            raise ShapeError(f"conv1d expects (L, {self.in_channels}), got {in_shape}")
        length = (in_shape[0] + 2 * self.pad - self.kernel) // self.stride + 1
        if length < 1:
            raise ShapeError(f"conv1d output collapses on input {in_shape}")
        return (length, self.filters)

    def forward(self, x, train=False):
        if x.ndim != 3 or x.shape[2] != self.in_channels:
            raise ShapeError(f"conv1d expects (B, L, {self.in_channels}), got {x.shape}")
        x4 = x[:, :, None, :]
        w4 = self.params["w"][:, None, :, :]
        out, cache = _conv_forward(x4, w4, self.params["b"], (self.stride, 1), (self.pad, 0))
        self._cache = cache
        return out[:, :, 0, :]

    def backward(self, dout):
        w4 = self.params["w"][:, None, :, :]
        dx4, dw4, db = _conv_backward(
            dout[:, :, None, :], self._cache, w4, (self.stride, 1), (self.pad, 0)
        )
        self.grads = {"w": dw4[:, 0], "b": db}
        return dx4[:, :, 0, :]

    def config(self):
        return {
            "in_channels": self.in_channels,
            "filters": self.filters,
            "kernel": self.kernel,
            "stride": self.stride,
            "same_padding": self.same_padding,
        }


class _Pool1d(Layer):
    def __init__(self, size: int = 2, stride: int | None = None):
        super().__init__()
        self.size = size
        self.stride = stride if stride is not None else size

    def output_shape(self, in_shape):
        if len(in_shape) != 2:
            raise ShapeError(f"1-D pooling expects (L, C), got {in_shape}")
        if in_shape[0] < self.size:
            raise ShapeError(f"pool window {self.size} exceeds length {in_shape[0]}")
        return ((in_shape[0] - self.size) // self.stride + 1, in_shape[1])

    def _windows(self, x):
        v = sliding_window_view(x, self.size, axis=1)  # (B, L-size+1, C, size)
        return v[:, :: self.stride]

    def config(self):
        return {"size": self.size, "stride": self.stride}


class AvgPool1d(_Pool1d):
    kind = "avgpool1d"

    def forward(self, x, train=False):
        v = self._windows(x)
        self._cache = (x.shape, v.shape[1])
        return v.mean(axis=-1)

    def backward(self, dout):
        x_shape, lout = self._cache
        dx = np.zeros(x_shape)
        share = dout / self.size
        for o in range(self.size):
            idx = o + self.stride * np.arange(lout)
            dx[:, idx, :] += share
        return dx


class MaxPool1d(_Pool1d):
    kind = "maxpool1d"

    def forward(self, x, train=False):
        v = self._windows(x)
        self._amax = v.argmax(axis=-1)
        self._cache = (x.shape, v.shape[1])
        return v.max(axis=-1)

    def backward(self, dout):
        x_shape, lout = self._cache
        b, _, c = x_shape
        dx = np.zeros(x_shape)
        pos = self.stride * np.arange(lout)[None, :, None] + self._amax
        bi = np.arange(b)[:, None, None]
        ci = np.arange(c)[None, None, :]
        np.add.at(dx, (bi, pos, ci), dout)
        return dx


class _Pool2d(Layer):
    def __init__(self, size: int = 2, stride: int | None = None):
        super().__init__()
        self.size = size
        self.stride = stride if stride is not None else size

    def output_shape(self, in_shape):
        if len(in_shape) != 3:
            raise ShapeError(f"2-D pooling expects (H, W, C), got {in_shape}")
        if min(in_shape[0], in_shape[1]) < self.size:
            raise ShapeError(f"pool window {self.size} exceeds input {in_shape}")
        h = (in_shape[0] - self.size) // self.stride + 1
        w = (in_shape[1] - self.size) // self.stride + 1
        return (h, w, in_shape[2])

    def _windows(self, x):
        v = sliding_window_view(x, (self.size, self.size), axis=(1, 2))
        return v[:, :: self.stride, :: self.stride]  # (B, Ho, Wo, C, s, s)

    def config(self):
        return {"size": self.size, "stride": self.stride}


class AvgPool2d(_Pool2d):
    kind = "avgpool2d"

    def forward(self, x, train=False):
        v = self._windows(x)
        self._cache = (x.shape, v.shape[1], v.shape[2])
        return v.mean(axis=(-2, -1))

    def backward(self, dout):
        x_shape, ho, wo = self._cache
        dx = np.zeros(x_shape)
        share = dout / (self.size * self.size)
        for oy in range(self.size):
            iy = oy + self.stride * np.arange(ho)
            for ox in range(self.size):
                ix = ox + self.stride * np.arange(wo)
                dx[:, iy[:, None], ix[None, :], :] += share
        return dx


class MaxPool2d(_Pool2d):
    kind = "maxpool2d"

    def forward(self, x, train=False):
        v = self._windows(x)
        b, ho, wo, c = v.shape[:4]
        flat = v.reshape(b, ho, wo, c, -1)
        self._amax = flat.argmax(axis=-1)
        self._cache = (x.shape, ho, wo)
        return flat.max(axis=-1)

    def backward(self, dout):
        x_shape, ho, wo = self._cache
        b, _, _, c = x_shape
        dx = np.zeros(x_shape)
        oy, ox = np.divmod(self._amax, self.size)
        ry = self.stride * np.arange(ho)[None, :, None, None] + oy
        rx = self.stride * np.arange(wo)[None, None, :, None] + ox
        bi = np.arange(b)[:, None, None, None]
        ci = np.arange(c)[None, None, None, :]
        np.add.at(dx, (bi, ry, rx, ci), dout)
        return dx


class Flatten(Layer):
    kind = "flatten"

    def output_shape(self, in_shape):
        return (int(np.prod(in_shape)),)

    def forward(self, x, train=False):
        self._cache = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dout):
        return dout.reshape(self._cache)


class Dense(Layer):
    """Affine map on (B, n) inputs."""

    kind = "dense"

    def __init__(self, in_features: int, out_features: int):
        super().__init__()
        self.in_features = in_features
        self.out_features = out_features
        self.params = {
            "w": np.zeros((in_features, out_features)),
            "b": np.zeros(out_features),
        }

    def init(self, rng):
        self.params["w"] = _glorot(
            rng, (self.in_features, self.out_features), self.in_features, self.out_features
        )
        self.params["b"] = np.zeros(self.out_features)

    def output_shape(self, in_shape):
        if len(in_shape) != 1 or in_shape[0] != self.in_features:
            raise ShapeError(f"dense expects ({self.in_features},), got {in_shape}")
        return (self.out_features,)

    def forward(self, x, train=False):
        if x.ndim != 2 or x.shape[1] != self.in_features:
            raise ShapeError(f"dense expects (B, {self.in_features}), got {x.shape}")
        self._cache = x
        return x @ self.params["w"] + self.params["b"]

    def backward(self, dout):
        x = self._cache
        self.grads = {"w": x.T @ dout, "b": dout.sum(axis=0)}
        return dout @ self.params["w"].T

    def config(self):
        return {"in_features": self.in_features, "out_features": self.out_features}


class ReLU(Layer):
    kind = "relu"

    def output_shape(self, in_shape):
        return in_shape

    def forward(self, x, train=False):
        self._mask = x > 0
        return np.where(self._mask, x, 0.0)

    def backward(self, dout):
        return np.where(self._mask, dout, 0.0)


class Dropout(Layer):
    """Inverted dropout: survivors scaled by 1/(1-ratio), eval is identity."""

    kind = "dropout"

    def __init__(self, ratio: float = 0.5):
        super().__init__()
        if not (0 <= ratio < 1):
            raise ValidationError(f"dropout ratio must be in [0, 1), got {ratio}")
        self.ratio = ratio
        self.rng: np.random.Generator | None = None
        self.fixed_mask: np.ndarray | None = None  # for gradient checks

    def output_shape(self, in_shape):
        return in_shape

    def forward(self, x, train=False):
        if not train or self.ratio == 0.0:
            self._mask = None
            return x
        if self.fixed_mask is not None:
            mask = self.fixed_mask
        else:
            if self.rng is None:
                raise ValidationError("dropout used in train mode without an RNG")
            mask = self.rng.random(x.shape) >= self.ratio
        self._mask = mask
        return x * mask / (1.0 - self.ratio)

    def backward(self, dout):
        if self._mask is None:
            return dout
        return dout * self._mask / (1.0 - self.ratio)

    def config(self):
        return {"ratio": self.ratio}


class Softmax(Layer):
    kind = "softmax"

    def output_shape(self, in_shape):
        return in_shape

    def forward(self, x, train=False):
        out = softmax(x)
        self._out = out
        return out

    def backward(self, dout):
        s = self._out
        return s * (dout - (dout * s).sum(axis=-1, keepdims=True))


LAYER_KINDS: dict[str, type[Layer]] = {
    cls.kind: cls
    for cls in (
        Conv2d, Conv1d, AvgPool1d, MaxPool1d, AvgPool2d, MaxPool2d,
        Flatten, Dense, ReLU, Dropout, Softmax,
    )
}
