"""Network layers: 2-D convolution, batch normalization, ReLU, dense, sigmoid.

Activations are NCHW float arrays.  Each layer caches what its backward
pass needs; backward returns the gradient w.r.t. the layer input and
stores parameter gradients in ``grads``.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import as_strided


class Layer:
    kind = "layer"

    def params(self) -> dict[str, np.ndarray]:
        return {}

    @property
    def grads(self) -> dict[str, np.ndarray]:
        return getattr(self, "_grads", {})

    def buffers(self) -> dict[str, np.ndarray]:
        return {}

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        raise NotImplementedError

    def backward(self, dy: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def out_shape(self, in_shape: tuple[int, ...]) -> tuple[int, ...]:
        raise NotImplementedError


class Conv2d(Layer):
    """Cross-correlation with "same" zero padding for k > 1 (pad = (k-1)//2)."""

    kind = "conv"

    def __init__(
        self,
        in_ch: int,
        out_ch: int,
        kernel: int,
        stride: int = 1,
        rng: np.random.Generator | None = None,
        dtype=np.float32,
    ) -> None:
        if kernel < 1 or stride < 1:
            raise ValueError("kernel and stride must be positive")
        self.in_ch = in_ch
        self.out_ch = out_ch
        self.kernel = kernel
        self.stride = stride
        self.pad = (kernel - 1) // 2
        rng = rng or np.random.default_rng()
        scale = np.sqrt(2.0 / (in_ch * kernel * kernel))
        self.w = (rng.standard_normal((out_ch, in_ch, kernel, kernel)) * scale).astype(dtype)
        self.b = np.zeros(out_ch, dtype=dtype)
        self._grads: dict[str, np.ndarray] = {}
        self._cache = None

    def params(self):
        return {"w": self.w, "b": self.b}

    def out_shape(self, in_shape):
        c, h, w = in_shape
        if c != self.in_ch:
            raise ValueError(f"conv expects {self.in_ch} channels, got {c}")
        k, s, p = self.kernel, self.stride, self.pad
        return (self.out_ch, (h + 2 * p - k) // s + 1, (w + 2 * p - k) // s + 1)

    def _windows(self, xp: np.ndarray, oh: int, ow: int) -> np.ndarray:
        n, c = xp.shape[:2]
        sn, sc, sh, sw = xp.strides
        s, k = self.stride, self.kernel
        return as_strided(
            xp,
            shape=(n, c, oh, ow, k, k),
            strides=(sn, sc, s * sh, s * sw, sh, sw),
            writeable=False,
        )

    def forward(self, x, train=False):
        if x.ndim != 4 or x.shape[1] != self.in_ch:
            raise ValueError(
                f"conv input must be (N, {self.in_ch}, H, W), got {x.shape}"
            )
        p = self.pad
        xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p))) if p else x
        _, oh, ow = self.out_shape(x.shape[1:])
        win = self._windows(xp, oh, ow)
        out = np.einsum("nchwij,ocij->nohw", win, self.w, optimize=True)
        out += self.b[None, :, None, None]
        self._cache = (win, xp.shape, x.shape)
        return out

    def backward(self, dy):
        win, xp_shape, x_shape = self._cache
        self._grads = {
            "w": np.einsum("nchwij,nohw->ocij", win, dy, optimize=True),
            "b": dy.sum(axis=(0, 2, 3)),
        }
        dxp = np.zeros(xp_shape, dtype=dy.dtype)
        s = self.stride
        oh, ow = dy.shape[2:]
        for i in range(self.kernel):
            for j in range(self.kernel):
                patch = np.einsum("nohw,oc->nchw", dy, self.w[:, :, i, j], optimize=True)
                dxp[:, :, i : i + s * oh : s, j : j + s * ow : s] += patch
        p = self.pad
        if p:
            return dxp[:, :, p : p + x_shape[2], p : p + x_shape[3]]
        return dxp


class BatchNorm2d(Layer):
    """Per-channel batch normalization (eps 1e-5, running momentum 0.9)."""

    kind = "batchnorm"

    def __init__(self, channels: int, eps: float = 1e-5, momentum: float = 0.9, dtype=np.float32):
        self.channels = channels
        self.eps = eps
        self.momentum = momentum
        self.gamma = np.ones(channels, dtype=dtype)
        self.beta = np.zeros(channels, dtype=dtype)
        self.running_mean = np.zeros(channels, dtype=dtype)
        self.running_var = np.ones(channels, dtype=dtype)
        self._grads: dict[str, np.ndarray] = {}
        self._cache = None

    def params(self):
        return {"gamma": self.gamma, "beta": self.beta}

    def buffers(self):
        return {"running_mean": self.running_mean, "running_var": self.running_var}

    def out_shape(self, in_shape):
        if in_shape[0] != self.channels:
            raise ValueError(f"batchnorm expects {self.channels} channels")
        return in_shape

    def forward(self, x, train=False):
        if x.shape[1] != self.channels:
            raise ValueError(f"batchnorm expects {self.channels} channels, got {x.shape[1]}")
        axes = (0, 2, 3)
        if train:
            if x.shape[0] < 2:
                raise ValueError("batchnorm training requires batch size >= 2")
            mean = x.mean(axis=axes)
            var = x.var(axis=axes)
            m = self.momentum
            self.running_mean[:] = m * self.running_mean + (1 - m) * mean
            self.running_var[:] = m * self.running_var + (1 - m) * var
        else:
            mean = self.running_mean
            var = self.running_var
        inv_std = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mean[None, :, None, None]) * inv_std[None, :, None, None]
        self._cache = (xhat, inv_std, train)
        return self.gamma[None, :, None, None] * xhat + self.beta[None, :, None, None]

    def backward(self, dy):
        xhat, inv_std, train = self._cache
        axes = (0, 2, 3)
        self._grads = {
            "gamma": (dy * xhat).sum(axis=axes),
            "beta": dy.sum(axis=axes),
        }
        g = self.gamma[None, :, None, None]
        if not train:
            return dy * g * inv_std[None, :, None, None]
        m = dy.shape[0] * dy.shape[2] * dy.shape[3]
        dxhat = dy * g
        sum_dxhat = dxhat.sum(axis=axes, keepdims=True)
        sum_dxhat_xhat = (dxhat * xhat).sum(axis=axes, keepdims=True)
        return (
            inv_std[None, :, None, None]
            / m
            * (m * dxhat - sum_dxhat - xhat * sum_dxhat_xhat)
        )


class ReLU(Layer):
    kind = "relu"

    def __init__(self):
        self._cache = None

    def out_shape(self, in_shape):
        return in_shape

    def forward(self, x, train=False):
        self._cache = x > 0
        return x * self._cache

    def backward(self, dy):
        return dy * self._cache


class Dense(Layer):
    """Fully connected layer; flattens any trailing input dimensions."""

    kind = "dense"

    def __init__(self, in_dim: int, out_dim: int, rng=None, dtype=np.float32):
        rng = rng or np.random.default_rng()
        scale = np.sqrt(2.0 / in_dim)
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.w = (rng.standard_normal((in_dim, out_dim)) * scale).astype(dtype)
        self.b = np.zeros(out_dim, dtype=dtype)
        self._grads: dict[str, np.ndarray] = {}
        self._cache = None

    def params(self):
        return {"w": self.w, "b": self.b}

    def out_shape(self, in_shape):
        flat = int(np.prod(in_shape))
        if flat != self.in_dim:
            raise ValueError(f"dense expects {self.in_dim} inputs, got {flat}")
        return (self.out_dim,)

    def forward(self, x, train=False):
        flat = x.reshape(x.shape[0], -1)
        if flat.shape[1] != self.in_dim:
            raise ValueError(f"dense expects {self.in_dim} inputs, got {flat.shape[1]}")
        self._cache = (flat, x.shape)
        return flat @ self.w + self.b

    def backward(self, dy):
        flat, x_shape = self._cache
        self._grads = {"w": flat.T @ dy, "b": dy.sum(axis=0)}
        return (dy @ self.w.T).reshape(x_shape)


class Sigmoid(Layer):
    kind = "sigmoid"

    def __init__(self):
        self._cache = None

    def out_shape(self, in_shape):
        return in_shape

    def forward(self, x, train=False):
        # numerically stable split by sign
        out = np.empty_like(x)
        pos = x >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
        ex = np.exp(x[~pos])
        out[~pos] = ex / (1.0 + ex)
        self._cache = out
        return out

    def backward(self, dy):
        p = self._cache
        return dy * p * (1.0 - p)
