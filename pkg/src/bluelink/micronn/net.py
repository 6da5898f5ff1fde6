"""Model specification, network container, loss and reverse-mode gradients."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .layers import BatchNorm2d, Conv2d, Dense, Layer, ReLU, Sigmoid

BCE_CLAMP = 1e-7


class LayerNumericsError(RuntimeError):
    """Raised when a non-finite value appears, naming the offending layer."""


@dataclass(frozen=True)
class LayerSpec:
    """Structural description of one layer.

    conv: kernel, in_ch, out_ch, stride.  batchnorm: channels.
    dense: in_dim, out_dim.  relu / sigmoid: no fields.
    """

    kind: str
    kernel: int = 0
    in_ch: int = 0
    out_ch: int = 0
    stride: int = 1
    channels: int = 0
    in_dim: int = 0
    out_dim: int = 0

    KINDS = ("conv", "batchnorm", "relu", "dense", "sigmoid")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")

    @classmethod
    def conv(cls, kernel: int, in_ch: int, out_ch: int, stride: int = 1) -> "LayerSpec":
        return cls(kind="conv", kernel=kernel, in_ch=in_ch, out_ch=out_ch, stride=stride)

    @classmethod
    def batchnorm(cls, channels: int) -> "LayerSpec":
        return cls(kind="batchnorm", channels=channels)

    @classmethod
    def relu(cls) -> "LayerSpec":
        return cls(kind="relu")

    @classmethod
    def dense(cls, in_dim: int, out_dim: int) -> "LayerSpec":
        return cls(kind="dense", in_dim=in_dim, out_dim=out_dim)

    @classmethod
    def sigmoid(cls) -> "LayerSpec":
        return cls(kind="sigmoid")


@dataclass(frozen=True)
class ModelSpec:
    """Ordered layer list plus the input/output contract of the model."""

    layers: tuple[LayerSpec, ...]
    input_shape: tuple[int, int, int]  # (C, H, W)
    output_len: int
    grid: tuple[int, int] = (0, 0)  # decoder models carry their (rows, cols)

    def __post_init__(self):
        if not self.layers:
            raise ValueError("a model needs at least one layer")
        if self.layers[-1].kind != "sigmoid":
            raise ValueError("the final activation must be sigmoid")


def _instantiate(spec: LayerSpec, rng: np.random.Generator, dtype) -> Layer:
    if spec.kind == "conv":
        return Conv2d(spec.in_ch, spec.out_ch, spec.kernel, spec.stride, rng=rng, dtype=dtype)
    if spec.kind == "batchnorm":
        return BatchNorm2d(spec.channels, dtype=dtype)
    if spec.kind == "relu":
        return ReLU()
    if spec.kind == "dense":
        return Dense(spec.in_dim, spec.out_dim, rng=rng, dtype=dtype)
    return Sigmoid()


class Network:
    """A built model: layer instances with parameters, forward/backward."""

    def __init__(self, spec: ModelSpec, layers: list[Layer], dtype=np.float32):
        self.spec = spec
        self.layers = layers
        self.dtype = dtype
        self._validate_chain()

    def _validate_chain(self) -> None:
        shape: tuple[int, ...] = self.spec.input_shape
        for i, layer in enumerate(self.layers):
            try:
                shape = layer.out_shape(shape)
            except ValueError as exc:
                raise ValueError(f"layer {i} ({layer.kind}): {exc}") from exc
        if int(np.prod(shape)) != self.spec.output_len:
            raise ValueError(
                f"model produces {int(np.prod(shape))} outputs, spec says "
                f"{self.spec.output_len}"
            )

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        out = np.ascontiguousarray(x, dtype=self.dtype)
        for layer in self.layers:
            out = layer.forward(out, train=train)
        return out.reshape(out.shape[0], -1)

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Inference-mode forward pass returning sigmoid probabilities."""
        return self.forward(x, train=False)

    def backward_from_probs(self, probs: np.ndarray, targets: np.ndarray) -> None:
        """Backpropagate the BCE gradient through every layer."""
        dy = bce_grad(probs, targets).astype(self.dtype)
        # the last layer produced a flattened view; restore its shape
        for layer in reversed(self.layers):
            expected = getattr(layer, "_cache", None)
            if layer.kind == "sigmoid" and expected is not None:
                dy = dy.reshape(expected.shape)
            dy = layer.backward(dy)

    def parameters(self):
        for i, layer in enumerate(self.layers):
            for name, arr in layer.params().items():
                yield f"{i}.{layer.kind}.{name}", layer, name, arr

    def gradients(self):
        for i, layer in enumerate(self.layers):
            for name, arr in layer.grads.items():
                yield f"{i}.{layer.kind}.{name}", layer, name, arr

    def _locate_nonfinite(self, x: np.ndarray) -> str:
        out = np.ascontiguousarray(x, dtype=self.dtype)
        if not np.all(np.isfinite(out)):
            return "input"
        for i, layer in enumerate(self.layers):
            out = layer.forward(out, train=False)
            if not np.all(np.isfinite(out)):
                return f"layer {i} ({layer.kind})"
        return "loss"


def bce_loss(probs: np.ndarray, targets: np.ndarray) -> float:
    """Mean binary cross-entropy with probabilities clamped away from 0/1."""
    p = np.clip(probs.astype(np.float64), BCE_CLAMP, 1.0 - BCE_CLAMP)
    t = targets.astype(np.float64)
    return float(-np.mean(t * np.log(p) + (1.0 - t) * np.log1p(-p)))


def bce_grad(probs: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """d(mean BCE)/d(probs); zero where the clamp is active."""
    p = probs.astype(np.float64)
    t = targets.astype(np.float64)
    inside = (p > BCE_CLAMP) & (p < 1.0 - BCE_CLAMP)
    pc = np.clip(p, BCE_CLAMP, 1.0 - BCE_CLAMP)
    grad = (pc - t) / (pc * (1.0 - pc)) / p.size
    return np.where(inside, grad, 0.0)


def backward(
    network: Network, inputs: np.ndarray, targets: np.ndarray
) -> tuple[float, dict[str, np.ndarray]]:
    """Forward + reverse pass; returns (loss, gradients keyed by parameter).

    Raises LayerNumericsError (naming the first offending layer) if the
    loss turns non-finite.
    """
    targets = np.asarray(targets)
    if targets.ndim == 1:
        targets = targets[None, :]
    if not np.isin(targets, (0, 1)).all():
        raise ValueError("targets must be 0/1 bits")
    probs = network.forward(inputs, train=True)
    if probs.shape != targets.shape:
        raise ValueError(f"model outputs {probs.shape}, targets {targets.shape}")
    loss = bce_loss(probs, targets)
    if not np.isfinite(loss):
        raise LayerNumericsError(
            f"non-finite loss; first non-finite activation at "
            f"{network._locate_nonfinite(inputs)}"
        )
    network.backward_from_probs(probs, targets)
    return loss, {key: g for key, _, _, g in network.gradients()}


def build_network(
    spec: ModelSpec, seed: int = 0, dtype=np.float32
) -> Network:
    """Instantiate a ModelSpec with seeded He-initialized parameters."""
    rng = np.random.default_rng(seed)
    layers = [_instantiate(ls, rng, dtype) for ls in spec.layers]
    return Network(spec, layers, dtype=dtype)
