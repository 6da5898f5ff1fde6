"""Mini-batch training loop with Adam."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .net import LayerNumericsError, Network, backward, bce_loss


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 10
    batch_size: int = 32
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    shuffle: bool = True


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    loss: float
    bit_accuracy: float
    val_loss: Optional[float] = None
    val_accuracy: Optional[float] = None
    seconds: float = 0.0

    CSV_HEADER = "epoch,loss,bit_accuracy,val_loss,val_accuracy,seconds"

    def csv_row(self) -> str:
        def fmt(v):
            return "" if v is None else f"{v:.6f}"

        return (
            f"{self.epoch},{fmt(self.loss)},{fmt(self.bit_accuracy)},"
            f"{fmt(self.val_loss)},{fmt(self.val_accuracy)},{self.seconds:.2f}"
        )


class TrainingDiverged(RuntimeError):
    def __init__(self, message: str, history: list[EpochStats]):
        super().__init__(message)
        self.history = history


class Adam:
    """Adam optimizer over a network's parameters."""

    def __init__(self, network: Network, config: TrainConfig):
        self.cfg = config
        self.step_count = 0
        self.m = {key: np.zeros_like(arr) for key, _, _, arr in network.parameters()}
        self.v = {key: np.zeros_like(arr) for key, _, _, arr in network.parameters()}

    def step(self, network: Network) -> None:
        self.step_count += 1
        c = self.cfg
        bias1 = 1.0 - c.beta1**self.step_count
        bias2 = 1.0 - c.beta2**self.step_count
        for key, layer, name, param in network.parameters():
            grad = layer.grads.get(name)
            if grad is None:
                continue
            m = self.m[key]
            v = self.v[key]
            m += (1.0 - c.beta1) * (grad - m)
            v += (1.0 - c.beta2) * (grad * grad - v)
            update = (m / bias1) / (np.sqrt(v / bias2) + c.eps)
            param -= (c.learning_rate * update).astype(param.dtype)


def evaluate(network: Network, inputs: np.ndarray, targets: np.ndarray, batch_size: int = 64):
    """(loss, bit accuracy) on a dataset in inference mode."""
    losses = []
    correct = 0
    total = 0
    for i in range(0, len(inputs), batch_size):
        x = inputs[i : i + batch_size]
        t = targets[i : i + batch_size]
        p = network.predict(x)
        losses.append(bce_loss(p, t) * len(x))
        correct += int(((p > 0.5) == (t > 0.5)).sum())
        total += t.size
    return sum(losses) / len(inputs), correct / total


def train(
    network: Network,
    inputs: np.ndarray,
    targets: np.ndarray,
    config: TrainConfig = TrainConfig(),
    val_inputs: Optional[np.ndarray] = None,
    val_targets: Optional[np.ndarray] = None,
) -> list[EpochStats]:
    """Optimize the network in place; returns per-epoch history.

    Deterministic under a fixed config seed.  A non-finite loss aborts
    with TrainingDiverged carrying the history so far.
    """
    n = len(inputs)
    if n != len(targets):
        raise ValueError("inputs and targets length mismatch")
    rng = np.random.default_rng(config.seed)
    opt = Adam(network, config)
    history: list[EpochStats] = []
    for epoch in range(config.epochs):
        t0 = time.perf_counter()
        order = rng.permutation(n) if config.shuffle else np.arange(n)
        losses = 0.0
        correct = 0
        total = 0
        for i in range(0, n, config.batch_size):
            idx = order[i : i + config.batch_size]
            x = inputs[idx]
            t = targets[idx]
            try:
                loss, _ = backward(network, x, t)
            except LayerNumericsError as exc:
                raise TrainingDiverged(str(exc), history) from exc
            opt.step(network)
            losses += loss * len(idx)
            probs = _last_probs(network)
            correct += int(((probs > 0.5) == (t > 0.5)).sum())
            total += t.size
        stats = {
            "epoch": epoch,
            "loss": losses / n,
            "bit_accuracy": correct / total,
            "seconds": time.perf_counter() - t0,
        }
        if val_inputs is not None and val_targets is not None:
            vl, va = evaluate(network, val_inputs, val_targets)
            stats.update(val_loss=vl, val_accuracy=va)
        history.append(EpochStats(**stats))
    return history


def _last_probs(network: Network) -> np.ndarray:
    # the sigmoid head caches its output; reuse it for train-time accuracy
    last = network.layers[-1]
    probs = last._cache
    return probs.reshape(probs.shape[0], -1)


def history_to_csv(history: Sequence[EpochStats]) -> str:
    lines = [EpochStats.CSV_HEADER]
    lines += [row.csv_row() for row in history]
    return "\n".join(lines) + "\n"
