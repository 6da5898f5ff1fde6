"""Gradient verification against central finite differences.

The check runs the network at double precision, perturbs every parameter
element by +/-h, and compares the analytic gradient per parameter tensor:
max |analytic - numeric| / max(|analytic|_inf, |numeric|_inf, tiny).
"""

from __future__ import annotations

import numpy as np

from .net import Network, backward, bce_loss


def numeric_gradient(
    network: Network, x: np.ndarray, t: np.ndarray, param: np.ndarray, h: float = 1e-3
) -> np.ndarray:
    grad = np.zeros_like(param, dtype=np.float64)
    flat = param.reshape(-1)
    out = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        lp = bce_loss(network.forward(x, train=True), t)
        flat[i] = orig - h
        lm = bce_loss(network.forward(x, train=True), t)
        flat[i] = orig
        out[i] = (lp - lm) / (2.0 * h)
    return grad


def max_relative_gradient_error(
    network: Network, x: np.ndarray, t: np.ndarray, h: float = 1e-3
) -> float:
    """Worst per-tensor relative error between analytic and numeric gradients."""
    if network.dtype != np.float64:
        raise ValueError("gradient checks require a float64 network")
    t = np.asarray(t, dtype=np.float64)
    if t.ndim == 1:
        t = t[None, :]
    _, grads = backward(network, x, t)
    worst = 0.0
    for key, _, _, param in network.parameters():
        analytic = grads[key].astype(np.float64)
        numeric = numeric_gradient(network, x, t, param, h)
        scale = max(
            float(np.abs(analytic).max(initial=0.0)),
            float(np.abs(numeric).max(initial=0.0)),
            1e-8,
        )
        err = float(np.abs(analytic - numeric).max(initial=0.0)) / scale
        worst = max(worst, err)
    return worst
