"""First-order optimization: Adam with bias correction, global-norm clipping.

Parameters and gradients travel as flat name -> float64 array dicts; the
gradient dict mirrors the parameter dict exactly and is rebuilt fresh for
every optimization step (nothing carries over between steps).
"""

from __future__ import annotations

import math

import numpy as np

__all__ = ["Adam", "clip_gradients", "global_grad_norm"]


def global_grad_norm(grads: dict[str, np.ndarray]) -> float:
    """Global L2 norm over every gradient tensor."""
    total = 0.0
    for g in grads.values():
        flat = g.ravel()
        total += float(flat @ flat)
    return math.sqrt(total)


def clip_gradients(grads: dict[str, np.ndarray], max_norm: float) -> dict[str, np.ndarray]:
    """Scale all gradients (in place) so the global norm never exceeds max_norm."""
    norm = global_grad_norm(grads)
    if norm > max_norm:
        scale = max_norm / norm
        for g in grads.values():
            g *= scale
    return grads


class Adam:
    """Standard Adam with bias correction; epsilon added outside the sqrt."""

    def __init__(
        self,
        params: dict[str, np.ndarray],
        learning_rate: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        b1c = 1.0 - self.beta1**self.t
        b2c = 1.0 - self.beta2**self.t
        for name, p in params.items():
            g = grads[name]
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.learning_rate * (m / b1c) / (np.sqrt(v / b2c) + self.eps)

    def state_tensors(self) -> dict[str, np.ndarray]:
        """Moment buffers under checkpoint-friendly names."""
        out = {}
        for name, m in self.m.items():
            out[f"adam.m.{name}"] = m
        for name, v in self.v.items():
            out[f"adam.v.{name}"] = v
        return out

    def load_state(self, tensors: dict[str, np.ndarray], t: int) -> None:
        self.t = int(t)
        for name in self.m:
            self.m[name] = tensors[f"adam.m.{name}"]
            self.v[name] = tensors[f"adam.v.{name}"]
