"""Dense float64 kernel: layer norm with recorded statistics, masked softmax, activations.

Matrices are plain ``numpy.ndarray`` objects of dtype float64, shape (tokens, d).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NoLegalMovesError

LN_EPS = 1e-6


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class LayerNormParams:
    gamma: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        g, b = _frozen(self.gamma), _frozen(self.beta)
        if g.ndim != 1 or g.shape != b.shape:
            raise ConfigError(f"gamma {g.shape} and beta {b.shape} must be equal-length vectors")
        object.__setattr__(self, "gamma", g)
        object.__setattr__(self, "beta", b)

    @property
    def dim(self) -> int:
        return self.gamma.shape[0]

    def without_beta(self) -> "LayerNormParams":
        return LayerNormParams(self.gamma, np.zeros_like(self.beta))


@dataclass(frozen=True, eq=False)
class NormStats:
    """Per-token mean and standard deviation (epsilon already folded into ``sigma``)."""

    mu: np.ndarray
    sigma: np.ndarray


def layer_norm(x: np.ndarray, p: LayerNormParams, eps: float = LN_EPS) -> tuple[np.ndarray, NormStats]:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != p.dim:
        raise ConfigError(f"layer_norm: input shape {x.shape} does not match d={p.dim}")
    mu = x.mean(axis=1)
    centered = x - mu[:, None]
    sigma = np.sqrt((centered * centered).mean(axis=1) + eps)
    out = p.gamma * (centered / sigma[:, None]) + p.beta
    return out, NormStats(mu=mu, sigma=sigma)


def softmax_masked(logits: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Softmax over entries where ``mask`` is true; masked-out entries are exactly 0."""
    logits = np.asarray(logits, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if logits.shape != mask.shape:
        raise ConfigError(f"logits {logits.shape} and mask {mask.shape} differ in shape")
    if not mask.any():
        raise NoLegalMovesError()
    top = logits[mask].max()
    e = np.where(mask, np.exp(np.where(mask, logits - top, 0.0)), 0.0)
    return e / e.sum()


def mish(x):
    # softplus via logaddexp stays finite for large |x|
    return x * np.tanh(np.logaddexp(0.0, x))


def squared_relu(x):
    r = np.maximum(x, 0.0)
    return r * r


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def swish(x):
    return x * sigmoid(x)


def row_softmax(scores: np.ndarray) -> np.ndarray:
    """Softmax along the last axis with max subtraction."""
    z = scores - scores.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)
