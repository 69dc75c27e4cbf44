"""Prototype projection and the softmax alignment head.

Category means from the bank are mapped into region-feature space by a
two-layer ReLU perceptron; proposal features are then scored against the
projected prototypes with a per-proposal softmax over dot products.
"""
from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Sequence

import numpy as np

from .bank import VisualBank
from .errors import DimensionMismatch, NonFiniteInput


@dataclass
class MlpParams:
    """Weights of ``x -> W2 @ relu(W1 @ x + b1) + b2``.

    Shapes: W1 (h, d), b1 (h,), W2 (D, h), b2 (D,).
    """

    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray

    def __post_init__(self):
        h, d = self.W1.shape
        D = self.W2.shape[0]
        if self.b1.shape != (h,) or self.W2.shape != (D, h) or self.b2.shape != (D,):
            raise DimensionMismatch(
                f"inconsistent MLP shapes W1{self.W1.shape} b1{self.b1.shape} "
                f"W2{self.W2.shape} b2{self.b2.shape}")

    @property
    def d(self) -> int:
        return self.W1.shape[1]

    @property
    def hidden(self) -> int:
        return self.W1.shape[0]

    @property
    def D(self) -> int:
        return self.W2.shape[0]

    @property
    def dtype(self):
        return self.W1.dtype

    def arrays(self) -> dict[str, np.ndarray]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def astype(self, dtype) -> "MlpParams":
        return MlpParams(**{k: v.astype(dtype) for k, v in self.arrays().items()})

    def copy(self) -> "MlpParams":
        return MlpParams(**{k: v.copy() for k, v in self.arrays().items()})

    def zeros_like(self) -> "MlpParams":
        return MlpParams(**{k: np.zeros_like(v) for k, v in self.arrays().items()})

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(v)) for v in self.arrays().values())

    def flat(self) -> np.ndarray:
        return np.concatenate([v.ravel() for v in self.arrays().values()])

    def bitwise_equal(self, other: "MlpParams") -> bool:
        return all(a.dtype == b.dtype and a.tobytes() == b.tobytes()
                   for a, b in zip(self.arrays().values(), other.arrays().values()))

    @classmethod
    def init(cls, d: int, D: int, hidden: int | None = None, rng=None,
             dtype=np.float32) -> "MlpParams":
        """He-normal weights, zero biases. Default width is ``2 * max(d, D)``."""
        rng = np.random.default_rng(rng)
        h = hidden if hidden is not None else 2 * max(d, D)
        W1 = rng.standard_normal((h, d)) * np.sqrt(2.0 / d)
        W2 = rng.standard_normal((D, h)) * np.sqrt(2.0 / h)
        return cls(W1.astype(dtype), np.zeros(h, dtype), W2.astype(dtype), np.zeros(D, dtype))


@dataclass
class PrototypeBatch:
    features: np.ndarray  # (|active|, D)
    category_ids: list[int]


def _hidden(params: MlpParams, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    pre = x @ params.W1.T + params.b1
    return pre, np.maximum(pre, 0)


def mlp_forward(params: MlpParams, x) -> np.ndarray:
    """Apply the MLP to one vector of dim d or to a batch of shape (k, d)."""
    x = np.asarray(x, dtype=params.dtype)
    if x.shape[-1] != params.d:
        raise DimensionMismatch(f"input dim {x.shape[-1]} != MLP input dim {params.d}")
    _, act = _hidden(params, x)
    return act @ params.W2.T + params.b2


def project_prototypes(params: MlpParams, bank: VisualBank,
                       active: Sequence[int] | None = None) -> PrototypeBatch:
    ids = list(range(bank.num_categories)) if active is None else [int(c) for c in active]
    means = bank.prototype_matrix(ids)
    if means.shape[0] == 0:
        return PrototypeBatch(np.zeros((0, params.D), dtype=params.dtype), ids)
    return PrototypeBatch(mlp_forward(params, means), ids)


def softmax(logits, temperature: float = 1.0, axis: int = -1) -> np.ndarray:
    z = np.asarray(logits)
    if not np.issubdtype(z.dtype, np.floating):
        z = z.astype(np.float64)
    if temperature <= 0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    if not np.all(np.isfinite(z)):
        raise NonFiniteInput("softmax logits must be finite")
    # a gap beyond the float range overflows to -inf, which exp maps to an exact 0
    with np.errstate(over="ignore"):
        shifted = (z - z.max(axis=axis, keepdims=True)) / temperature
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def alignment_logits(proposals, prototypes, temperature: float = 1.0) -> np.ndarray:
    F_r = np.asarray(proposals)
    F_V = prototypes.features if isinstance(prototypes, PrototypeBatch) else np.asarray(prototypes)
    if F_r.ndim != 2 or F_V.ndim != 2 or F_r.shape[1] != F_V.shape[1]:
        raise DimensionMismatch(f"proposals {F_r.shape} vs prototypes {F_V.shape}")
    return (F_r @ F_V.T) / temperature


def alignment_scores(proposals, prototypes, temperature: float = 1.0) -> np.ndarray:
    """Per-proposal softmax over categories of proposal/prototype dot products.

    Returns an (n_q, |active|) row-stochastic matrix.
    """
    return softmax(alignment_logits(proposals, prototypes, 1.0), temperature, axis=1)


def assign_labels(scores) -> list[tuple[int, float]]:
    """Row-wise argmax (first index on ties) with its probability.

    Returned indices are column positions; map through ``PrototypeBatch.category_ids``
    to get bank category ids.
    """
    R = np.asarray(scores)
    idx = np.argmax(R, axis=1)
    return [(int(i), float(R[q, i])) for q, i in enumerate(idx)]
