"""Fixed-capacity, category-keyed prompt feature bank.

Each category owns ``n`` slots of dimension ``d``. Under the averaging policy
a new prompt fills the next free slot; once all slots are occupied it is
merged (elementwise mean) into the slot with the highest cosine similarity.
The FIFO policy keeps the ``n`` most recent prompts in a ring buffer.

Storage is float32; dot products, norms and means accumulate in float64.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .errors import (
    DimensionMismatch,
    EmptyCategory,
    InvalidDimension,
    NonFiniteInput,
    PolicyMismatch,
    UnknownCategory,
    ZeroNormInput,
)


class Policy(enum.IntEnum):
    AVERAGING = 0
    FIFO = 1

    @classmethod
    def parse(cls, value: "Policy | str | int") -> "Policy":
        if isinstance(value, Policy):
            return value
        if isinstance(value, str):
            try:
                return cls[value.upper()]
            except KeyError:
                raise ValueError(f"unknown policy {value!r}") from None
        return cls(value)


class Action(enum.IntEnum):
    FILLED = kernels.FILLED
    MERGED = kernels.MERGED
    REPLACED = kernels.REPLACED


@dataclass(frozen=True)
class UpdateRecord:
    slot_index: int
    action: Action


def as_feature(x, d: int | None = None) -> np.ndarray:
    """Validate a prompt feature and return it as contiguous float32."""
    v = np.ascontiguousarray(x, dtype=np.float32)
    if v.ndim != 1:
        raise DimensionMismatch(f"feature must be 1-D, got shape {v.shape}")
    if d is not None and v.shape[0] != d:
        raise DimensionMismatch(f"feature has dim {v.shape[0]}, bank expects {d}")
    if not np.all(np.isfinite(v)):
        raise NonFiniteInput("feature contains non-finite values")
    v64 = v.astype(np.float64)
    if float(v64 @ v64) == 0.0:
        raise ZeroNormInput("zero-norm feature rejected")
    return v


def cosine_similarity(a, b) -> float:
    """Cosine similarity of two non-zero vectors, clamped to [-1, 1]."""
    a = np.asarray(a, dtype=np.float32)
    b = np.asarray(b, dtype=np.float32)
    if a.ndim != 1 or a.shape != b.shape:
        raise DimensionMismatch(f"shapes {a.shape} and {b.shape} differ")
    a = as_feature(a)
    b = as_feature(b)
    return float(kernels.get().cosine(a, b))


class VisualBank:
    """Prompt bank of shape (num_categories, n, d).

    Slots ``[0, occupancy)`` of a category are occupied. Free slots are tracked
    by the occupancy counter, not by testing for zero vectors, so a merge that
    happens to produce an all-zero slot does not free it.

    Writes to one category must be serialized by the caller; distinct
    categories may be updated from different threads.
    """

    def __init__(self, num_categories: int, n: int, d: int,
                 policy: Policy | str = Policy.AVERAGING):
        for name, value in (("num_categories", num_categories), ("n", n), ("d", d)):
            if int(value) < 1:
                raise InvalidDimension(f"{name} must be >= 1, got {value}")
        self.policy = Policy.parse(policy)
        self.slots = np.zeros((int(num_categories), int(n), int(d)), dtype=np.float32)
        self.occupancy = np.zeros(int(num_categories), dtype=np.int64)
        self.cursor = np.zeros(int(num_categories), dtype=np.int64)

    @property
    def num_categories(self) -> int:
        return self.slots.shape[0]

    @property
    def n(self) -> int:
        return self.slots.shape[1]

    @property
    def d(self) -> int:
        return self.slots.shape[2]

    def __repr__(self) -> str:
        return (f"VisualBank(num_categories={self.num_categories}, n={self.n}, "
                f"d={self.d}, policy={self.policy.name})")

    def _check_category(self, category: int) -> int:
        c = int(category)
        if not 0 <= c < self.num_categories:
            raise UnknownCategory(f"category {category} not in bank of {self.num_categories}")
        return c

    def insert(self, category: int, feature) -> UpdateRecord:
        """Insert under the bank's own policy."""
        if self.policy is Policy.AVERAGING:
            return self.insert_prompt(category, feature)
        return self.insert_prompt_fifo(category, feature)

    def insert_prompt(self, category: int, feature) -> UpdateRecord:
        if self.policy is not Policy.AVERAGING:
            raise PolicyMismatch("insert_prompt requires the averaging policy")
        c = self._check_category(category)
        v = as_feature(feature, self.d)
        index, action = kernels.get().insert_average(self.slots[c], int(self.occupancy[c]), v)
        if action == kernels.FILLED:
            self.occupancy[c] += 1
        return UpdateRecord(int(index), Action(action))

    def insert_prompt_fifo(self, category: int, feature) -> UpdateRecord:
        if self.policy is not Policy.FIFO:
            raise PolicyMismatch("insert_prompt_fifo requires the FIFO policy")
        c = self._check_category(category)
        v = as_feature(feature, self.d)
        index, action = kernels.get().insert_fifo(
            self.slots[c], int(self.occupancy[c]), int(self.cursor[c]), v)
        if action == kernels.FILLED:
            self.occupancy[c] += 1
        else:
            self.cursor[c] = (self.cursor[c] + 1) % self.n
        return UpdateRecord(int(index), Action(action))

    def insert_many(self, categories: Sequence[int], features) -> list[UpdateRecord]:
        """Apply a stream of prompts in order with a single kernel call."""
        cats = np.ascontiguousarray(categories, dtype=np.int64)
        feats = np.ascontiguousarray(features, dtype=np.float32)
        if feats.ndim != 2 or feats.shape[1] != self.d:
            raise DimensionMismatch(f"features must be (N, {self.d}), got {feats.shape}")
        if cats.shape[0] != feats.shape[0]:
            raise DimensionMismatch("categories and features differ in length")
        if cats.size and (cats.min() < 0 or cats.max() >= self.num_categories):
            raise UnknownCategory("stream references a category outside the bank")
        if not np.all(np.isfinite(feats)):
            raise NonFiniteInput("stream contains non-finite values")
        f64 = feats.astype(np.float64)
        if np.any(np.einsum("ij,ij->i", f64, f64) == 0.0):
            raise ZeroNormInput("stream contains a zero-norm feature")
        indices, actions = kernels.get().insert_stream(
            self.slots, self.occupancy, self.cursor, cats, feats,
            int(self.policy is Policy.FIFO))
        return [UpdateRecord(int(i), Action(int(a))) for i, a in zip(indices, actions)]

    def category_mean(self, category: int) -> np.ndarray:
        """Mean of the occupied slots of ``category`` (float64 sum, float32 result)."""
        c = self._check_category(category)
        occ = int(self.occupancy[c])
        if occ == 0:
            raise EmptyCategory(f"category {c} has no prompts")
        acc = np.zeros(self.d, dtype=np.float64)
        for m in range(occ):
            acc += self.slots[c, m]
        return (acc / occ).astype(np.float32)

    def prototype_matrix(self, active: Sequence[int] | None = None) -> np.ndarray:
        """Stack category means; row order follows ``active`` (default: all)."""
        if active is None:
            active = range(self.num_categories)
        rows = [self.category_mean(c) for c in active]
        if not rows:
            return np.zeros((0, self.d), dtype=np.float32)
        return np.stack(rows)

    def nonempty_categories(self) -> list[int]:
        return [int(c) for c in np.flatnonzero(self.occupancy > 0)]

    def add_category(self) -> int:
        new_id = self.num_categories
        self.slots = np.ascontiguousarray(
            np.concatenate([self.slots, np.zeros((1, self.n, self.d), dtype=np.float32)]))
        self.occupancy = np.append(self.occupancy, 0).astype(np.int64)
        self.cursor = np.append(self.cursor, 0).astype(np.int64)
        return new_id

    def copy(self) -> "VisualBank":
        out = VisualBank.__new__(VisualBank)
        out.policy = self.policy
        out.slots = self.slots.copy()
        out.occupancy = self.occupancy.copy()
        out.cursor = self.cursor.copy()
        return out

    def state_equal(self, other: "VisualBank") -> bool:
        """Bitwise equality of slots, counters and policy."""
        return (self.policy == other.policy
                and self.slots.shape == other.slots.shape
                and self.slots.tobytes() == other.slots.tobytes()
                and np.array_equal(self.occupancy, other.occupancy)
                and np.array_equal(self.cursor, other.cursor))
