"""Self-checks shared by the test suite and the ``selftest``/``gradcheck`` commands."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bank import Action, Policy, VisualBank
from .fusion import MlpParams
from .learner import Batch, backward, finite_difference_check
from .oracle import oracle_update

# (d, h, D, categories, queries)
GRADCHECK_SHAPES = [
    (2, 4, 2, 1, 1),
    (3, 5, 4, 2, 3),
    (8, 16, 6, 4, 7),
    (16, 12, 10, 5, 9),
    (32, 64, 32, 6, 12),
]


def gradcheck_case(d: int, h: int, D: int, categories: int, queries: int,
                   seed: int) -> tuple[MlpParams, Batch]:
    rng = np.random.default_rng([seed, d, h, D, categories, queries])
    params = MlpParams.init(d, D, h, rng=rng, dtype=np.float64)
    params.b1[:] = rng.normal(0, 0.1, h)
    params.b2[:] = rng.normal(0, 0.1, D)
    batch = Batch(
        means=rng.standard_normal((categories, d)),
        proposals=rng.standard_normal((queries, D)),
        targets=rng.integers(0, categories, size=queries),
        temperature=1.0,
    )
    return params, batch


def run_gradchecks(eps: float = 1e-5, n_coords: int = 256,
                   seeds=range(len(GRADCHECK_SHAPES))) -> list[tuple[tuple, float]]:
    out = []
    for shape, seed in zip(GRADCHECK_SHAPES, seeds):
        params, batch = gradcheck_case(*shape, seed=seed)
        out.append((shape, finite_difference_check(params, batch, eps, n_coords, rng=seed)))
    return out


def corrupted_gradcheck(seed: int = 0, eps: float = 1e-5) -> float:
    """Discrepancy when the analytic gradient has its sign flipped (expected ~2)."""
    params, batch = gradcheck_case(*GRADCHECK_SHAPES[2], seed=seed)
    g = backward(params, batch)
    flipped = MlpParams(-g.W1, -g.b1, -g.W2, -g.b2)
    return finite_difference_check(params, batch, eps, grads=flipped, rng=seed)


@dataclass
class OracleResult:
    updates: int
    index_mismatches: int
    value_mismatches: int
    other_slot_changes: int

    @property
    def ok(self) -> bool:
        return self.index_mismatches == self.value_mismatches == self.other_slot_changes == 0


def oracle_equivalence(total_updates: int = 10_000, seed: int = 0,
                       slot_counts=(1, 2, 5), dims=(2, 8, 64)) -> OracleResult:
    """Compare the bank's merge step with ``oracle_update`` on random full banks.

    Updates are spread evenly over the (n, d) grid and applied sequentially so
    slots drift as they would in a stream. About one feature in ten is a
    rescaled copy of an existing slot, which produces exact similarity ties.
    """
    cells = [(n, d) for n in slot_counts for d in dims]
    per_cell = -(-total_updates // len(cells))
    rng = np.random.default_rng(seed)
    done = idx_bad = val_bad = other_bad = 0
    for n, d in cells:
        bank = VisualBank(1, n, d, Policy.AVERAGING)
        for _ in range(n):
            bank.insert_prompt(0, rng.standard_normal(d).astype(np.float32))
        for _ in range(per_cell):
            if done >= total_updates:
                break
            if rng.random() < 0.1:
                src = bank.slots[0, rng.integers(n)]
                feature = (src * np.float32(rng.uniform(0.5, 2.0))).astype(np.float32)
                if not np.any(feature):
                    feature = rng.standard_normal(d).astype(np.float32)
            else:
                feature = rng.standard_normal(d).astype(np.float32)
            before = bank.slots[0].copy()
            k_ref, slot_ref = oracle_update(before.tolist(), feature.tolist())
            rec = bank.insert_prompt(0, feature)
            after = bank.slots[0]
            done += 1
            if rec.slot_index != k_ref or rec.action is not Action.MERGED:
                idx_bad += 1
                continue
            if after[k_ref].tobytes() != np.asarray(slot_ref, dtype=np.float32).tobytes():
                val_bad += 1
            mask = np.arange(n) != k_ref
            if after[mask].tobytes() != before[mask].tobytes():
                other_bad += 1
    return OracleResult(done, idx_bad, val_bad, other_bad)
