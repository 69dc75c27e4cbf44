"""Bank invariants over random insert sequences."""
from collections import Counter

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from visbank.bank import Action, Policy, VisualBank
from visbank.oracle import oracle_update

dims = st.tuples(st.integers(1, 6), st.integers(1, 12))
seeds = st.integers(0, 2**32 - 1)


def _features(rng, count, d):
    return rng.standard_normal((count, d)).astype(np.float32)


@settings(max_examples=100, deadline=None)
@given(dims, seeds, st.sampled_from(list(Policy)))
def test_fill_phase_prefix(nd, seed, policy):
    n, d = nd
    feats = _features(np.random.default_rng(seed), n, d)
    bank = VisualBank(1, n, d, policy)
    for t in range(n):
        bank.insert(0, feats[t])
        assert bank.slots[0, :t + 1].tobytes() == feats[:t + 1].tobytes()
        assert not bank.slots[0, t + 1:].any()
        assert bank.occupancy[0] == t + 1


@settings(max_examples=100, deadline=None)
@given(dims, seeds)
def test_single_slot_mutation_and_oracle(nd, seed):
    n, d = nd
    rng = np.random.default_rng(seed)
    bank = VisualBank(1, n, d)
    for f in _features(rng, n, d):
        bank.insert_prompt(0, f)
    for f in _features(rng, 20, d):
        before = bank.slots[0].copy()
        rec = bank.insert_prompt(0, f)
        assert rec.action is Action.MERGED
        k_ref, new_ref = oracle_update(before.tolist(), f.tolist())
        assert rec.slot_index == k_ref
        assert bank.slots[0, k_ref].tobytes() == np.asarray(new_ref, np.float32).tobytes()
        changed = [m for m in range(n) if bank.slots[0, m].tobytes() != before[m].tobytes()]
        assert set(changed) <= {rec.slot_index}


@settings(max_examples=100, deadline=None)
@given(dims, seeds, st.floats(1e-3, 1e3))
def test_scale_invariant_selection(nd, seed, alpha):
    n, d = nd
    rng = np.random.default_rng(seed)
    bank = VisualBank(1, n, d)
    for f in _features(rng, n, d):
        bank.insert_prompt(0, f)
    v = _features(rng, 1, d)[0]
    a, b = bank.copy(), bank.copy()
    assert a.insert_prompt(0, v).slot_index == b.insert_prompt(0, np.float32(alpha) * v).slot_index


@settings(max_examples=100, deadline=None)
@given(dims, seeds, st.integers(0, 30))
def test_fifo_recency(nd, seed, extra):
    n, d = nd
    feats = _features(np.random.default_rng(seed), n + extra, d)
    bank = VisualBank(1, n, d, Policy.FIFO)
    for f in feats:
        bank.insert_prompt_fifo(0, f)
    held = Counter(row.tobytes() for row in bank.slots[0])
    recent = Counter(row.tobytes() for row in feats[-n:])
    assert held == recent


@settings(max_examples=100, deadline=None)
@given(dims, seeds)
def test_norm_bound(nd, seed):
    n, d = nd
    rng = np.random.default_rng(seed)
    bank = VisualBank(1, n, d)
    max_norm = 0.0
    for f in _features(rng, 40, d) * rng.uniform(0.1, 10, size=(40, 1)).astype(np.float32):
        bank.insert_prompt(0, f)
        max_norm = max(max_norm, float(np.linalg.norm(f.astype(np.float64))))
        norms = np.linalg.norm(bank.slots[0, :bank.occupancy[0]].astype(np.float64), axis=1)
        assert norms.max() <= max_norm * (1 + 1e-6)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 4), dims, seeds)
def test_occupancy_never_decreases(C, nd, seed):
    n, d = nd
    rng = np.random.default_rng(seed)
    for policy in Policy:
        bank = VisualBank(C, n, d, policy)
        prev = bank.occupancy.copy()
        for c, f in zip(rng.integers(0, C, 30), _features(rng, 30, d)):
            bank.insert(c, f)
            assert np.all(bank.occupancy >= prev) and np.all(bank.occupancy <= n)
            prev = bank.occupancy.copy()
