"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The lines are collected and shown in the terminal summary, so they appear in
``pytest -v`` output without ``-s``. Criteria 4-6 run the full default
configuration over ten seeds.
"""
import itertools
import time
from dataclasses import replace

import numpy as np
import pytest
from scipy import stats

import test_properties
from conftest import ACCEPTANCE_LINES
from visbank import kernels
from visbank.bank import Policy
from visbank.checks import GRADCHECK_SHAPES, oracle_equivalence, run_gradchecks
from visbank.cli import _fill_bank, main
from visbank.config import default_config
from visbank.fusion import alignment_scores, softmax
from visbank.harness import pooled_se, pooled_std, run_openset_eval, run_policy_ablation, run_prompt_sweep
from visbank.io import bank_from_bytes, bank_to_bytes


def _report(number, title, ok, detail, elapsed, limit):
    within = elapsed < limit
    status = "PASS" if ok and within else "FAIL"
    ACCEPTANCE_LINES.append(
        f"[{status}] criterion {number}: {title}: {detail} ({elapsed:.1f}s, limit {limit:.0f}s)")
    print(ACCEPTANCE_LINES[-1])
    assert ok, detail
    assert within, f"took {elapsed:.1f}s, limit {limit}s"


def test_criterion_1_oracle_equivalence():
    start = time.perf_counter()
    results = {}
    previous = kernels.backend_name()
    try:
        for name in kernels.available_backends():
            kernels.use_backend(name)
            results[name] = oracle_equivalence(10_000, seed=2024)
    finally:
        kernels.use_backend(previous)
    elapsed = time.perf_counter() - start
    ok = all(r.ok and r.updates == 10_000 for r in results.values())
    detail = ", ".join(f"{k}: {r.updates} updates, {r.index_mismatches}/{r.value_mismatches}/"
                       f"{r.other_slot_changes} mismatches" for k, r in results.items())
    _report(1, "merge step equals scalar oracle", ok, detail, elapsed, 60)


PROPERTY_CHECKS = [
    test_properties.test_fill_phase_prefix,
    test_properties.test_single_slot_mutation_and_oracle,
    test_properties.test_scale_invariant_selection,
    test_properties.test_fifo_recency,
    test_properties.test_norm_bound,
    test_properties.test_occupancy_never_decreases,
]


def test_criterion_2_bank_invariants():
    start = time.perf_counter()
    failures = []
    previous = kernels.backend_name()
    try:
        for name in kernels.available_backends():
            kernels.use_backend(name)
            for check in PROPERTY_CHECKS:
                try:
                    check()
                except Exception as exc:  # noqa: BLE001
                    failures.append(f"{name}/{check.__name__}: {type(exc).__name__}")
    finally:
        kernels.use_backend(previous)
    elapsed = time.perf_counter() - start
    detail = (f"{len(PROPERTY_CHECKS)} properties x {len(kernels.available_backends())} backends"
              + (f", failed {failures}" if failures else ", all hold"))
    _report(2, "fill, mutation, scale and FIFO invariants", not failures, detail, elapsed, 30)


def test_criterion_3_gradient_check():
    start = time.perf_counter()
    results = run_gradchecks(eps=1e-5, n_coords=256, seeds=[11, 12, 13, 14, 15])
    elapsed = time.perf_counter() - start
    worst = max(err for _, err in results)
    ok = len(results) == len(GRADCHECK_SHAPES) == 5 and worst < 1e-4
    _report(3, "analytic vs central-difference gradient", ok,
            f"max relative error {worst:.2e} over {len(results)} shapes (< 1e-4)", elapsed, 60)


@pytest.mark.slow
def test_criterion_4_prompt_budget_sweep():
    cfg = default_config()
    start = time.perf_counter()
    report = run_prompt_sweep(cfg)
    elapsed = time.perf_counter() - start
    acc = {k: report.values(f"budget={k}") for k in (1, 5, 10, 20)}
    se = pooled_se(acc[5], acc[1])
    gap = acc[5].mean() - acc[1].mean()
    sd = pooled_std(acc[20], acc[5])
    ok = gap >= 2 * se and acc[20].mean() >= acc[5].mean() - sd
    means = " ".join(f"{k}:{v.mean():.3f}" for k, v in acc.items())
    detail = (f"means {means}; acc5-acc1 = {gap:.3f} = {gap / se:.1f} SE (>= 2); "
              f"acc20-acc5 = {acc[20].mean() - acc[5].mean():+.3f} (>= -{sd:.3f})")
    _report(4, "more prompts help then saturate", ok, detail, elapsed, 600)


@pytest.mark.slow
def test_criterion_5_policy_ablation():
    cfg = default_config()
    start = time.perf_counter()
    diff = run_policy_ablation(cfg).paired("averaging", "fifo")
    one = run_policy_ablation(replace(cfg, world=replace(cfg.world, views=1)))
    elapsed = time.perf_counter() - start
    d1 = one.paired("averaging", "fifo")
    half = stats.t.ppf(0.975, len(d1) - 1) * d1.std(ddof=1) / np.sqrt(len(d1))
    lo, hi = d1.mean() - half, d1.mean() + half
    positive = int(np.sum(diff > 0))
    ok = diff.mean() >= 0.03 and positive >= 8 and lo <= 0.0 <= hi
    detail = (f"mean diff {diff.mean():+.3f} (>= 0.03), positive in {positive}/10 (>= 8); "
              f"V=1 95% CI [{lo:+.4f}, {hi:+.4f}] contains 0")
    _report(5, "averaging beats FIFO under view drift", ok, detail, elapsed, 600)


@pytest.mark.slow
def test_criterion_6_openset():
    cfg = default_config()
    assert cfg.openset.prompts_per_category == 5
    start = time.perf_counter()
    report = run_openset_eval(cfg)
    elapsed = time.perf_counter() - start
    chance = report.extra["chance"]
    unseen = report.values("unseen")
    alone, joint = report.values("seen_alone"), report.values("seen_with_unseen")
    shift = abs(joint.mean() - alone.mean())
    sd = pooled_std(alone, joint)
    ok = unseen.mean() >= 5 * chance and shift <= sd
    detail = (f"unseen acc {unseen.mean():.3f} vs 5x chance {5 * chance:.3f}; "
              f"seen shift {shift:.4f} (<= pooled std {sd:.4f})")
    _report(6, "unseen categories by insertion only", ok, detail, elapsed, 300)


def _contracts(F_r, F_V, tau, rng):
    scores = alignment_scores(F_r, F_V, tau)
    if np.abs(scores.sum(axis=1) - 1.0).max() > 1e-6:
        return "row sum"
    logits = F_r @ F_V.T / tau
    shift = rng.uniform(-50, 50, size=(len(F_r), 1))
    if np.abs(softmax(logits + shift) - scores).max() > 1e-9:
        return "shift"
    perm = rng.permutation(len(F_V))
    if np.abs(alignment_scores(F_r, F_V[perm], tau) - scores[:, perm]).max() > 1e-12:
        return "permutation"
    return None


def test_criterion_7_softmax_contracts():
    start = time.perf_counter()
    rng = np.random.default_rng(7)
    failures = []
    grid = [np.array(v, dtype=np.float64) for v in itertools.product((-1.0, 0.0, 1.0), repeat=2)]
    small = 0
    for k in (1, 2, 3):
        for rows in itertools.product(grid, repeat=k):
            F_V = np.stack(rows)
            bad = _contracts(np.stack(grid), F_V, 1.0, rng)
            small += 1
            if bad:
                failures.append(("small", bad))
    for _ in range(1000):
        n_q, C, D = rng.integers(1, 9), rng.integers(1, 12), rng.integers(1, 17)
        scale = 10.0 ** rng.uniform(-2, 1.5)
        F_r = rng.standard_normal((n_q, D)) * scale
        F_V = rng.standard_normal((C, D)) * scale
        bad = _contracts(F_r, F_V, float(10.0 ** rng.uniform(-1, 1)), rng)
        if bad:
            failures.append(("random", bad))
    elapsed = time.perf_counter() - start
    detail = f"{small} exhaustive + 1000 random cases, {len(failures)} violations"
    _report(7, "row sums, shift invariance, prototype permutation", not failures, detail, elapsed, 10)


def test_criterion_8_serialization_and_determinism(tmp_path):
    start = time.perf_counter()
    cfg = default_config()
    round_trips = []
    for policy in Policy:
        bank = _fill_bank(cfg, 0, policy.name.lower())
        blob = bank_to_bytes(bank)
        back = bank_from_bytes(blob)
        round_trips.append(bank.state_equal(back) and bank_to_bytes(back) == blob)
    codes = [main(["ablate", "--seed", "0", "--out", str(tmp_path / name)]) for name in ("a", "b")]
    first = (tmp_path / "a" / "report.csv").read_bytes()
    second = (tmp_path / "b" / "report.csv").read_bytes()
    elapsed = time.perf_counter() - start
    ok = all(round_trips) and codes == [0, 0] and first == second
    detail = (f"bank round-trip {'bitwise' if all(round_trips) else 'DIFFERS'} for both policies; "
              f"ablate CSV {'byte-identical' if first == second else 'DIFFERS'} across runs")
    _report(8, "bank files and ablate output are reproducible", ok, detail, elapsed, 30)
