"""Desk-scale experiments: prompt-budget sweep, update-policy ablation and
open-set insertion.

Each (setting, seed) cell is single-threaded because bank updates are order
dependent; seeds are independent and can be farmed out with ``workers > 1``.
Within a seed, paired settings share every random draw except the variable
under test, and each row carries an audit hash of the draws it consumed.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .bank import Policy, VisualBank
from .config import RunConfig
from .fusion import MlpParams, alignment_scores, project_prototypes
from .learner import cross_entropy, train_loop
from .synth import (
    RNG_EVAL,
    RNG_OPENSET,
    RNG_STREAM,
    Episode,
    balanced_proposals,
    generate_world,
    make_stream,
    per_category_stream,
    rng_for,
)

CSV_HEADER = ["setting", "seed", "accuracy", "per_class_acc", "mean_ce"]


@dataclass
class Metrics:
    accuracy: float
    per_class_accuracy: float
    mean_ce: float
    confusion: np.ndarray


def evaluate(bank: VisualBank, params: MlpParams, episodes: Sequence[Episode] | Episode,
             temperature: float = 1.0, row_of: dict[int, int] | None = None,
             num_classes: int | None = None) -> Metrics:
    """Score every proposal against every bank category.

    ``row_of`` maps world category ids in the episode labels to bank rows
    (identity when omitted). Confusion rows are ground truth, columns are
    predictions, both indexed by bank row.
    """
    if isinstance(episodes, Episode):
        episodes = [episodes]
    protos = project_prototypes(params, bank)
    feats = np.concatenate([ep.proposals for ep in episodes])
    labels = np.concatenate([ep.labels for ep in episodes])
    truth = labels if row_of is None else np.array([row_of[int(c)] for c in labels])
    scores = alignment_scores(feats, protos, temperature)
    pred = np.argmax(scores, axis=1)
    k = num_classes or bank.num_categories
    confusion = np.zeros((k, k), dtype=np.int64)
    np.add.at(confusion, (truth, pred), 1)
    present = confusion.sum(axis=1) > 0
    per_class = np.diag(confusion)[present] / confusion.sum(axis=1)[present]
    return Metrics(
        accuracy=float(np.mean(pred == truth)),
        per_class_accuracy=float(per_class.mean()),
        mean_ce=cross_entropy(scores, truth).mean_ce,
        confusion=confusion,
    )


@dataclass
class ReportRow:
    setting: str
    seed: int
    accuracy: float
    per_class_acc: float
    mean_ce: float
    audit: str = ""


@dataclass
class RunReport:
    experiment: str
    rows: list[ReportRow] = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def settings(self) -> list[str]:
        seen: list[str] = []
        for r in self.rows:
            if r.setting not in seen:
                seen.append(r.setting)
        return seen

    def values(self, setting: str, column: str = "accuracy") -> np.ndarray:
        return np.array([getattr(r, column) for r in self.rows if r.setting == setting])

    def paired(self, a: str, b: str, column: str = "accuracy") -> np.ndarray:
        """Per-seed ``a - b``, matched on seed."""
        left = {r.seed: getattr(r, column) for r in self.rows if r.setting == a}
        right = {r.seed: getattr(r, column) for r in self.rows if r.setting == b}
        return np.array([left[s] - right[s] for s in sorted(left) if s in right])

    def aggregates(self) -> dict[str, dict[str, float]]:
        out = {}
        for s in self.settings():
            agg = {}
            for col in ("accuracy", "per_class_acc", "mean_ce"):
                v = self.values(s, col)
                agg[f"{col}_mean"] = float(v.mean())
                agg[f"{col}_std"] = float(v.std(ddof=1)) if len(v) > 1 else 0.0
            agg["n"] = int(len(self.values(s)))
            out[s] = agg
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in self.rows:
            w.writerow([r.setting, r.seed, f"{r.accuracy:.8f}", f"{r.per_class_acc:.8f}",
                        f"{r.mean_ce:.8f}"])
        return buf.getvalue()

    def summary(self, config: RunConfig, seed_source: str = "config") -> dict:
        return {
            "experiment": self.experiment,
            "config_hash": config.config_hash(),
            "config": config.to_dict(),
            "seeds": sorted({r.seed for r in self.rows}),
            "seed_source": seed_source,
            "kernel_backend": kernels.backend_name(),
            "aggregates": self.aggregates(),
            "audit": {f"{r.setting}/{r.seed}": r.audit for r in self.rows},
            **self.extra,
        }

    def write(self, out_dir: str | Path, config: RunConfig, seed_source: str = "config") -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.csv").write_text(self.to_csv())
        (out / "summary.json").write_text(
            json.dumps(self.summary(config, seed_source), indent=2, sort_keys=True) + "\n")


def audit_hash(*arrays: np.ndarray) -> str:
    h = hashlib.sha256()
    for a in arrays:
        a = np.ascontiguousarray(a)
        h.update(str(a.dtype).encode() + str(a.shape).encode())
        h.update(a.tobytes())
    return h.hexdigest()[:16]


def _row(setting: str, seed: int, m: Metrics, audit: str) -> ReportRow:
    return ReportRow(setting, int(seed), m.accuracy, m.per_class_accuracy, m.mean_ce, audit)


def _map_seeds(fn: Callable[[RunConfig, int], list[ReportRow]], cfg: RunConfig,
               workers: int) -> list[ReportRow]:
    if workers > 1 and len(cfg.seeds) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(fn, [cfg] * len(cfg.seeds), cfg.seeds))
    else:
        chunks = [fn(cfg, s) for s in cfg.seeds]
    return [row for chunk in chunks for row in chunk]


def _sweep_seed(cfg: RunConfig, seed: int) -> list[ReportRow]:
    world = generate_world(cfg.world_for(seed))
    trained = train_loop(world, cfg.train, seed)
    test = balanced_proposals(world, cfg.eval.proposals_per_view, rng_for(seed, RNG_EVAL))
    budgets = cfg.sweep.budgets
    cats, _, feats = per_category_stream(world, max(budgets), rng_for(seed, RNG_STREAM))
    C = world.num_categories
    rows = []
    for k in budgets:
        bank = VisualBank(C, cfg.train.slots, world.spec.prompt_dim, Policy.AVERAGING)
        bank.insert_many(cats[:k * C], feats[:k * C])
        m = evaluate(bank, trained.params, test, cfg.train.temperature)
        rows.append(_row(f"budget={k}", seed, m, audit_hash(feats, test.proposals)))
    return rows


def run_prompt_sweep(cfg: RunConfig, workers: int = 1) -> RunReport:
    """Evaluate one trained MLP with banks rebuilt at each prompt budget.

    A budget of ``k`` means ``k`` prompts inserted per category into a fresh
    averaging bank of the configured capacity. All budgets of a seed read
    prefixes of one shared prompt draw.
    """
    if list(cfg.sweep.budgets) != sorted(cfg.sweep.budgets):
        raise ValueError("budgets must be sorted ascending")
    return RunReport("sweep", _map_seeds(_sweep_seed, cfg, workers))


def _ablation_seed(cfg: RunConfig, seed: int) -> list[ReportRow]:
    world = generate_world(cfg.world_for(seed))
    trained = train_loop(world, cfg.train, seed)
    test = balanced_proposals(world, cfg.eval.proposals_per_view, rng_for(seed, RNG_EVAL))
    a = cfg.ablation
    length = world.num_categories * world.views * a.run_length * a.cycles
    cats, _, feats = make_stream(world, a.stream_policy, length, rng_for(seed, RNG_STREAM),
                                 run_length=a.run_length)
    audit = audit_hash(cats, feats, test.proposals)
    rows = []
    for policy in (Policy.AVERAGING, Policy.FIFO):
        bank = VisualBank(world.num_categories, cfg.train.slots, world.spec.prompt_dim, policy)
        bank.insert_many(cats, feats)
        m = evaluate(bank, trained.params, test, cfg.train.temperature)
        rows.append(_row(policy.name.lower(), seed, m, audit))
    return rows


def run_policy_ablation(cfg: RunConfig, workers: int = 1) -> RunReport:
    """Feed one prompt stream to an averaging bank and a FIFO bank.

    Both banks are scored with the same trained MLP on the same proposals;
    ``extra["paired_difference"]`` holds per-seed averaging minus FIFO accuracy.
    """
    report = RunReport("ablate", _map_seeds(_ablation_seed, cfg, workers))
    diff = report.paired("averaging", "fifo")
    report.extra["paired_difference"] = {
        "values": [float(x) for x in diff],
        "mean": float(diff.mean()),
        "std": float(diff.std(ddof=1)) if len(diff) > 1 else 0.0,
        "positive": int(np.sum(diff > 0)),
    }
    return report


def _openset_seed(cfg: RunConfig, seed: int) -> list[ReportRow]:
    world = generate_world(cfg.world_for(seed))
    C, U = world.num_categories, cfg.openset.unseen_categories
    seen, unseen = list(range(C - U)), list(range(C - U, C))
    trained = train_loop(world, cfg.train, seed, categories=seen)
    k = cfg.openset.prompts_per_category
    rng = rng_for(seed, RNG_OPENSET)
    seen_test = balanced_proposals(world, cfg.eval.proposals_per_view, rng, seen)
    unseen_test = balanced_proposals(world, cfg.eval.proposals_per_view, rng, unseen)
    s_cats, _, s_feats = per_category_stream(world, k, rng, seen) if k else (None, None, None)
    u_cats, _, u_feats = per_category_stream(world, k, rng, unseen) if k else (None, None, None)

    bank = VisualBank(len(seen), cfg.train.slots, world.spec.prompt_dim, Policy.AVERAGING)
    if k:
        bank.insert_many(s_cats, s_feats)
    row_of = {c: i for i, c in enumerate(seen)}
    tau = cfg.train.temperature
    alone = evaluate(bank, trained.params, seen_test, tau, row_of)
    for c in unseen:
        row_of[c] = bank.add_category()
    if k:
        bank.insert_many([row_of[int(c)] for c in u_cats], u_feats)
    # raises EmptyCategory when k == 0: unseen rows have no prompts
    with_unseen = evaluate(bank, trained.params, seen_test, tau, row_of)
    unseen_m = evaluate(bank, trained.params, unseen_test, tau, row_of)
    audit = audit_hash(seen_test.proposals, unseen_test.proposals,
                       *(x for x in (s_feats, u_feats) if x is not None))
    return [
        _row("unseen", seed, unseen_m, audit),
        _row("seen_alone", seed, alone, audit),
        _row("seen_with_unseen", seed, with_unseen, audit),
    ]


def run_openset_eval(cfg: RunConfig, workers: int = 1) -> RunReport:
    """Train on the first ``C - U`` categories, then add the last ``U`` at test
    time via ``add_category`` and prompt insertion only, with no parameter
    updates. Unseen accuracy is measured against all ``C`` bank rows.
    """
    report = RunReport("openset", _map_seeds(_openset_seed, cfg, workers))
    report.extra["chance"] = 1.0 / cfg.world.num_categories
    return report


def pooled_std(a: np.ndarray, b: np.ndarray) -> float:
    return math.sqrt((np.var(a, ddof=1) + np.var(b, ddof=1)) / 2.0)


def pooled_se(a: np.ndarray, b: np.ndarray) -> float:
    """Standard error of ``mean(a) - mean(b)`` for independent samples."""
    return math.sqrt(np.var(a, ddof=1) / len(a) + np.var(b, ddof=1) / len(b))

