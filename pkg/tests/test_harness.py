import csv
import io
import json
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from visbank.bank import VisualBank
from visbank.config import config_from_dict, default_config, load_config
from visbank.errors import ConfigError, EmptyCategory
from visbank.fusion import MlpParams
from visbank.harness import (
    CSV_HEADER,
    evaluate,
    pooled_se,
    pooled_std,
    run_openset_eval,
    run_policy_ablation,
    run_prompt_sweep,
)
from visbank.synth import Episode

SMALL = {
    "seeds": [0, 1],
    "world": {"num_categories": 8, "views": 2, "prompt_dim": 8, "region_dim": 8},
    "train": {"epochs": 3, "episodes_per_epoch": 5, "categories_per_episode": 3,
              "proposals_per_episode": 6},
    "eval": {"proposals_per_view": 3},
    "sweep": {"budgets": [1, 2]},
    "ablation": {"run_length": 2},
    "openset": {"unseen_categories": 2, "prompts_per_category": 2},
}


@pytest.fixture(scope="module")
def cfg():
    return config_from_dict(SMALL)


def test_evaluate_confusion():
    eye = np.eye(2)
    params = MlpParams(eye, np.zeros(2), eye, np.zeros(2))
    bank = VisualBank(2, 1, 2)
    bank.insert(0, [1.0, 0.0])
    bank.insert(1, [0.0, 1.0])
    ep = Episode(np.zeros(0), np.zeros((0, 2)),
                 np.array([[2.0, 0.0], [0.0, 2.0], [2.0, 0.1]]), np.array([0, 1, 1]))
    m = evaluate(bank, params, ep)
    assert m.accuracy == pytest.approx(2 / 3)
    assert m.confusion.tolist() == [[1, 0], [1, 1]]
    assert m.per_class_accuracy == pytest.approx(0.75)


def test_pooled_stats():
    a, b = np.array([1.0, 2.0, 3.0]), np.array([2.0, 4.0, 6.0])
    assert pooled_std(a, b) == pytest.approx(np.sqrt((1.0 + 4.0) / 2))
    assert pooled_se(a, b) == pytest.approx(np.sqrt(1 / 3 + 4 / 3))


def test_sweep_report(cfg, tmp_path):
    report = run_prompt_sweep(cfg)
    assert report.settings() == ["budget=1", "budget=2"]
    assert len(report.rows) == 4
    text = report.to_csv()
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == CSV_HEADER and len(rows) == 5
    report.write(tmp_path, cfg)
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["config_hash"] == cfg.config_hash()
    assert (tmp_path / "report.csv").read_text() == text


def test_sweep_rejects_unsorted(cfg):
    bad = replace(cfg, sweep=replace(cfg.sweep, budgets=[2, 1]))
    with pytest.raises(ValueError):
        run_prompt_sweep(bad)


def test_ablation_pairing(cfg):
    report = run_policy_ablation(cfg)
    assert report.settings() == ["averaging", "fifo"]
    by_seed = {}
    for row in report.rows:
        by_seed.setdefault(row.seed, set()).add(row.audit)
    assert all(len(v) == 1 for v in by_seed.values())
    diff = report.extra["paired_difference"]
    assert len(diff["values"]) == 2
    np.testing.assert_allclose(diff["values"], report.paired("averaging", "fifo"))


def test_ablation_deterministic_and_parallel(cfg):
    a = run_policy_ablation(cfg).to_csv()
    assert run_policy_ablation(cfg).to_csv() == a
    assert run_policy_ablation(cfg, workers=2).to_csv() == a


def test_single_view_ablation_has_no_gap(cfg):
    one = replace(cfg, world=replace(cfg.world, views=1, sigma_p=0.0))
    diff = run_policy_ablation(one).paired("averaging", "fifo")
    assert np.all(diff == 0.0)


def test_openset(cfg):
    report = run_openset_eval(cfg)
    assert report.settings() == ["unseen", "seen_alone", "seen_with_unseen"]
    assert report.extra["chance"] == pytest.approx(1 / 8)


def test_openset_without_prompts(cfg):
    zero = replace(cfg, openset=replace(cfg.openset, prompts_per_category=0))
    with pytest.raises(EmptyCategory):
        run_openset_eval(zero)


def test_aggregates_single_seed(cfg):
    report = run_prompt_sweep(cfg.with_seeds([3]))
    agg = report.aggregates()["budget=1"]
    assert agg["n"] == 1 and agg["accuracy_std"] == 0.0


class TestConfig:
    def test_default_file_matches(self):
        path = Path(__file__).resolve().parents[1] / "configs" / "default.json"
        assert load_config(path).to_dict() == default_config().to_dict()

    def test_hash_stable(self):
        assert default_config().config_hash() == default_config().config_hash()
        assert config_from_dict({"seeds": [1]}).config_hash() != default_config().config_hash()

    @pytest.mark.parametrize("doc,path", [
        ({"wrld": {}}, "wrld"),
        ({"world": {"sigma_p": -1}}, "world.sigma_p"),
        ({"train": {"epochs": "many"}}, "train.epochs"),
        ({"train": {"lr": 1}}, "train.lr"),
        ({"sweep": {"budgets": [5, 1]}}, "sweep.budgets"),
        ({"openset": {"unseen_categories": 40}}, "openset.unseen_categories"),
    ])
    def test_rejects(self, doc, path):
        with pytest.raises(ConfigError) as exc:
            config_from_dict(doc)
        assert exc.value.path == path

    def test_bad_json(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text("{nope")
        with pytest.raises(ConfigError):
            load_config(p)
