"""Run configuration: dataclasses, JSON schema and loader.

Config files are strict: unknown keys and out-of-range values are rejected
before any work starts, with the offending field path in the message.
"""
from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any

import jsonschema

from .errors import ConfigError
from .learner import TrainConfig
from .synth import WorldSpec

_POS_INT = {"type": "integer", "minimum": 1}
_NONNEG = {"type": "number", "minimum": 0}
_POS = {"type": "number", "exclusiveMinimum": 0}


def _obj(props: dict, required: tuple = ()) -> dict:
    return {"type": "object", "properties": props, "additionalProperties": False,
            "required": list(required)}


SCHEMA = _obj({
    "seeds": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1},
    "world": _obj({
        "num_categories": _POS_INT,
        "views": _POS_INT,
        "prompt_dim": _POS_INT,
        "region_dim": _POS_INT,
        "sigma_p": _NONNEG,
        "sigma_r": _NONNEG,
        "view_spread": _NONNEG,
        "separation_cap": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "hidden_map": {"enum": ["gaussian", "identity"]},
    }),
    "train": _obj({
        "epochs": {"type": "integer", "minimum": 0},
        "episodes_per_epoch": _POS_INT,
        "categories_per_episode": _POS_INT,
        "proposals_per_episode": _POS_INT,
        "learning_rate": _NONNEG,
        "weight_decay": _NONNEG,
        "beta1": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
        "beta2": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
        "adam_eps": _POS,
        "temperature": _POS,
        "hidden": {"anyOf": [_POS_INT, {"type": "null"}]},
        "slots": _POS_INT,
        "policy": {"enum": ["averaging", "fifo"]},
    }),
    "eval": _obj({
        "proposals_per_view": _POS_INT,
        "prompt_budget": _POS_INT,
    }),
    "sweep": _obj({
        "budgets": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1},
    }),
    "ablation": _obj({
        "stream_policy": {"enum": ["shuffled", "cyclic_views"]},
        "run_length": _POS_INT,
        "cycles": _POS_INT,
    }),
    "openset": _obj({
        "unseen_categories": _POS_INT,
        "prompts_per_category": {"type": "integer", "minimum": 0},
    }),
    "gradcheck": _obj({
        "eps": {"type": "number", "minimum": 1e-7, "maximum": 1e-3},
        "n_coords": _POS_INT,
    }),
})


@dataclass
class EvalConfig:
    proposals_per_view: int = 20
    prompt_budget: int = 5


@dataclass
class SweepConfig:
    budgets: list[int] = field(default_factory=lambda: [1, 5, 10, 20])


@dataclass
class AblationConfig:
    stream_policy: str = "cyclic_views"
    run_length: int = 10
    cycles: int = 1


@dataclass
class OpensetConfig:
    unseen_categories: int = 3
    prompts_per_category: int = 5


@dataclass
class GradcheckConfig:
    eps: float = 1e-5
    n_coords: int = 256


@dataclass
class RunConfig:
    seeds: list[int] = field(default_factory=lambda: list(range(10)))
    world: WorldSpec = field(default_factory=WorldSpec)
    train: TrainConfig = field(default_factory=TrainConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    ablation: AblationConfig = field(default_factory=AblationConfig)
    openset: OpensetConfig = field(default_factory=OpensetConfig)
    gradcheck: GradcheckConfig = field(default_factory=GradcheckConfig)

    def to_dict(self) -> dict[str, Any]:
        out = asdict(self)
        out["world"].pop("seed")  # per-run seeds come from ``seeds``
        return out

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def world_for(self, seed: int, **overrides) -> WorldSpec:
        return replace(self.world, seed=int(seed), **overrides)

    def with_seeds(self, seeds: list[int]) -> "RunConfig":
        return replace(self, seeds=list(seeds))


def default_config() -> RunConfig:
    return RunConfig()


def _path_of(err: jsonschema.ValidationError) -> str:
    parts = [str(p) for p in err.absolute_path]
    return ".".join(parts) if parts else "<root>"


def config_from_dict(doc: dict[str, Any]) -> RunConfig:
    """Validate ``doc`` against the schema and overlay it on the defaults."""
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        if err.validator == "additionalProperties":
            # the path of an unknown key is its parent; name the key itself
            extra = sorted(set(err.instance) - set(err.schema.get("properties", {})))
            base = _path_of(err)
            key = extra[0] if extra else "?"
            raise ConfigError(key if base == "<root>" else f"{base}.{key}", "unknown key")
        raise ConfigError(_path_of(err), err.message)
    base = default_config()
    sections = {
        "world": WorldSpec, "train": TrainConfig, "eval": EvalConfig, "sweep": SweepConfig,
        "ablation": AblationConfig, "openset": OpensetConfig, "gradcheck": GradcheckConfig,
    }
    kwargs: dict[str, Any] = {}
    for name in sections:
        current = getattr(base, name)
        kwargs[name] = replace(current, **copy.deepcopy(doc.get(name, {})))
    kwargs["seeds"] = list(doc.get("seeds", base.seeds))
    cfg = RunConfig(**kwargs)
    try:
        cfg.world.validate()
    except ValueError as exc:
        raise ConfigError("world", str(exc)) from None
    if cfg.sweep.budgets != sorted(cfg.sweep.budgets):
        raise ConfigError("sweep.budgets", "must be sorted ascending")
    if cfg.openset.unseen_categories >= cfg.world.num_categories:
        raise ConfigError("openset.unseen_categories", "must leave at least one seen category")
    return cfg


def load_config(path: str | Path) -> RunConfig:
    p = Path(path)
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError("<root>", f"invalid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    return config_from_dict(doc)
