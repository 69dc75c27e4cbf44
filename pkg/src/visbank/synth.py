"""Synthetic stand-in for the frozen image/prompt encoders.

Every category owns ``V`` unit "view" vectors in prompt space (d dims). A
prompt feature is a view plus isotropic noise; a proposal feature is the same
view pushed through a hidden linear map ``A`` (D x d) plus noise. The MLP in
``fusion`` therefore has a concrete target: approximate ``A`` on bank means.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidDimension, SeparationUnsatisfiable

# purpose tags for per-seed generator streams; keeps paired runs aligned
RNG_WORLD = 0
RNG_TRAIN = 1
RNG_INIT = 2
RNG_EVAL = 3
RNG_STREAM = 4
RNG_OPENSET = 5


def rng_for(seed: int, purpose: int, *extra: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(purpose), *map(int, extra)])


class StreamPolicy(str, enum.Enum):
    SHUFFLED = "shuffled"
    CYCLIC_VIEWS = "cyclic_views"


@dataclass(frozen=True)
class WorldSpec:
    num_categories: int = 40
    views: int = 3
    prompt_dim: int = 32
    region_dim: int = 32
    sigma_p: float = 0.03
    sigma_r: float = 0.05
    view_spread: float = 1.5
    separation_cap: float = 0.6
    hidden_map: str = "gaussian"
    seed: int = 0

    def validate(self) -> None:
        for name in ("num_categories", "views", "prompt_dim", "region_dim"):
            if getattr(self, name) < 1:
                raise InvalidDimension(f"{name} must be >= 1")
        if self.sigma_p < 0 or self.sigma_r < 0 or self.view_spread < 0:
            raise ValueError("noise scales and view_spread must be non-negative")
        if not 0 < self.separation_cap <= 1:
            raise ValueError("separation_cap must lie in (0, 1]")
        if self.hidden_map not in ("gaussian", "identity"):
            raise ValueError(f"unknown hidden_map {self.hidden_map!r}")
        if self.hidden_map == "identity" and self.prompt_dim != self.region_dim:
            raise InvalidDimension("identity hidden map needs prompt_dim == region_dim")


@dataclass
class World:
    spec: WorldSpec
    prototypes: np.ndarray  # (C, V, d), unit rows, float64
    hidden_map: np.ndarray  # (D, d)

    @property
    def num_categories(self) -> int:
        return self.prototypes.shape[0]

    @property
    def views(self) -> int:
        return self.prototypes.shape[1]


@dataclass
class Episode:
    """One synthetic target image."""

    prompt_categories: np.ndarray  # (k,) int64
    prompt_features: np.ndarray  # (k, d) float32
    proposals: np.ndarray  # (n_q, D) float32
    labels: np.ndarray  # (n_q,) int64, world category ids
    boxes: np.ndarray = field(default_factory=lambda: np.zeros((0, 4)))  # (n_q, 4), inert

    @property
    def region_labels(self) -> list[tuple[float, float, float, float, int]]:
        return [(*map(float, b), int(c)) for b, c in zip(self.boxes, self.labels)]


def _unit(x: np.ndarray) -> np.ndarray:
    return x / np.linalg.norm(x, axis=-1, keepdims=True)


def generate_world(spec: WorldSpec, max_tries: int = 2000) -> World:
    """Draw view prototypes and the hidden map.

    Views of a category are perturbations of a shared centre, so they are
    correlated within a category. Categories are rejection-sampled until every
    cross-category pair of views has |cosine| <= ``separation_cap``.
    """
    spec.validate()
    rng = rng_for(spec.seed, RNG_WORLD)
    C, V, d, D = spec.num_categories, spec.views, spec.prompt_dim, spec.region_dim
    protos = np.zeros((C, V, d))
    for c in range(C):
        for _ in range(max_tries):
            centre = _unit(rng.standard_normal(d))
            jitter = rng.standard_normal((V, d)) / np.sqrt(d)
            cand = _unit(centre + spec.view_spread * jitter)
            if c == 0:
                break
            cross = np.abs(cand @ protos[:c].reshape(-1, d).T)
            if cross.max() <= spec.separation_cap:
                break
        else:
            raise SeparationUnsatisfiable(
                f"could not place category {c} with separation cap {spec.separation_cap} "
                f"in {d} dims after {max_tries} tries")
        protos[c] = cand
    if spec.hidden_map == "identity":
        A = np.eye(D, d)
    else:
        A = rng.standard_normal((D, d)) / np.sqrt(d)
    return World(spec, protos, A)


def sample_prompt_feature(world: World, category: int, view: int,
                          rng: np.random.Generator) -> np.ndarray:
    z = world.prototypes[category, view]
    noise = rng.standard_normal(z.shape) * world.spec.sigma_p
    return (z + noise).astype(np.float32)


def sample_prompt_features(world: World, categories, views,
                           rng: np.random.Generator) -> np.ndarray:
    z = world.prototypes[np.asarray(categories), np.asarray(views)]
    return (z + rng.standard_normal(z.shape) * world.spec.sigma_p).astype(np.float32)


def _boxes(count: int, rng: np.random.Generator) -> np.ndarray:
    xy = rng.uniform(0.0, 0.8, size=(count, 2))
    wh = rng.uniform(0.05, 0.2, size=(count, 2))
    return np.concatenate([xy, xy + wh], axis=1)


def sample_proposals(world: World, categories, views,
                     rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Region features ``A z + noise`` for each (category, view) pair.

    Returns ``(features, labels, boxes)``; boxes are metadata only.
    """
    cats = np.asarray(categories, dtype=np.int64)
    z = world.prototypes[cats, np.asarray(views)]
    feats = z @ world.hidden_map.T
    feats = feats + rng.standard_normal(feats.shape) * world.spec.sigma_r
    return feats.astype(np.float32), cats, _boxes(len(cats), rng)


def make_stream(world: World, policy: StreamPolicy | str, length: int,
                rng: np.random.Generator, run_length: int = 10,
                categories=None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Ordered prompt stream as ``(categories, views, features)``.

    ``shuffled`` draws (category, view) uniformly. ``cyclic_views`` visits
    categories round-robin while each category walks its views in blocks of
    ``run_length`` identical-view prompts (v0 x run, v1 x run, ...), so a
    recency-based bank forgets early views.
    """
    if length < 1:
        raise ValueError("stream length must be >= 1")
    policy = StreamPolicy(policy)
    cats_allowed = np.arange(world.num_categories) if categories is None else np.asarray(categories)
    V = world.views
    if policy is StreamPolicy.SHUFFLED:
        cats = cats_allowed[rng.integers(0, len(cats_allowed), size=length)]
        views = rng.integers(0, V, size=length)
    else:
        t = np.arange(length)
        cats = cats_allowed[t % len(cats_allowed)]
        per_cat = t // len(cats_allowed)
        views = (per_cat // run_length) % V
    feats = sample_prompt_features(world, cats, views, rng)
    return cats.astype(np.int64), views.astype(np.int64), feats


def per_category_stream(world: World, count: int, rng: np.random.Generator,
                        categories=None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``count`` shuffled-view prompts for every category, category-major order
    interleaved so that item ``j`` of every category precedes item ``j + 1``.

    Taking the first ``k * C`` items yields exactly ``k`` prompts per category,
    which is how budget sweeps share one draw across budgets.
    """
    cats_allowed = np.arange(world.num_categories) if categories is None else np.asarray(categories)
    cats = np.tile(cats_allowed, count)
    views = rng.integers(0, world.views, size=len(cats))
    feats = sample_prompt_features(world, cats, views, rng)
    return cats.astype(np.int64), views.astype(np.int64), feats


def make_episode(world: World, rng: np.random.Generator, categories_per_episode: int,
                 proposals_per_episode: int, categories=None) -> Episode:
    """Training episode: one prompt per present category, proposals drawn from them."""
    pool = np.arange(world.num_categories) if categories is None else np.asarray(categories)
    k = min(categories_per_episode, len(pool))
    present = rng.choice(pool, size=k, replace=False)
    prompt_views = rng.integers(0, world.views, size=k)
    prompt_feats = sample_prompt_features(world, present, prompt_views, rng)
    gt = present[rng.integers(0, k, size=proposals_per_episode)]
    gt_views = rng.integers(0, world.views, size=proposals_per_episode)
    feats, labels, boxes = sample_proposals(world, gt, gt_views, rng)
    return Episode(present.astype(np.int64), prompt_feats, feats, labels, boxes)


def balanced_proposals(world: World, per_view: int, rng: np.random.Generator,
                       categories=None) -> Episode:
    """Evaluation set with ``per_view`` proposals for every (category, view)."""
    pool = np.arange(world.num_categories) if categories is None else np.asarray(categories)
    cats = np.repeat(pool, world.views * per_view)
    views = np.tile(np.repeat(np.arange(world.views), per_view), len(pool))
    feats, labels, boxes = sample_proposals(world, cats, views, rng)
    empty = np.zeros((0, world.spec.prompt_dim), dtype=np.float32)
    return Episode(np.zeros(0, dtype=np.int64), empty, feats, labels, boxes)
