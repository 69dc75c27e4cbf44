"""Training of the prototype MLP with softmax cross-entropy.

Gradients are derived by hand through the alignment head and the MLP. The
bank and the proposal features receive no gradient.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bank import Policy, VisualBank
from .errors import InvalidTarget, NonFiniteInput
from .fusion import MlpParams, alignment_scores, mlp_forward
from .synth import RNG_INIT, RNG_TRAIN, World, make_episode, rng_for


@dataclass
class LossReport:
    mean_ce: float
    correct_fraction: float
    n_terms: int


@dataclass
class Batch:
    """One scoring problem: bank means (k, d), proposals (n_q, D), target columns."""

    means: np.ndarray
    proposals: np.ndarray
    targets: np.ndarray
    temperature: float = 1.0

    def astype(self, dtype) -> "Batch":
        return Batch(self.means.astype(dtype), self.proposals.astype(dtype),
                     self.targets, self.temperature)


def cross_entropy(scores, targets) -> LossReport:
    R = np.asarray(scores, dtype=np.float64)
    t = np.asarray(targets, dtype=np.int64)
    if R.ndim != 2 or t.shape != (R.shape[0],) or R.shape[0] == 0:
        raise InvalidTarget(f"need one target per row, got {t.shape} for scores {R.shape}")
    if t.min() < 0 or t.max() >= R.shape[1]:
        raise InvalidTarget(f"target ids must be in [0, {R.shape[1]})")
    picked = R[np.arange(len(t)), t]
    with np.errstate(divide="ignore"):
        ce = -np.log(picked)
    hits = np.argmax(R, axis=1) == t
    return LossReport(float(ce.mean()), float(hits.mean()), int(len(t)))


def _forward(params: MlpParams, batch: Batch):
    pre = batch.means @ params.W1.T + params.b1
    act = np.maximum(pre, 0)
    protos = act @ params.W2.T + params.b2
    scores = alignment_scores(batch.proposals, protos, batch.temperature)
    return pre, act, protos, scores


def loss_value(params: MlpParams, batch: Batch) -> float:
    protos = mlp_forward(params, batch.means)
    return cross_entropy(alignment_scores(batch.proposals, protos, batch.temperature),
                         batch.targets).mean_ce


def loss_and_grad(params: MlpParams, batch: Batch) -> tuple[LossReport, MlpParams]:
    pre, act, _, scores = _forward(params, batch)
    report = cross_entropy(scores, batch.targets)
    n_q = scores.shape[0]
    # d(mean CE)/d(logits) = (softmax - onehot) / n_q; logits = F_r @ P^T / tau
    dz = scores.copy()
    dz[np.arange(n_q), batch.targets] -= 1.0
    dz /= n_q * batch.temperature
    dz = dz.astype(params.dtype)
    d_protos = dz.T @ batch.proposals
    dW2 = d_protos.T @ act
    db2 = d_protos.sum(axis=0)
    d_pre = (d_protos @ params.W2) * (pre > 0)
    dW1 = d_pre.T @ batch.means
    db1 = d_pre.sum(axis=0)
    return report, MlpParams(dW1, db1, dW2, db2)


def backward(params: MlpParams, batch: Batch) -> MlpParams:
    return loss_and_grad(params, batch)[1]


def finite_difference_check(params: MlpParams, batch: Batch, eps: float = 1e-5,
                            n_coords: int = 256, rng=0, grads: MlpParams | None = None,
                            zero_tol: float = 1e-8) -> float:
    """Max relative gap between analytic and central-difference gradients.

    Runs in float64 on a random subset of ``n_coords`` coordinates (all of
    them if there are fewer). The relative gap is
    ``|analytic - numeric| / max(1e-12, |numeric|)``.

    Some gradients are identically zero: ``b2``, and ``b1`` entries of hidden
    units active for every category, shift all prototypes by the same vector,
    which leaves each proposal's softmax unchanged. When both values are below
    ``zero_tol`` the coordinate is accepted as an exact zero rather than scored
    on rounding noise. Pass ``grads`` to check a supplied gradient instead of
    ``backward``'s.
    """
    if not 1e-7 <= eps <= 1e-3:
        raise ValueError("eps must lie in [1e-7, 1e-3]")
    p64 = params.astype(np.float64)
    b64 = batch.astype(np.float64)
    g = backward(p64, b64) if grads is None else grads.astype(np.float64)
    coords = [(name, i) for name, arr in p64.arrays().items() for i in range(arr.size)]
    gen = np.random.default_rng(rng)
    if len(coords) > n_coords:
        pick = gen.choice(len(coords), size=n_coords, replace=False)
        coords = [coords[i] for i in sorted(pick)]
    worst = 0.0
    for name, i in coords:
        arr = getattr(p64, name).reshape(-1)
        orig = arr[i]
        arr[i] = orig + eps
        up = loss_value(p64, b64)
        arr[i] = orig - eps
        down = loss_value(p64, b64)
        arr[i] = orig
        numeric = (up - down) / (2 * eps)
        analytic = getattr(g, name).reshape(-1)[i]
        if max(abs(analytic), abs(numeric)) < zero_tol:
            continue
        worst = max(worst, abs(analytic - numeric) / max(1e-12, abs(numeric)))
    return worst


@dataclass
class OptimState:
    learning_rate: float
    weight_decay: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    m: MlpParams | None = None
    v: MlpParams | None = None
    step: int = 0


def optimizer_step(params: MlpParams, grads: MlpParams,
                   state: OptimState) -> tuple[MlpParams, OptimState]:
    """One AdamW step (decoupled weight decay, bias-corrected moments).

    Returns new params and state; the inputs are not modified.
    """
    if not grads.is_finite():
        raise NonFiniteInput("non-finite gradient")
    m = state.m if state.m is not None else params.zeros_like()
    v = state.v if state.v is not None else params.zeros_like()
    t = state.step + 1
    lr, wd = state.learning_rate, state.weight_decay
    c1 = 1.0 - state.beta1 ** t
    c2 = 1.0 - state.beta2 ** t
    new_p, new_m, new_v = {}, {}, {}
    for name, p in params.arrays().items():
        g = getattr(grads, name)
        m_t = state.beta1 * getattr(m, name) + (1.0 - state.beta1) * g
        v_t = state.beta2 * getattr(v, name) + (1.0 - state.beta2) * g * g
        update = (m_t / c1) / (np.sqrt(v_t / c2) + state.eps)
        new_p[name] = (p * (1.0 - lr * wd) - lr * update).astype(p.dtype)
        new_m[name] = m_t.astype(p.dtype)
        new_v[name] = v_t.astype(p.dtype)
    new_state = OptimState(lr, wd, state.beta1, state.beta2, state.eps,
                           MlpParams(**new_m), MlpParams(**new_v), t)
    return MlpParams(**new_p), new_state


@dataclass
class TrainConfig:
    epochs: int = 50
    episodes_per_epoch: int = 40
    categories_per_episode: int = 5
    proposals_per_episode: int = 12
    learning_rate: float = 1e-3
    weight_decay: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    temperature: float = 1.0
    hidden: int | None = None
    slots: int = 5
    policy: str = "averaging"


@dataclass
class TrainResult:
    params: MlpParams
    bank: VisualBank
    curve: list[LossReport] = field(default_factory=list)
    category_ids: list[int] = field(default_factory=list)


def train_loop(world: World, config: TrainConfig, seed: int = 0,
               categories=None) -> TrainResult:
    """Stream episodes through the bank and fit the MLP, one episode per step.

    ``categories`` restricts training to a subset of world categories (open-set
    runs); bank row ``i`` then holds world category ``categories[i]``.
    """
    cats = list(range(world.num_categories)) if categories is None else [int(c) for c in categories]
    row_of = {c: i for i, c in enumerate(cats)}
    bank = VisualBank(len(cats), config.slots, world.spec.prompt_dim, Policy.parse(config.policy))
    params = MlpParams.init(world.spec.prompt_dim, world.spec.region_dim, config.hidden,
                            rng=rng_for(seed, RNG_INIT))
    state = OptimState(config.learning_rate, config.weight_decay, config.beta1,
                       config.beta2, config.adam_eps)
    rng = rng_for(seed, RNG_TRAIN)
    curve = []
    for _ in range(config.epochs):
        ce_sum, hit_sum, terms = 0.0, 0.0, 0
        for _ in range(config.episodes_per_epoch):
            ep = make_episode(world, rng, config.categories_per_episode,
                              config.proposals_per_episode, cats)
            bank.insert_many([row_of[c] for c in ep.prompt_categories], ep.prompt_features)
            active = bank.nonempty_categories()
            col = {c: j for j, c in enumerate(active)}
            targets = np.array([col[row_of[c]] for c in ep.labels], dtype=np.int64)
            batch = Batch(bank.prototype_matrix(active), ep.proposals, targets, config.temperature)
            report, grads = loss_and_grad(params, batch)
            params, state = optimizer_step(params, grads, state)
            ce_sum += report.mean_ce * report.n_terms
            hit_sum += report.correct_fraction * report.n_terms
            terms += report.n_terms
        curve.append(LossReport(ce_sum / terms, hit_sum / terms, terms))
    return TrainResult(params, bank, curve, cats)
