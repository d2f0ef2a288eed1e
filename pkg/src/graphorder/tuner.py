"""Sampling-probability tuning for scorer training.

The training-set sampler draws window sets from a per-vertex probability
vector.  A small policy network reads that vector and emits an independent
increase/decrease bit per vertex (1 = decrease); the chosen bits shift each
probability by a fixed tuning rate before the vector is re-projected onto
the floored simplex.  The policy is trained with REINFORCE against rewards
equal to the negated evaluation RMSE of the scorer, using a moving-average
baseline, while the scorer itself keeps training on batches drawn from the
evolving distribution.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import expit

from .graph import Graph
from .locality import SimilarityLike, as_similarity
from .optim import AdamState, RmspropState
from .scorer import (ScorerConfig, SetScorer, TrainingExample, init_scorer,
                     rmse, sample_training_batch, soft_label, train_step)

__all__ = [
    "EPS_FLOOR_SCALE",
    "default_floor",
    "check_prob",
    "initial_prob",
    "TuningPolicy",
    "init_policy",
    "policy_forward",
    "sample_action",
    "apply_action",
    "log_prob",
    "log_prob_grad",
    "RewardBaseline",
    "TrajectoryStep",
    "RlConfig",
    "RlHistory",
    "grow_best_neighbor",
    "build_eval_set",
    "reward_from_eval",
    "discounted_returns",
    "reinforce_update",
    "train_scorer_rl",
    "save_policy",
    "load_policy",
]

EPS_FLOOR_SCALE = 1e-6

POLICY_PARAMS = ("W1", "b1", "W2", "b2")


def default_floor(n: int) -> float:
    """Smallest probability any vertex may keep."""
    return EPS_FLOOR_SCALE / n


def check_prob(p: np.ndarray, floor: float | None = None) -> None:
    """Assert the sampling-distribution invariants: floored and normalized."""
    floor = default_floor(p.size) if floor is None else floor
    if abs(float(p.sum()) - 1.0) > 1e-9:
        raise ValueError(f"probabilities sum to {p.sum()!r}, not 1")
    if float(p.min()) < floor:
        raise ValueError(f"probability {p.min()!r} below floor {floor!r}")


def _project_to_floor(raw: np.ndarray, floor: float) -> np.ndarray:
    """Clamp at the floor, then rescale the above-floor mass so the vector
    sums to one while every entry stays at or above the floor."""
    clamped = np.maximum(raw, floor)
    excess = clamped - floor
    total = excess.sum()
    n = raw.size
    if total <= 0.0:
        return np.full(n, 1.0 / n)
    return floor + excess * ((1.0 - n * floor) / total)


def initial_prob(g: Graph, floor: float | None = None) -> np.ndarray:
    """Degree-proportional sampling distribution (uniform on edgeless graphs),
    floored and normalized."""
    if g.n < 1:
        raise ValueError("need at least one vertex")
    floor = default_floor(g.n) if floor is None else floor
    deg = g.total_degrees().astype(np.float64)
    total = deg.sum()
    raw = np.full(g.n, 1.0 / g.n) if total == 0 else deg / total
    return _project_to_floor(raw, floor)


class TuningPolicy:
    """Two-layer MLP mapping the sampling vector to per-vertex action
    probabilities (sigmoid outputs)."""

    def __init__(self, n: int, W1, b1, W2, b2, seed: int = -1):
        self.n = n
        self.W1, self.b1, self.W2, self.b2 = W1, b1, W2, b2
        self.seed = seed

    def params(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in POLICY_PARAMS}

    def copy(self) -> "TuningPolicy":
        return TuningPolicy(self.n, *(getattr(self, p).copy() for p in POLICY_PARAMS),
                            seed=self.seed)


def init_policy(n: int, hidden: int = 64, seed: int = 0) -> TuningPolicy:
    if n < 1 or hidden < 1:
        raise ValueError("sizes must be positive")
    rng = np.random.default_rng(seed)
    scale1 = np.sqrt(6.0 / (n + hidden))
    scale2 = np.sqrt(6.0 / (hidden + n))
    return TuningPolicy(
        n,
        rng.uniform(-scale1, scale1, size=(n, hidden)), np.zeros(hidden),
        rng.uniform(-scale2, scale2, size=(hidden, n)), np.zeros(n),
        seed=seed,
    )


def policy_forward(policy: TuningPolicy, state: np.ndarray) -> np.ndarray:
    """Per-vertex probability of the decrease action, strictly inside (0, 1)."""
    z1 = state @ policy.W1 + policy.b1
    h = np.maximum(z1, 0.0)
    return expit(h @ policy.W2 + policy.b2)


def sample_action(q: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Independent Bernoulli draw per vertex; 1 selects decrease."""
    return (rng.random(q.size) < q).astype(np.int64)


def apply_action(state: np.ndarray, action: np.ndarray, rate: float,
                 floor: float | None = None) -> np.ndarray:
    """Shift each probability by the tuning rate (up where the action bit is
    0, down where it is 1), then re-project onto the floored simplex."""
    if rate <= 0:
        raise ValueError("tuning rate must be positive")
    floor = default_floor(state.size) if floor is None else floor
    raw = state + np.where(action == 0, rate, -rate)
    return _project_to_floor(raw, floor)


def _policy_cache(policy: TuningPolicy, state: np.ndarray):
    z1 = state @ policy.W1 + policy.b1
    h = np.maximum(z1, 0.0)
    q = expit(h @ policy.W2 + policy.b2)
    return z1, h, q


def log_prob(policy: TuningPolicy, state: np.ndarray, action: np.ndarray) -> float:
    """Log-likelihood of an action vector under independent Bernoulli outputs."""
    q = np.clip(policy_forward(policy, state), 1e-12, 1.0 - 1e-12)
    return float((action * np.log(q) + (1 - action) * np.log(1.0 - q)).sum())


def log_prob_grad(policy: TuningPolicy, state: np.ndarray,
                  action: np.ndarray) -> tuple[float, dict[str, np.ndarray]]:
    """Log-likelihood and its gradient with respect to the policy parameters."""
    z1, h, q = _policy_cache(policy, state)
    qc = np.clip(q, 1e-12, 1.0 - 1e-12)
    logp = float((action * np.log(qc) + (1 - action) * np.log(1.0 - qc)).sum())
    d_z2 = action - q                 # d logp / d pre-sigmoid
    d_W2 = np.outer(h, d_z2)
    d_b2 = d_z2
    d_h = policy.W2 @ d_z2
    d_z1 = d_h * (z1 > 0)
    d_W1 = np.outer(state, d_z1)
    d_b1 = d_z1
    return logp, {"W1": d_W1, "b1": d_b1, "W2": d_W2, "b2": d_b2}


@dataclass
class RewardBaseline:
    """Exponential moving average of observed rewards (decay 0.9).

    Seeded by the first observation, so it always stays inside the range of
    rewards seen so far.
    """

    decay: float = 0.9
    value: float | None = None

    def update(self, reward: float) -> None:
        if self.value is None:
            self.value = float(reward)
        else:
            self.value = self.decay * self.value + (1.0 - self.decay) * float(reward)


@dataclass
class TrajectoryStep:
    """One tuning step: the state acted on, the sampled bits, the action
    probabilities used, and the reward observed after retraining."""

    state: np.ndarray
    action: np.ndarray
    action_prob: np.ndarray
    reward: float


@dataclass
class RlConfig:
    """Hyper-parameters of the tuning loop.

    ``tuning_scale`` is the per-entry shift expressed as a multiple of the
    uniform mass: the applied rate is ``tuning_scale / n``.  When
    ``don_steps_per_t`` is unset it is derived as
    ``global_steps // (rl_steps * trajectory_len)``.
    """

    trajectory_len: int = 5
    rl_steps: int = 50
    gamma: float = 0.95
    tuning_scale: float = 0.15
    policy_lr: float = 1e-3
    policy_hidden: int = 64
    eval_size: int = 2000
    global_steps: int = 5000
    don_steps_per_t: int | None = None
    warmup_steps: int = 50

    def resolved_steps_per_t(self) -> int:
        if self.don_steps_per_t is not None:
            return self.don_steps_per_t
        return max(1, self.global_steps // (self.rl_steps * self.trajectory_len))


def grow_best_neighbor(source: SimilarityLike, start: int, size: int) -> np.ndarray:
    """Grow a vertex set greedily from ``start``: each step adds the vertex
    with the largest summed similarity to the current set (ties to the
    smallest id)."""
    src = as_similarity(source)
    if size < 1 or size > src.n:
        raise ValueError("size out of range")
    members = [start]
    gains = np.zeros(src.n, dtype=np.int64)
    src.add_scores_of(gains, start, 1)
    chosen = np.zeros(src.n, dtype=bool)
    chosen[start] = True
    while len(members) < size:
        masked = np.where(chosen, np.int64(-1), gains)
        v = int(np.argmax(masked))
        members.append(v)
        chosen[v] = True
        src.add_scores_of(gains, v, 1)
    return np.array(members, dtype=np.int64)


def build_eval_set(g: Graph, w: int, size: int, seed: int, *,
                   source: SimilarityLike | None = None) -> list[TrainingExample]:
    """Fixed evaluation set: each example starts from a degree-sampled vertex,
    grows a window set of w-1 vertices by the best-neighbor rule, and is
    labeled with its extension distribution."""
    if size < 1:
        raise ValueError("evaluation set size must be positive")
    if w < 2 or w - 1 > g.n:
        raise ValueError("window size out of range")
    src = as_similarity(g) if source is None else as_similarity(source)
    prob = initial_prob(g)
    rng = np.random.default_rng(seed)
    cdf = np.cumsum(prob)
    examples = []
    for _ in range(size):
        start = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
        start = min(start, g.n - 1)
        members = grow_best_neighbor(src, start, w - 1)
        examples.append(TrainingExample(members, soft_label(src, members, g.n)))
    return examples


def reward_from_eval(model: SetScorer, eval_set: Sequence[TrainingExample]) -> float:
    """Negated evaluation RMSE: zero for a perfect model, negative otherwise."""
    return -rmse(model, eval_set)


def discounted_returns(rewards: Sequence[float], gamma: float) -> list[float]:
    """Suffix returns R_t = r_t + gamma * R_{t+1}, computed backward."""
    acc = 0.0
    out = [0.0] * len(rewards)
    for t in range(len(rewards) - 1, -1, -1):
        acc = float(rewards[t]) + gamma * acc
        out[t] = acc
    return out


def reinforce_update(policy: TuningPolicy, traj: Sequence[TrajectoryStep],
                     gamma: float, alpha: float, baseline: RewardBaseline,
                     opt: RmspropState) -> list[float]:
    """Policy-gradient ascent over one trajectory.

    Each step's advantage is its discounted suffix return minus the reward
    baseline as it stood before that step's reward was absorbed; gradients of
    the Bernoulli log-likelihood are summed over the trajectory.  Returns the
    per-step discounted returns.
    """
    if not traj:
        raise ValueError("empty trajectory")
    rewards = [step.reward for step in traj]
    returns = discounted_returns(rewards, gamma)
    total = {name: np.zeros_like(p) for name, p in policy.params().items()}
    for step, ret in zip(traj, returns):
        b = baseline.value if baseline.value is not None else step.reward
        advantage = ret - b
        _, grads = log_prob_grad(policy, step.state, step.action)
        for name in total:
            total[name] += advantage * grads[name]
        baseline.update(step.reward)
    for name, g in total.items():
        if not np.all(np.isfinite(g)):
            raise RuntimeError(f"non-finite policy gradient in {name}")
    opt.step(policy.params(), total, alpha, maximize=True)
    return returns


@dataclass
class RlHistory:
    """Everything a run logs: scorer losses, per-step tuning rows, the raw
    trajectories with their returns, and every state the run visited."""

    don_losses: list[tuple[int, float]] = field(default_factory=list)
    rl_rows: list[dict] = field(default_factory=list)
    trajectories: list[list[TrajectoryStep]] = field(default_factory=list)
    trajectory_returns: list[list[float]] = field(default_factory=list)
    states: list[np.ndarray] = field(default_factory=list)
    wall_time: float = 0.0

    @property
    def total_don_steps(self) -> int:
        return len(self.don_losses)


def train_scorer_rl(g: Graph, w: int, scorer_cfg: ScorerConfig, rl_cfg: RlConfig,
                    seed: int) -> tuple[SetScorer, TuningPolicy, RlHistory]:
    """Interleaved training of the scorer and the sampling tuner.

    The scorer first warms up on the degree-based distribution to seed the
    reward baseline.  Each tuning step then rolls a trajectory: sample an
    action, shift and re-project the distribution, train the scorer on
    batches drawn from it, and read the reward off the fixed evaluation set;
    the policy updates once per trajectory.
    """
    t0 = time.perf_counter()
    ss = np.random.SeedSequence(seed)
    s_init, s_policy, s_batch, s_action, s_eval = ss.spawn(5)
    src = as_similarity(g)
    floor = default_floor(g.n)
    rate = rl_cfg.tuning_scale / g.n
    steps_per_t = rl_cfg.resolved_steps_per_t()

    model = init_scorer(g.n, scorer_cfg.hidden_phi, scorer_cfg.repr_dim,
                        scorer_cfg.hidden_rho, seed=int(s_init.generate_state(1)[0]))
    policy = init_policy(g.n, rl_cfg.policy_hidden,
                         seed=int(s_policy.generate_state(1)[0]))
    adam = AdamState()
    rms = RmspropState()
    batch_rng = np.random.default_rng(s_batch)
    action_rng = np.random.default_rng(s_action)
    eval_set = build_eval_set(g, w, rl_cfg.eval_size,
                              int(s_eval.generate_state(1)[0]), source=src)
    baseline = RewardBaseline()
    history = RlHistory()

    prob = initial_prob(g, floor)
    history.states.append(prob.copy())
    don_step = 0

    def one_scorer_step() -> None:
        nonlocal don_step
        batch = sample_training_batch(g, prob, w, scorer_cfg.batch_size,
                                      batch_rng, source=src)
        loss = train_step(model, batch, adam, scorer_cfg.learning_rate)
        don_step += 1
        history.don_losses.append((don_step, loss))

    eval_cadence = max(1, rl_cfg.warmup_steps // 5)
    for k in range(rl_cfg.warmup_steps):
        one_scorer_step()
        if (k + 1) % eval_cadence == 0 or k + 1 == rl_cfg.warmup_steps:
            baseline.update(reward_from_eval(model, eval_set))

    for rl_step in range(rl_cfg.rl_steps):
        traj: list[TrajectoryStep] = []
        for t in range(rl_cfg.trajectory_len):
            q = policy_forward(policy, prob)
            action = sample_action(q, action_rng)
            state_before = prob.copy()
            prob = apply_action(prob, action, rate, floor)
            history.states.append(prob.copy())
            for _ in range(steps_per_t):
                one_scorer_step()
            reward = reward_from_eval(model, eval_set)
            traj.append(TrajectoryStep(state_before, action, q, reward))
            history.rl_rows.append({
                "rl_step": rl_step,
                "t": t,
                "reward": reward,
                "baseline": baseline.value,
                "mean_action_prob": float(q.mean()),
            })
        returns = reinforce_update(policy, traj, rl_cfg.gamma, rl_cfg.policy_lr,
                                   baseline, rms)
        history.trajectories.append(traj)
        history.trajectory_returns.append(returns)

    history.wall_time = time.perf_counter() - t0
    return model, policy, history


POLICY_CHECKPOINT_VERSION = 1


def save_policy(policy: TuningPolicy, path: str) -> None:
    np.savez(path, kind="tuning_policy", format_version=POLICY_CHECKPOINT_VERSION,
             n=policy.n, seed=policy.seed, **policy.params())


def load_policy(path: str) -> TuningPolicy:
    with np.load(path) as data:
        if str(data["kind"]) != "tuning_policy":
            raise ValueError(f"not a tuning-policy checkpoint: {path}")
        if int(data["format_version"]) != POLICY_CHECKPOINT_VERSION:
            raise ValueError("unsupported checkpoint version")
        arrays = [data[name] for name in POLICY_PARAMS]
        return TuningPolicy(int(data["n"]), *arrays, seed=int(data["seed"]))
