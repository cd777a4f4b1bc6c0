"""Off-policy training loop: prioritized replay, EMA targets, losses, refinement.

The loop alternates policy evaluation and policy improvement. Evaluation
trains the critic (exactly, or by TD with an exponentially averaged target
copy) against one-step backup targets drawn from a prioritized replay buffer;
improvement asks the critic to critique sampled actions, refines them until
the critique stops improving, and distills the refined actions back into the
policy with a log-likelihood loss. On finite MDPs with an exact critic and an
exhaustive refinement budget this reduces to classical policy iteration and
therefore reaches the optimal policy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .descriptions import (
    Critique,
    DescriptionDistribution,
    SuccessorCritic,
    kl_divergence,
    scalarize,
)
from .mdp import (
    MdpValidationError,
    TabularMdp,
    TabularPolicy,
    as_rng,
    policy_return,
    sample_transition,
)

# -log of the smallest positive double; stands in for -log 0 when the policy
# assigns no mass to the refined action.
L2_CAP = 745.0


class ReplayError(RuntimeError):
    """Sampling from an empty or massless replay buffer."""


class ReplayBuffer:
    """FIFO buffer whose sampling weights are priority**alpha, normalized.

    Priorities default to the running maximum for fresh records so new data
    is trained on at least once before its own loss value takes over.
    """

    def __init__(self, capacity: int, alpha: float = 0.1):
        if capacity < 1:
            raise MdpValidationError("capacity must be >= 1")
        if alpha < 0:
            raise MdpValidationError("alpha must be >= 0")
        self.capacity = capacity
        self.alpha = alpha
        self._records: list[object] = []
        self._priorities: list[float] = []

    def __len__(self) -> int:
        return len(self._records)

    @property
    def records(self) -> list[object]:
        return list(self._records)

    @property
    def priorities(self) -> np.ndarray:
        return np.asarray(self._priorities, dtype=float)

    def add(self, record: object, priority: float | None = None) -> None:
        if priority is None:
            priority = max(self._priorities, default=1.0)
        if priority < 0:
            raise MdpValidationError("priority must be >= 0")
        self._records.append(record)
        self._priorities.append(float(priority))
        if len(self._records) > self.capacity:
            self._records.pop(0)
            self._priorities.pop(0)

    def set_priority(self, index: int, priority: float) -> None:
        if priority < 0:
            raise MdpValidationError("priority must be >= 0")
        self._priorities[index] = float(priority)

    def sampling_probabilities(self) -> np.ndarray:
        if not self._records:
            raise ReplayError("replay buffer is empty")
        weights = np.power(self.priorities, self.alpha)
        total = weights.sum()
        if total <= 0.0:
            raise ReplayError("replay buffer has no positive sampling mass")
        return weights / total

    def sample_indices(
        self, batch: int, rng: int | np.random.Generator | None = None
    ) -> np.ndarray:
        probs = self.sampling_probabilities()
        return as_rng(rng).choice(len(self._records), size=batch, replace=True, p=probs)


def priority_sample(
    buffer: ReplayBuffer, batch: int, rng: int | np.random.Generator | None = None
) -> list[object]:
    """Draw ``batch`` records with replacement, proportional to priority**alpha."""
    indices = buffer.sample_indices(batch, rng)
    return [buffer._records[i] for i in indices]


# ---------------------------------------------------------------------------
# EMA target parameters.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EmaState:
    """Trained parameters plus their exponentially averaged target copy."""

    current: np.ndarray | dict[str, np.ndarray]
    target: np.ndarray | dict[str, np.ndarray]
    tau: float = 0.005

    def __post_init__(self):
        if not 0.0 <= self.tau <= 1.0:
            raise MdpValidationError("tau must be in [0, 1]")
        _check_bundle_shapes(self.current, self.target)


def _check_bundle_shapes(a, b) -> None:
    if isinstance(a, dict) != isinstance(b, dict):
        raise MdpValidationError("parameter bundles must have matching structure")
    if isinstance(a, dict):
        if a.keys() != b.keys():
            raise MdpValidationError("parameter bundles must have matching keys")
        for key in a:
            if np.shape(a[key]) != np.shape(b[key]):
                raise MdpValidationError(f"bundle entry {key!r} has mismatched shape")
    elif np.shape(a) != np.shape(b):
        raise MdpValidationError("parameter bundles must have matching shapes")


def ema_update(state: EmaState) -> EmaState:
    """target <- tau * current + (1 - tau) * target, exactly."""
    tau = state.tau
    if isinstance(state.current, dict):
        new_target = {
            key: tau * np.asarray(state.current[key]) + (1.0 - tau) * np.asarray(state.target[key])
            for key in state.current
        }
    else:
        new_target = tau * np.asarray(state.current) + (1.0 - tau) * np.asarray(state.target)
    return EmaState(current=state.current, target=new_target, tau=tau)


# ---------------------------------------------------------------------------
# Losses.
# ---------------------------------------------------------------------------


class SupportError(ValueError):
    """The model assigns zero mass to a target description and no smoothing is set."""


def compute_l1(
    target_dist: DescriptionDistribution,
    model_dist: DescriptionDistribution,
    smoothing: float = 0.0,
) -> float:
    """Critic loss: KL(target || model) over description distributions.

    Nonnegative, zero iff the distributions agree. Without smoothing, target
    mass outside the model's support is an error naming the offending
    description; with smoothing, the model is mixed with a uniform over the
    union support.
    """
    if smoothing < 0:
        raise MdpValidationError("smoothing must be >= 0")
    if smoothing == 0.0:
        for d, p in target_dist:
            if p > 0.0 and model_dist.probability(d) == 0.0:
                raise SupportError(
                    f"model assigns zero mass to target description {d.canonical()!r}"
                )
        return kl_divergence(target_dist, model_dist)
    union = {d for d, _ in target_dist} | {d for d, _ in model_dist}
    eps = smoothing
    total = 0.0
    for d, p in target_dist:
        if p == 0.0:
            continue
        q = (1.0 - eps) * model_dist.probability(d) + eps / len(union)
        total += p * math.log(p / q)
    return max(total, 0.0)


def cross_entropy_l1(
    target_samples: list, model_dist: DescriptionDistribution
) -> float:
    """Sampled estimate of the critic loss: mean -log model(d) over target draws."""
    if not target_samples:
        raise MdpValidationError("need at least one target sample")
    total = 0.0
    for d in target_samples:
        q = model_dist.probability(d)
        if q == 0.0:
            raise SupportError(
                f"model assigns zero mass to target description {d.canonical()!r}"
            )
        total -= math.log(q)
    return total / len(target_samples)


def compute_l2(
    policy: TabularPolicy, state: int, refined_action: int, cap: float = L2_CAP
) -> float:
    """Policy loss: -log pi(refined_action | state), capped when pi is zero."""
    if not 0 <= refined_action < policy.num_actions:
        raise MdpValidationError(f"action {refined_action} out of range")
    p = policy.probs[state, refined_action]
    if p <= 0.0:
        return cap
    return min(-math.log(p), cap)


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


def policy_from_logits(logits: np.ndarray) -> TabularPolicy:
    return TabularPolicy(softmax(logits))


def l2_logit_gradient(logits_row: np.ndarray, refined_action: int) -> np.ndarray:
    """d/dlogits of -log softmax(logits)[refined_action]: probs - onehot."""
    grad = softmax(logits_row).copy()
    grad[refined_action] -= 1.0
    return grad


def distill(
    logits: np.ndarray,
    pairs: list[tuple[int, int]],
    step_size: float = 1.0,
    steps: int = 100,
) -> np.ndarray:
    """Gradient descent on the mean refined-action log-likelihood loss.

    With repeated steps the per-state policy converges to the empirical
    distribution of its refined actions; no pairs leaves the logits untouched.
    """
    logits = np.array(logits, dtype=float)
    if not pairs:
        return logits
    by_state: dict[int, list[int]] = {}
    for state, action in pairs:
        by_state.setdefault(state, []).append(action)
    states = sorted(by_state)
    targets = np.zeros((len(states), logits.shape[1]))
    for i, s in enumerate(states):
        for a in by_state[s]:
            targets[i, a] += 1.0 / len(by_state[s])
    rows = np.array(states, dtype=int)
    for _ in range(steps):
        grad = softmax(logits[rows]) - targets
        logits[rows] -= step_size * grad
    return logits


def project_onto_actions(logits: np.ndarray, pairs: list[tuple[int, int]], gap: float = 40.0) -> np.ndarray:
    """Closed-form limit of distillation when each state has one refined action:
    concentrate the policy on it (logit gap ~40 leaves off-mass below 1e-17)."""
    logits = np.array(logits, dtype=float)
    for state, action in pairs:
        logits[state] = 0.0
        logits[state, action] = gap
    return logits


# ---------------------------------------------------------------------------
# Refinement.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RefinementTranscript:
    """Accepted refinement attempts, in order; critique scalars never decrease."""

    state: int
    attempts: tuple[tuple[int, Critique], ...]

    def __post_init__(self):
        scalars = self.scalars
        if any(b < a for a, b in zip(scalars, scalars[1:])):
            raise MdpValidationError("refinement transcript scalars must be non-decreasing")

    @property
    def scalars(self) -> tuple[float, ...]:
        return tuple(scalarize(c) for _, c in self.attempts)

    @property
    def final_action(self) -> int:
        return self.attempts[-1][0]


def refine(
    policy: TabularPolicy,
    critic,
    state: int,
    initial_action: int,
    m: int = 1,
    candidate_budget: int | None = None,
    k: int = 1,
    rng: int | np.random.Generator | None = None,
) -> RefinementTranscript:
    """Iteratively revise an action until its critique stops improving.

    Each round scores up to ``candidate_budget`` untried actions with the
    critic's scalar, proposes the best, and keeps it iff its critique is at
    least as good as the incumbent's. Actions whose critiques already judged
    them suboptimal are excluded from later rounds. With a budget covering
    the whole action set, one round lands on the greedy-optimal action.
    """
    if m < 1:
        raise MdpValidationError("m must be >= 1")
    gen = as_rng(rng)
    num_actions = critic.mdp.num_actions
    if candidate_budget is None:
        candidate_budget = num_actions
    if candidate_budget < 1:
        raise MdpValidationError("candidate_budget must be >= 1")

    attempts = [(initial_action, critic.critique(state, initial_action, k=k, rng=gen))]
    tried = {initial_action}
    for _ in range(m):
        incumbent_action, incumbent = attempts[-1]
        if incumbent.optimal:
            break
        candidates = [a for a in range(num_actions) if a not in tried]
        if not candidates:
            break
        if len(candidates) > candidate_budget:
            chosen = gen.choice(len(candidates), size=candidate_budget, replace=False)
            candidates = [candidates[i] for i in chosen]
        best = max(candidates, key=lambda a: critic.sentiment(state, a))
        tried.add(best)
        candidate_critique = critic.critique(state, best, k=k, rng=gen)
        if scalarize(candidate_critique) >= scalarize(incumbent):
            attempts.append((best, candidate_critique))
    return RefinementTranscript(state=state, attempts=tuple(attempts))


# ---------------------------------------------------------------------------
# The full loop.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RunConfig:
    iterations: int = 12
    env_steps_per_iteration: int = 0
    critic_mode: str = "exact"  # "exact" or "td"
    critic_tol: float = 1e-9
    td_learning_rate: float = 0.5
    td_batches_per_iteration: int = 200
    batch_size: int = 64
    replay_capacity: int = 100_000
    replay_alpha: float = 0.1
    ema_tau: float = 0.005
    horizon: int = 16
    k: int = 1
    m: int = 1
    candidate_budget: int | None = None
    distill_mode: str = "project"  # "project" or "gradient"
    distill_step_size: float = 1.0
    distill_steps: int = 500
    lambda1: float = 1.0
    lambda2: float = 1.0
    opt_margin: float = 1e-6
    episode_horizon: int = 64
    seed: int = 0

    def validate(self) -> None:
        if self.iterations < 0:
            raise MdpValidationError("iterations must be >= 0")
        if self.critic_mode not in ("exact", "td"):
            raise MdpValidationError(f"unknown critic_mode {self.critic_mode!r}")
        if self.distill_mode not in ("project", "gradient"):
            raise MdpValidationError(f"unknown distill_mode {self.distill_mode!r}")
        if self.k < 1 or self.m < 1:
            raise MdpValidationError("k and m must be >= 1")
        if not 0.0 <= self.ema_tau <= 1.0:
            raise MdpValidationError("ema_tau must be in [0, 1]")

    @classmethod
    def from_dict(cls, payload: dict) -> "RunConfig":
        import dataclasses

        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(payload) - known
        if unknown:
            raise MdpValidationError(f"unknown config field(s): {sorted(unknown)}")
        config = cls(**payload)
        config.validate()
        return config

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        import json
        from pathlib import Path

        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class IterationDiagnostics:
    iteration: int
    j_value: float
    mean_l1: float
    mean_l2: float
    policy_changed: bool

    def to_record(self) -> dict:
        return {
            "iteration": self.iteration,
            "j_value": self.j_value,
            "mean_l1": self.mean_l1,
            "mean_l2": self.mean_l2,
            "policy_changed": self.policy_changed,
        }


def _collect_steps(
    mdp: TabularMdp,
    policy: TabularPolicy,
    buffer: ReplayBuffer,
    steps: int,
    episode_horizon: int,
    rng: np.random.Generator,
) -> None:
    state = int(rng.choice(mdp.num_states, p=mdp.initial_dist))
    age = 0
    for _ in range(steps):
        action, reward, next_state, done = sample_transition(mdp, policy, state, rng)
        buffer.add((state, action, reward, next_state, done))
        age += 1
        if done or age >= episode_horizon:
            state = int(rng.choice(mdp.num_states, p=mdp.initial_dist))
            age = 0
        else:
            state = next_state


def _train_critic_td(
    mdp: TabularMdp,
    policy: TabularPolicy,
    buffer: ReplayBuffer,
    table: np.ndarray,
    config: RunConfig,
    rng: np.random.Generator,
) -> tuple[np.ndarray, float]:
    """TD updates with EMA bootstrap targets; returns (table, mean critic loss).

    The per-transition critic loss (sup-norm TD residual of the successor
    representation) doubles as the record's replay priority.
    """
    ema = EmaState(current=table, target=table.copy(), tau=config.ema_tau)
    losses = []
    for _ in range(config.td_batches_per_iteration):
        indices = buffer.sample_indices(config.batch_size, rng)
        for idx in indices:
            s, a, _, s_next, _ = buffer._records[idx]
            bootstrap = policy.probs[s_next] @ ema.target[s_next]
            target = mdp.features[s] + mdp.discount * bootstrap
            delta = target - ema.current[s, a]
            ema.current[s, a] += config.td_learning_rate * delta
            loss = float(np.max(np.abs(delta)))
            losses.append(loss)
            buffer.set_priority(int(idx), loss)
        ema = ema_update(ema)
    return ema.current, float(np.mean(losses)) if losses else 0.0


def run_nlac(mdp: TabularMdp, config: RunConfig) -> tuple[TabularPolicy, list[IterationDiagnostics]]:
    """Run the full evaluation/improvement loop and return the final policy.

    ``exact`` critic mode recomputes the successor representation of the
    current policy to tolerance each iteration; ``td`` mode trains it from
    prioritized replay with EMA targets. Improvement refines a sampled action
    in every state and distills the refined actions into the policy.
    """
    config.validate()
    rng = as_rng(config.seed)
    logits = np.zeros((mdp.num_states, mdp.num_actions))
    buffer = ReplayBuffer(config.replay_capacity, alpha=config.replay_alpha)
    td_table = np.zeros((mdp.num_states, mdp.num_actions, mdp.feature_dim))
    diagnostics: list[IterationDiagnostics] = []

    for iteration in range(config.iterations):
        policy = policy_from_logits(logits)
        if config.env_steps_per_iteration:
            _collect_steps(
                mdp, policy, buffer, config.env_steps_per_iteration,
                config.episode_horizon, rng,
            )
        if config.critic_mode == "exact":
            critic = SuccessorCritic.exact(mdp, policy, config.critic_tol, config.opt_margin)
            mean_l1 = 0.0
        else:
            if not len(buffer):
                raise ReplayError("td critic mode requires env_steps_per_iteration > 0")
            td_table, mean_l1 = _train_critic_td(mdp, policy, buffer, td_table, config, rng)
            critic = SuccessorCritic(mdp, policy, td_table, config.opt_margin)

        pairs: list[tuple[int, int]] = []
        l2_values: list[float] = []
        for state in range(mdp.num_states):
            initial_action = int(rng.choice(mdp.num_actions, p=policy.probs[state]))
            transcript = refine(
                policy, critic, state, initial_action,
                m=config.m, candidate_budget=config.candidate_budget,
                k=config.k, rng=rng,
            )
            refined = transcript.final_action
            l2_values.append(compute_l2(policy, state, refined))
            pairs.append((state, refined))

        previous = np.argmax(logits, axis=1)
        if config.distill_mode == "project":
            logits = project_onto_actions(logits, pairs)
        else:
            logits = distill(logits, pairs, config.distill_step_size, config.distill_steps)
        changed = bool(np.any(np.argmax(logits, axis=1) != previous))

        updated = policy_from_logits(logits)
        diagnostics.append(
            IterationDiagnostics(
                iteration=iteration,
                j_value=policy_return(mdp, updated, config.critic_tol),
                mean_l1=config.lambda1 * mean_l1,
                mean_l2=config.lambda2 * float(np.mean(l2_values)),
                policy_changed=changed,
            )
        )

    return policy_from_logits(logits), diagnostics
