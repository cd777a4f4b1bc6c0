"""Rollout descriptions, their distributions, and the critics built on them.

A *rollout description* is a canonical symbolic record of what happens after
taking an action: the ordered future ``(state, action)`` steps, truncated at a
horizon ``H``, with per-step emphasis ``gamma^i`` (the immediate next step
carries full weight, later steps geometrically less) and a terminal-reward tag
when the recorded window reaches the end of the episode. Recording stops at
the first terminal step, and the tag stores the reward earned on the
transition into it (the final "score" of the episode).

A *successor model* maps each ``(state, action)`` to a distribution over such
descriptions. The one-step *backup* rebuilds that distribution from sampled
or exact one-step transitions plus the model's own descriptions one step
ahead, pushed through the combine operator. Iterating the backup converges to
the exact ``H``-truncated rollout distribution of the policy, which is what
makes the model trainable off-policy from single transitions.

A critic turns descriptions into a scalar judgment: the expected emphasis-
weighted reward content of the futures, discounted once and added to the
immediate reward. At the model's fixed point this scalar equals the true
Q-value up to the ``gamma^H * V_max`` truncation error, so ordering actions by
it reproduces the ordering under the exact Q-function.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .mdp import (
    ConvergenceError,
    MdpValidationError,
    TabularMdp,
    TabularPolicy,
    as_rng,
    successor_backup,
)

MODEL_SCHEMA_VERSION = 1

_PROB_SUM_TOL = 1e-9
DEFAULT_SUPPORT_CAP = 4096
DEFAULT_OPT_MARGIN = 1e-6


class BackupModelError(KeyError):
    """The successor model has no entry for a reachable (state, action) pair."""


@dataclass(frozen=True)
class RolloutDescription:
    """Canonical record of a truncated future rollout.

    ``steps[0]`` is the immediate next (state, action); ``terminal_reward`` is
    present iff the recorded window reaches a terminal state, and holds the
    reward of the transition that entered it.
    """

    steps: tuple[tuple[int, int], ...]
    discount: float
    terminal_reward: float | None = None

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def emphasis(self) -> tuple[float, ...]:
        return tuple(self.discount**i for i in range(len(self.steps)))

    def canonical(self) -> str:
        """Injective serialization: equal strings iff equal descriptions."""
        body = ";".join(f"{s}.{a}" for s, a in self.steps)
        tag = "-" if self.terminal_reward is None else repr(self.terminal_reward)
        return f"{body}|{tag}"

    def to_payload(self) -> dict:
        return {
            "steps": [list(step) for step in self.steps],
            "terminal_reward": self.terminal_reward,
        }

    @classmethod
    def from_payload(cls, payload: dict, discount: float) -> "RolloutDescription":
        tr = payload.get("terminal_reward")
        return cls(
            steps=tuple((int(s), int(a)) for s, a in payload["steps"]),
            discount=discount,
            terminal_reward=None if tr is None else float(tr),
        )


def validate_description(
    description: RolloutDescription, mdp: TabularMdp, horizon: int
) -> None:
    """Structural checks used by tests: emphasis law, length, terminal tagging."""
    if len(description) > horizon:
        raise MdpValidationError("description longer than horizon")
    for i, weight in enumerate(description.emphasis):
        if weight != description.discount**i:
            raise MdpValidationError(f"emphasis[{i}] is not gamma^{i}")
    terminal_idx = [i for i, (s, _) in enumerate(description.steps) if mdp.is_terminal(s)]
    if terminal_idx:
        if terminal_idx[0] != len(description) - 1:
            raise MdpValidationError("terminal step must end the description")
        if description.terminal_reward is None:
            raise MdpValidationError("terminal step recorded without terminal_reward")
    elif description.terminal_reward is not None:
        raise MdpValidationError("terminal_reward present without a terminal step")


def record_rollout(
    mdp: TabularMdp,
    policy: TabularPolicy,
    state: int,
    action: int,
    horizon: int,
    rng: int | np.random.Generator | None = None,
) -> RolloutDescription:
    """Simulate one future rollout of ``policy`` after (state, action) and record it.

    Independent of the combine/backup machinery; used as a sampling oracle and
    to attach concrete futures to critiques.
    """
    gen = as_rng(rng)
    steps: list[tuple[int, int]] = []
    prev = state
    current = state
    current_action = action
    terminal_reward = None
    for _ in range(horizon):
        nxt = int(gen.choice(mdp.num_states, p=mdp.transition[current, current_action]))
        nxt_action = int(gen.choice(mdp.num_actions, p=policy.probs[nxt]))
        steps.append((nxt, nxt_action))
        if mdp.is_terminal(nxt):
            terminal_reward = mdp.reward(prev)
            break
        prev = nxt
        current, current_action = nxt, nxt_action
    return RolloutDescription(tuple(steps), mdp.discount, terminal_reward)


class DescriptionDistribution:
    """Categorical distribution over rollout descriptions for one (state, action)."""

    def __init__(
        self,
        support: dict[RolloutDescription, float],
        support_cap: int | None = None,
    ):
        if not support:
            raise MdpValidationError("description distribution must have nonempty support")
        total = math.fsum(support.values())
        if any(p < 0 for p in support.values()) or abs(total - 1.0) > _PROB_SUM_TOL:
            raise MdpValidationError(f"support probabilities sum to {total!r}, expected 1")
        if support_cap is not None and len(support) > support_cap:
            # Evict lowest-probability descriptions, then renormalize. Ties
            # break on the canonical key so eviction is deterministic.
            kept = sorted(support.items(), key=lambda kv: (-kv[1], kv[0].canonical()))[:support_cap]
            mass = math.fsum(p for _, p in kept)
            support = {d: p / mass for d, p in kept}
        self._support = dict(support)

    def __len__(self) -> int:
        return len(self._support)

    def __iter__(self):
        return iter(self._support.items())

    def probability(self, description: RolloutDescription) -> float:
        return self._support.get(description, 0.0)

    def items(self) -> list[tuple[RolloutDescription, float]]:
        return sorted(self._support.items(), key=lambda kv: kv[0].canonical())

    def sample(
        self, rng: int | np.random.Generator | None = None, k: int = 1
    ) -> list[RolloutDescription]:
        gen = as_rng(rng)
        descriptions = [d for d, _ in self.items()]
        probs = np.array([p for _, p in self.items()])
        probs = probs / probs.sum()
        idx = gen.choice(len(descriptions), size=k, p=probs)
        return [descriptions[i] for i in idx]

    def first_step_marginal(self) -> dict[tuple[int, int], float]:
        marginal: dict[tuple[int, int], float] = {}
        for d, p in self._support.items():
            if d.steps:
                key = d.steps[0]
                marginal[key] = marginal.get(key, 0.0) + p
        return marginal


def tv_distance(a: DescriptionDistribution, b: DescriptionDistribution) -> float:
    keys = {d for d, _ in a} | {d for d, _ in b}
    return 0.5 * math.fsum(abs(a.probability(d) - b.probability(d)) for d in keys)


def kl_divergence(p: DescriptionDistribution, q: DescriptionDistribution) -> float:
    """KL(p || q); infinite when q misses mass that p carries."""
    total = 0.0
    for d, pp in p:
        if pp == 0.0:
            continue
        qq = q.probability(d)
        if qq == 0.0:
            return math.inf
        total += pp * math.log(pp / qq)
    return max(total, 0.0)


def combine_next_step(
    reward: float,
    next_state: int,
    next_action: int,
    future: RolloutDescription | None,
    *,
    mdp: TabularMdp,
    horizon: int,
) -> RolloutDescription:
    """Merge one observed step with a description of the rollout after it.

    The observed step is prepended at full emphasis and the future's emphasis
    is shifted down one power of gamma. When the observed step enters a
    terminal state the episode is over: the future is dropped and the
    transition reward becomes the terminal tag. Truncation to the horizon
    drops the furthest-future steps (and the terminal tag with them, if the
    terminal step no longer fits).
    """
    if mdp.is_terminal(next_state):
        return RolloutDescription(
            ((next_state, next_action),), mdp.discount, float(reward)
        )
    future_steps = future.steps if future is not None else ()
    steps = ((next_state, next_action),) + future_steps
    terminal_reward = future.terminal_reward if future is not None else None
    if len(steps) > horizon:
        steps = steps[:horizon]
        terminal_reward = None  # the terminal step was truncated away
    return RolloutDescription(steps, mdp.discount, terminal_reward)


@dataclass(eq=False)
class DescriptionModel:
    """Table of description distributions, one per (state, action)."""

    table: dict[tuple[int, int], DescriptionDistribution]
    horizon: int
    discount: float
    support_cap: int | None = DEFAULT_SUPPORT_CAP

    def distribution(self, state: int, action: int) -> DescriptionDistribution:
        try:
            return self.table[(state, action)]
        except KeyError:
            raise BackupModelError(
                f"successor model has no entry for (state={state}, action={action})"
            ) from None

    @classmethod
    def trivial(
        cls,
        num_states: int,
        num_actions: int,
        horizon: int,
        discount: float,
        support_cap: int | None = DEFAULT_SUPPORT_CAP,
    ) -> "DescriptionModel":
        empty = RolloutDescription((), discount, None)
        table = {
            (s, a): DescriptionDistribution({empty: 1.0})
            for s in range(num_states)
            for a in range(num_actions)
        }
        return cls(table=table, horizon=horizon, discount=discount, support_cap=support_cap)


def language_bellman_backup(
    model: DescriptionModel,
    mdp: TabularMdp,
    policy: TabularPolicy,
    state: int,
    action: int,
    *,
    mode: str = "exact",
    num_samples: int | None = None,
    rng: int | np.random.Generator | None = None,
) -> DescriptionDistribution:
    """One-step backup of the description distribution at (state, action).

    ``exact`` pushes the joint next-step distribution P(s'|s,a) pi(a'|s')
    times the model at (s', a') through the combine operator. ``sampled``
    returns the empirical distribution of ``num_samples`` draws of the same
    quantity.
    """
    reward = mdp.reward(state)
    if mode == "exact":
        out: dict[RolloutDescription, float] = {}
        for next_state in np.flatnonzero(mdp.transition[state, action]):
            p_next = mdp.transition[state, action, next_state]
            for next_action in np.flatnonzero(policy.probs[next_state]):
                weight = p_next * policy.probs[next_state, next_action]
                if mdp.is_terminal(next_state):
                    combined = combine_next_step(
                        reward, int(next_state), int(next_action), None,
                        mdp=mdp, horizon=model.horizon,
                    )
                    out[combined] = out.get(combined, 0.0) + weight
                    continue
                for future, p_future in model.distribution(int(next_state), int(next_action)):
                    combined = combine_next_step(
                        reward, int(next_state), int(next_action), future,
                        mdp=mdp, horizon=model.horizon,
                    )
                    out[combined] = out.get(combined, 0.0) + weight * p_future
        return DescriptionDistribution(out, support_cap=model.support_cap)
    if mode == "sampled":
        if not num_samples or num_samples < 1:
            raise MdpValidationError("sampled mode requires num_samples >= 1")
        gen = as_rng(rng)
        counts: dict[RolloutDescription, int] = {}
        for _ in range(num_samples):
            next_state = int(gen.choice(mdp.num_states, p=mdp.transition[state, action]))
            next_action = int(gen.choice(mdp.num_actions, p=policy.probs[next_state]))
            if mdp.is_terminal(next_state):
                future = None
            else:
                future = model.distribution(next_state, next_action).sample(gen)[0]
            combined = combine_next_step(
                reward, next_state, next_action, future, mdp=mdp, horizon=model.horizon
            )
            counts[combined] = counts.get(combined, 0) + 1
        support = {d: c / num_samples for d, c in counts.items()}
        return DescriptionDistribution(support, support_cap=model.support_cap)
    raise MdpValidationError(f"unknown backup mode {mode!r}")


def _empirical_transition(
    mdp: TabularMdp, transitions: list[tuple[int, int, float, int]]
) -> np.ndarray:
    counts = np.zeros_like(mdp.transition)
    for s, a, _, s_next in transitions:
        counts[s, a, s_next] += 1.0
    totals = counts.sum(axis=2)
    # Terminal rows keep the structural self-loop even without data.
    for s in mdp.terminal_states:
        counts[s, :, s] = 1.0
        totals[s, :] = 1.0
    missing = np.argwhere(totals == 0.0)
    if missing.size:
        s, a = missing[0]
        raise MdpValidationError(
            f"transitions do not cover (state={s}, action={a}); cannot fit"
        )
    return counts / totals[:, :, None]


def fit_description_model(
    mdp: TabularMdp,
    policy: TabularPolicy,
    *,
    horizon: int,
    divergence_tol: float = 1e-9,
    max_iterations: int | None = None,
    support_cap: int | None = DEFAULT_SUPPORT_CAP,
    transitions: list[tuple[int, int, float, int]] | None = None,
) -> DescriptionModel:
    """Fit the successor model by iterating backups until self-consistency.

    Each sweep replaces every per-(s,a) distribution with its backup; training
    stops once the mean divergence KL(model || backup(model)) drops to
    ``divergence_tol``. With exact one-step distributions the fixed point is
    reached after ``horizon`` sweeps and reproduces the policy's true
    H-truncated rollout distribution. When ``transitions`` are supplied, the
    one-step distributions are their empirical estimates instead.
    """
    if transitions is not None:
        mdp = TabularMdp(
            transition=_empirical_transition(mdp, transitions),
            features=mdp.features,
            reward_weights=mdp.reward_weights,
            discount=mdp.discount,
            initial_dist=mdp.initial_dist,
            terminal_states=mdp.terminal_states,
        )
    if max_iterations is None:
        max_iterations = horizon + 4
    model = DescriptionModel.trivial(
        mdp.num_states, mdp.num_actions, horizon, mdp.discount, support_cap
    )
    pairs = [(s, a) for s in range(mdp.num_states) for a in range(mdp.num_actions)]
    residual = math.inf
    for _ in range(max_iterations):
        new_table = {
            (s, a): language_bellman_backup(model, mdp, policy, s, a, mode="exact")
            for s, a in pairs
        }
        divergences = [kl_divergence(model.table[pair], new_table[pair]) for pair in pairs]
        residual = math.fsum(divergences) / len(pairs) if all(map(math.isfinite, divergences)) else math.inf
        if residual <= divergence_tol:
            return model
        model = DescriptionModel(
            table=new_table, horizon=horizon, discount=mdp.discount, support_cap=support_cap
        )
    raise ConvergenceError("successor model fit did not converge", residual)


def enumerate_rollout_distribution(
    mdp: TabularMdp,
    policy: TabularPolicy,
    state: int,
    action: int,
    horizon: int,
) -> DescriptionDistribution:
    """Brute-force oracle: enumerate every H-truncated future rollout directly.

    Builds descriptions by explicit tree expansion of P and pi, independent of
    the combine/backup code path.
    """
    support: dict[RolloutDescription, float] = {}

    def expand(prefix: list[tuple[int, int]], prob: float, prev: int, cur: int, cur_a: int):
        for nxt in np.flatnonzero(mdp.transition[cur, cur_a]):
            p_next = prob * mdp.transition[cur, cur_a, nxt]
            for nxt_a in np.flatnonzero(policy.probs[nxt]):
                p = p_next * policy.probs[nxt, nxt_a]
                steps = prefix + [(int(nxt), int(nxt_a))]
                if mdp.is_terminal(int(nxt)):
                    d = RolloutDescription(tuple(steps), mdp.discount, mdp.reward(prev))
                    support[d] = support.get(d, 0.0) + p
                elif len(steps) == horizon:
                    d = RolloutDescription(tuple(steps), mdp.discount, None)
                    support[d] = support.get(d, 0.0) + p
                else:
                    expand(steps, p, int(nxt), int(nxt), int(nxt_a))

    expand([], 1.0, state, state, action)
    return DescriptionDistribution(support, support_cap=None)


# ---------------------------------------------------------------------------
# Critiques: turning futures into an ordered judgment of the action.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Critique:
    """Evaluator output: optimality verdict, scalar sentiment, and the futures
    (with weights) that justify it."""

    optimal: bool
    sentiment: float
    justifications: tuple[tuple[RolloutDescription, float], ...]


def scalarize(critique: Critique) -> float:
    """Monotone map from critiques to comparable scalars (the sentiment)."""
    return critique.sentiment


def description_content(mdp: TabularMdp, description: RolloutDescription) -> float:
    """Emphasis-weighted reward content of the recorded future steps."""
    return math.fsum(
        weight * mdp.reward(s)
        for weight, (s, _) in zip(description.emphasis, description.steps)
    )


def sentiment_from_descriptions(
    mdp: TabularMdp,
    state: int,
    descriptions: list[RolloutDescription],
    weights: list[float] | None = None,
) -> float:
    """Scalar judgment of the action whose futures are described.

    Immediate reward plus the discounted weighted-mean future content; equal
    to the exact Q-value whenever every description runs to episode end, and
    within ``gamma^H * V_max`` of it otherwise.
    """
    if not descriptions:
        raise MdpValidationError("evaluation requires at least one description")
    if weights is None:
        weights = [1.0 / len(descriptions)] * len(descriptions)
    if len(weights) != len(descriptions):
        raise MdpValidationError("weights and descriptions must align")
    total_weight = math.fsum(weights)
    future = math.fsum(
        w * description_content(mdp, d) for w, d in zip(weights, descriptions)
    ) / total_weight
    return mdp.reward(state) + mdp.discount * future


def evaluate(
    mdp: TabularMdp,
    state: int,
    action: int,
    descriptions: list[RolloutDescription],
    weights: list[float] | None = None,
    *,
    rival_sentiments: list[float] | None = None,
    opt_margin: float = DEFAULT_OPT_MARGIN,
) -> Critique:
    """Aggregate sampled futures into a critique of (state, action).

    The verdict is "optimal" iff no rival action's sentiment beats this one by
    more than ``opt_margin`` (ties count as optimal). Callers that cannot
    supply rivals get an optimistic verdict.
    """
    sentiment = sentiment_from_descriptions(mdp, state, descriptions, weights)
    if rival_sentiments:
        optimal = sentiment >= max(rival_sentiments) - opt_margin
    else:
        optimal = True
    if weights is None:
        weights = [1.0 / len(descriptions)] * len(descriptions)
    return Critique(
        optimal=optimal,
        sentiment=sentiment,
        justifications=tuple(zip(descriptions, weights)),
    )


class DescriptionCritic:
    """Critic backed by a fitted description model.

    Sentiments are exact expectations over the model's support; critiques can
    instead carry ``k`` sampled futures as justification while keeping the
    verdict computed against every rival action.
    """

    def __init__(
        self,
        mdp: TabularMdp,
        policy: TabularPolicy,
        model: DescriptionModel,
        opt_margin: float = DEFAULT_OPT_MARGIN,
    ):
        self.mdp = mdp
        self.policy = policy
        self.model = model
        self.opt_margin = opt_margin

    def sentiment(self, state: int, action: int) -> float:
        dist = self.model.distribution(state, action)
        descriptions = [d for d, _ in dist.items()]
        weights = [p for _, p in dist.items()]
        return sentiment_from_descriptions(self.mdp, state, descriptions, weights)

    def critique(
        self,
        state: int,
        action: int,
        k: int | None = None,
        rng: int | np.random.Generator | None = None,
    ) -> Critique:
        rivals = [
            self.sentiment(state, a)
            for a in range(self.mdp.num_actions)
            if a != action
        ]
        if k is None:
            dist = self.model.distribution(state, action)
            descriptions = [d for d, _ in dist.items()]
            weights = [p for _, p in dist.items()]
        else:
            if k < 1:
                raise MdpValidationError("k must be >= 1")
            descriptions = self.model.distribution(state, action).sample(as_rng(rng), k)
            weights = [1.0 / k] * k
        return evaluate(
            self.mdp, state, action, descriptions, weights,
            rival_sentiments=rivals, opt_margin=self.opt_margin,
        )


class SuccessorCritic:
    """Critic backed by a successor-representation table ``(S, A, d)``.

    The sentiment is ``Psi(s,a) . w`` — the scalar value the representation
    decodes to — while justifications are concrete simulated futures.
    """

    def __init__(
        self,
        mdp: TabularMdp,
        policy: TabularPolicy,
        table: np.ndarray,
        opt_margin: float = DEFAULT_OPT_MARGIN,
        justification_horizon: int = 16,
    ):
        expected = (mdp.num_states, mdp.num_actions, mdp.feature_dim)
        if table.shape != expected:
            raise MdpValidationError(f"successor table must have shape {expected}")
        self.mdp = mdp
        self.policy = policy
        self.table = table
        self.opt_margin = opt_margin
        self.justification_horizon = justification_horizon

    @classmethod
    def exact(
        cls,
        mdp: TabularMdp,
        policy: TabularPolicy,
        tol: float = 1e-9,
        opt_margin: float = DEFAULT_OPT_MARGIN,
    ) -> "SuccessorCritic":
        from .mdp import dp_successor_features

        return cls(mdp, policy, dp_successor_features(mdp, policy, tol), opt_margin)

    def sentiment(self, state: int, action: int) -> float:
        return float(self.table[state, action] @ self.mdp.reward_weights)

    def critique(
        self,
        state: int,
        action: int,
        k: int = 1,
        rng: int | np.random.Generator | None = None,
    ) -> Critique:
        if k < 1:
            raise MdpValidationError("k must be >= 1")
        gen = as_rng(rng)
        sentiments = self.table[state] @ self.mdp.reward_weights
        rivals = [float(sentiments[a]) for a in range(self.mdp.num_actions) if a != action]
        justifications = tuple(
            (
                record_rollout(
                    self.mdp, self.policy, state, action, self.justification_horizon, gen
                ),
                1.0 / k,
            )
            for _ in range(k)
        )
        sentiment = float(sentiments[action])
        optimal = sentiment >= (max(rivals) if rivals else sentiment) - self.opt_margin
        return Critique(optimal=optimal, sentiment=sentiment, justifications=justifications)


def train_successor_td(
    mdp: TabularMdp,
    policy: TabularPolicy,
    *,
    learning_rate: float = 0.5,
    tol: float = 1e-8,
    max_sweeps: int = 100_000,
) -> np.ndarray:
    """Train a successor table by damped temporal-difference sweeps.

    Each sweep moves the table a ``learning_rate`` fraction toward its
    bootstrapped one-step target; stops when the sup-norm residual against the
    target drops below ``tol``. Distinct from the exact solver, which iterates
    the undamped operator.
    """
    if not 0.0 < learning_rate <= 1.0:
        raise MdpValidationError("learning_rate must be in (0, 1]")
    table = np.zeros((mdp.num_states, mdp.num_actions, mdp.feature_dim))
    for _ in range(max_sweeps):
        target = successor_backup(mdp, policy, table)
        residual = float(np.max(np.abs(target - table)))
        if residual <= tol:
            return table
        table = table + learning_rate * (target - table)
    raise ConvergenceError("TD training did not converge", residual)


def train_successor_td_on_transitions(
    mdp: TabularMdp,
    policy: TabularPolicy,
    transitions: list[tuple[int, int, float, int]],
    *,
    learning_rate: float = 0.2,
    epochs: int = 50,
    rng: int | np.random.Generator | None = None,
) -> np.ndarray:
    """Stochastic TD on recorded one-step transitions (expected over pi at s')."""
    gen = as_rng(rng)
    table = np.zeros((mdp.num_states, mdp.num_actions, mdp.feature_dim))
    order = np.arange(len(transitions))
    for _ in range(epochs):
        gen.shuffle(order)
        for idx in order:
            s, a, _, s_next = transitions[idx]
            bootstrap = policy.probs[s_next] @ table[s_next]
            target = mdp.features[s] + mdp.discount * bootstrap
            table[s, a] += learning_rate * (target - table[s, a])
    return table


# ---------------------------------------------------------------------------
# Versioned serialization for description tables (fixture reuse).
# ---------------------------------------------------------------------------


def model_to_dict(model: DescriptionModel) -> dict:
    entries = []
    for (s, a), dist in sorted(model.table.items()):
        entries.append(
            {
                "state": s,
                "action": a,
                "support": [
                    {**d.to_payload(), "p": p} for d, p in dist.items()
                ],
            }
        )
    return {
        "schema_version": MODEL_SCHEMA_VERSION,
        "horizon": model.horizon,
        "discount": model.discount,
        "support_cap": model.support_cap,
        "entries": entries,
    }


def model_from_dict(payload: dict) -> DescriptionModel:
    version = payload.get("schema_version")
    if version != MODEL_SCHEMA_VERSION:
        raise MdpValidationError(f"unsupported model schema_version {version!r}")
    discount = float(payload["discount"])
    table = {}
    for entry in payload["entries"]:
        support = {
            RolloutDescription.from_payload(item, discount): float(item["p"])
            for item in entry["support"]
        }
        table[(int(entry["state"]), int(entry["action"]))] = DescriptionDistribution(support)
    return DescriptionModel(
        table=table,
        horizon=int(payload["horizon"]),
        discount=discount,
        support_cap=payload.get("support_cap"),
    )


def save_model(model: DescriptionModel, path: str | Path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=2, sort_keys=True) + "\n")


def load_model(path: str | Path) -> DescriptionModel:
    return model_from_dict(json.loads(Path(path).read_text()))
