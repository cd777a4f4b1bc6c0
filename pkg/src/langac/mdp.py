"""Finite MDPs with feature-linear rewards and exact dynamic-programming solvers.

An MDP here is ``(S, A, P, r, rho, gamma)`` with two structural commitments:

* rewards are linear in a per-state feature map, ``r(s, a) = phi(s) . w``,
  so the scalar Q-function and the successor representation
  ``Psi(s, a) = phi(s) + gamma * E[Psi(s', a')]`` relate through the single
  identity ``Q = Psi . w``;
* terminal states are absorbing self-loops with an all-zero feature vector,
  which embeds episodic tasks into the discounted infinite-horizon formalism
  (the discounted sum simply stops accruing).

The ``dp_*`` solvers in this module are the ground-truth oracles used by the
verification suites: they iterate the exact Bellman operators to a requested
sup-norm tolerance.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

MDP_SCHEMA_VERSION = 1

# Stochasticity tolerances from the data contract: probability rows must sum
# to 1 within 1e-12.
_ROW_SUM_TOL = 1e-12


class MdpValidationError(ValueError):
    """An MDP, policy, or related table violates a structural invariant."""


class ConvergenceError(RuntimeError):
    """A fixed-point iteration exhausted its iteration budget."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


def as_rng(seed_or_rng: int | np.random.Generator | None) -> np.random.Generator:
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return np.random.default_rng(seed_or_rng)


@dataclass(frozen=True, eq=False)
class TabularMdp:
    """Finite MDP with transition tensor ``(s, a, s')`` and reward ``phi(s) . w``."""

    transition: np.ndarray  # (S, A, S)
    features: np.ndarray  # (S, d)
    reward_weights: np.ndarray  # (d,)
    discount: float
    initial_dist: np.ndarray  # (S,)
    terminal_states: frozenset[int] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "transition", np.asarray(self.transition, dtype=float))
        object.__setattr__(self, "features", np.asarray(self.features, dtype=float))
        object.__setattr__(self, "reward_weights", np.asarray(self.reward_weights, dtype=float))
        object.__setattr__(self, "initial_dist", np.asarray(self.initial_dist, dtype=float))
        object.__setattr__(self, "terminal_states", frozenset(int(s) for s in self.terminal_states))
        self._validate()

    def _validate(self) -> None:
        p = self.transition
        if p.ndim != 3 or p.shape[0] != p.shape[2]:
            raise MdpValidationError(f"transition must have shape (S, A, S), got {p.shape}")
        n, _, _ = p.shape
        if np.any(p < -_ROW_SUM_TOL):
            raise MdpValidationError("transition probabilities must be nonnegative")
        row_sums = p.sum(axis=2)
        bad = np.argwhere(np.abs(row_sums - 1.0) > _ROW_SUM_TOL)
        if bad.size:
            s, a = bad[0]
            raise MdpValidationError(
                f"transition row (s={s}, a={a}) sums to {row_sums[s, a]!r}, expected 1"
            )
        if self.features.ndim != 2 or self.features.shape[0] != n:
            raise MdpValidationError(
                f"features must have shape (S, d) with S={n}, got {self.features.shape}"
            )
        if self.reward_weights.shape != (self.features.shape[1],):
            raise MdpValidationError(
                f"reward_weights must have shape ({self.features.shape[1]},), "
                f"got {self.reward_weights.shape}"
            )
        if not 0.0 <= self.discount < 1.0:
            raise MdpValidationError(f"discount must be in [0, 1), got {self.discount}")
        if self.initial_dist.shape != (n,):
            raise MdpValidationError("initial_dist must have shape (S,)")
        if np.any(self.initial_dist < -_ROW_SUM_TOL) or abs(self.initial_dist.sum() - 1.0) > _ROW_SUM_TOL:
            raise MdpValidationError("initial_dist must be a probability vector")
        for s in self.terminal_states:
            if not 0 <= s < n:
                raise MdpValidationError(f"terminal state {s} out of range")
            if np.any(self.features[s] != 0.0):
                raise MdpValidationError(f"terminal state {s} must have a zero feature vector")
            for a in range(p.shape[1]):
                if abs(p[s, a, s] - 1.0) > _ROW_SUM_TOL:
                    raise MdpValidationError(f"terminal state {s} must self-loop under action {a}")

    @property
    def num_states(self) -> int:
        return self.transition.shape[0]

    @property
    def num_actions(self) -> int:
        return self.transition.shape[1]

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    @cached_property
    def rewards(self) -> np.ndarray:
        """Per-state reward vector ``phi(s) . w``; the same for every action."""
        out = self.features @ self.reward_weights
        out.setflags(write=False)
        return out

    def reward(self, state: int) -> float:
        return float(self.rewards[state])

    def is_terminal(self, state: int) -> bool:
        return state in self.terminal_states

    @cached_property
    def max_abs_value(self) -> float:
        """Crude bound on |Q|: max |r| / (1 - gamma). Used for truncation error budgets."""
        r_max = float(np.max(np.abs(self.rewards))) if self.num_states else 0.0
        return r_max / (1.0 - self.discount)


@dataclass(frozen=True, eq=False)
class TabularPolicy:
    """Stochastic policy as a row-stochastic ``(S, A)`` matrix."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        object.__setattr__(self, "probs", p)
        if p.ndim != 2:
            raise MdpValidationError(f"policy must be a (S, A) matrix, got shape {p.shape}")
        if np.any(p < -_ROW_SUM_TOL):
            raise MdpValidationError("policy probabilities must be nonnegative")
        bad = np.argwhere(np.abs(p.sum(axis=1) - 1.0) > _ROW_SUM_TOL)
        if bad.size:
            raise MdpValidationError(f"policy row {int(bad[0][0])} does not sum to 1")

    @property
    def num_states(self) -> int:
        return self.probs.shape[0]

    @property
    def num_actions(self) -> int:
        return self.probs.shape[1]

    @classmethod
    def uniform(cls, num_states: int, num_actions: int) -> "TabularPolicy":
        return cls(np.full((num_states, num_actions), 1.0 / num_actions))

    @classmethod
    def deterministic(cls, actions: np.ndarray, num_actions: int) -> "TabularPolicy":
        probs = np.zeros((len(actions), num_actions))
        probs[np.arange(len(actions)), np.asarray(actions, dtype=int)] = 1.0
        return cls(probs)

    @classmethod
    def greedy_from_q(cls, q_table: np.ndarray) -> "TabularPolicy":
        return cls.deterministic(np.argmax(q_table, axis=1), q_table.shape[1])


def _iteration_budget(discount: float, tol: float, cap: int) -> int:
    if discount == 0.0:
        return 2
    # Contraction gives |Q_k - Q*| <= gamma^k |Q_0 - Q*|; the +margin absorbs
    # reward scales above 1.
    base = math.ceil(math.log(tol) / math.log(discount))
    return min(cap, base + 200)


def bellman_backup_q(mdp: TabularMdp, policy: TabularPolicy, q_table: np.ndarray) -> np.ndarray:
    """One application of the on-policy scalar backup: r + gamma * E[Q(s', a')]."""
    v = (policy.probs * q_table).sum(axis=1)
    return mdp.rewards[:, None] + mdp.discount * (mdp.transition @ v)


def dp_q_values(
    mdp: TabularMdp,
    policy: TabularPolicy,
    tol: float = 1e-9,
    max_iterations: int = 1_000_000,
) -> np.ndarray:
    """Fixed point of the scalar on-policy backup, within sup-norm ``tol``.

    The stopping rule bounds the distance to the true fixed point (not just
    the step size) via the contraction factor.
    """
    if tol <= 0:
        raise MdpValidationError("tol must be positive")
    _check_shapes(mdp, policy)
    gamma = mdp.discount
    step_tol = tol if gamma == 0.0 else tol * (1.0 - gamma) / gamma
    q = np.zeros((mdp.num_states, mdp.num_actions))
    budget = _iteration_budget(gamma, tol, max_iterations)
    for _ in range(budget):
        q_next = bellman_backup_q(mdp, policy, q)
        delta = float(np.max(np.abs(q_next - q)))
        q = q_next
        if delta <= step_tol:
            return q
    raise ConvergenceError("scalar backup did not converge", delta)


def dp_state_values(mdp: TabularMdp, policy: TabularPolicy, tol: float = 1e-9) -> np.ndarray:
    q = dp_q_values(mdp, policy, tol)
    return (policy.probs * q).sum(axis=1)


def policy_return(mdp: TabularMdp, policy: TabularPolicy, tol: float = 1e-9) -> float:
    """Expected discounted return J = rho . V^pi."""
    return float(mdp.initial_dist @ dp_state_values(mdp, policy, tol))


def successor_backup(
    mdp: TabularMdp, policy: TabularPolicy, table: np.ndarray
) -> np.ndarray:
    """One application of the successor backup: phi(s) + gamma * E[Psi(s', a')]."""
    # E_{s',a'}[Psi(s',a')] with Psi of shape (S, A, d).
    expected = np.einsum("xb,xbd->xd", policy.probs, table)
    future = np.einsum("sax,xd->sad", mdp.transition, expected)
    return mdp.features[:, None, :] + mdp.discount * future


def dp_successor_features(
    mdp: TabularMdp,
    policy: TabularPolicy,
    tol: float = 1e-9,
    max_iterations: int = 1_000_000,
) -> np.ndarray:
    """Fixed point Psi(s,a) = phi(s) + gamma E[Psi(s',a')], sup-norm ``tol`` per coordinate."""
    if tol <= 0:
        raise MdpValidationError("tol must be positive")
    _check_shapes(mdp, policy)
    gamma = mdp.discount
    step_tol = tol if gamma == 0.0 else tol * (1.0 - gamma) / gamma
    psi = np.zeros((mdp.num_states, mdp.num_actions, mdp.feature_dim))
    budget = _iteration_budget(gamma, tol, max_iterations)
    for _ in range(budget):
        psi_next = successor_backup(mdp, policy, psi)
        delta = float(np.max(np.abs(psi_next - psi)))
        psi = psi_next
        if delta <= step_tol:
            return psi
    raise ConvergenceError("successor backup did not converge", delta)


def dp_optimal_policy(
    mdp: TabularMdp,
    tol: float = 1e-9,
    max_iterations: int = 1_000_000,
) -> tuple[TabularPolicy, np.ndarray]:
    """Greedy-deterministic optimal policy and Q* from value iteration."""
    if tol <= 0:
        raise MdpValidationError("tol must be positive")
    gamma = mdp.discount
    step_tol = tol if gamma == 0.0 else tol * (1.0 - gamma) / gamma
    q = np.zeros((mdp.num_states, mdp.num_actions))
    budget = _iteration_budget(gamma, tol, max_iterations)
    for _ in range(budget):
        v = q.max(axis=1)
        q_next = mdp.rewards[:, None] + gamma * (mdp.transition @ v)
        delta = float(np.max(np.abs(q_next - q)))
        q = q_next
        if delta <= step_tol:
            return TabularPolicy.greedy_from_q(q), q
    raise ConvergenceError("value iteration did not converge", delta)


def sample_transition(
    mdp: TabularMdp,
    policy: TabularPolicy,
    state: int,
    rng: int | np.random.Generator | None = None,
) -> tuple[int, float, int, bool]:
    """Draw (action, reward, next_state, done) for one on-policy step.

    ``done`` is true once the chain sits in a terminal state; terminal states
    self-loop, so stepping a terminal state returns it unchanged.
    """
    if not 0 <= state < mdp.num_states:
        raise MdpValidationError(f"state {state} out of range")
    gen = as_rng(rng)
    action = int(gen.choice(mdp.num_actions, p=policy.probs[state]))
    next_state = int(gen.choice(mdp.num_states, p=mdp.transition[state, action]))
    reward = mdp.reward(state)
    done = mdp.is_terminal(next_state)
    return action, reward, next_state, done


def _check_shapes(mdp: TabularMdp, policy: TabularPolicy) -> None:
    if policy.probs.shape != (mdp.num_states, mdp.num_actions):
        raise MdpValidationError(
            f"policy shape {policy.probs.shape} does not match MDP "
            f"({mdp.num_states}, {mdp.num_actions})"
        )


# ---------------------------------------------------------------------------
# Instance generators used by the verification suites and tests.
# ---------------------------------------------------------------------------


def random_mdp(
    num_states: int,
    num_actions: int,
    feature_dim: int,
    discount: float,
    rng: int | np.random.Generator | None = None,
    branching: int | None = None,
) -> TabularMdp:
    """Seeded random MDP with dense Dirichlet rows, or sparse rows of given branching."""
    gen = as_rng(rng)
    if branching is None:
        transition = gen.dirichlet(np.ones(num_states), size=(num_states, num_actions))
    else:
        if not 1 <= branching <= num_states:
            raise MdpValidationError("branching must be in [1, num_states]")
        transition = np.zeros((num_states, num_actions, num_states))
        for s in range(num_states):
            for a in range(num_actions):
                succ = gen.choice(num_states, size=branching, replace=False)
                transition[s, a, succ] = gen.dirichlet(np.ones(branching))
    features = gen.uniform(0.0, 1.0, size=(num_states, feature_dim))
    weights = gen.uniform(-1.0, 1.0, size=feature_dim)
    initial = gen.dirichlet(np.ones(num_states))
    return TabularMdp(
        transition=transition,
        features=features,
        reward_weights=weights,
        discount=discount,
        initial_dist=initial,
    )


def random_policy(
    num_states: int, num_actions: int, rng: int | np.random.Generator | None = None
) -> TabularPolicy:
    gen = as_rng(rng)
    return TabularPolicy(gen.dirichlet(np.ones(num_actions), size=num_states))


def gridworld_mdp(rows: int = 4, cols: int = 4, discount: float = 0.9) -> TabularMdp:
    """Deterministic gridworld: start top-left, unit reward on the goal cell.

    The goal (bottom-right) carries feature 1 and transitions to an absorbing
    zero-feature terminal state, so V*(s) = gamma^manhattan(s, goal).
    Actions: 0=up, 1=down, 2=left, 3=right; off-grid moves stay in place.
    """
    n_cells = rows * cols
    goal = n_cells - 1
    terminal = n_cells  # extra absorbing state
    n = n_cells + 1
    transition = np.zeros((n, 4, n))
    moves = [(-1, 0), (1, 0), (0, -1), (0, 1)]
    for r in range(rows):
        for c in range(cols):
            s = r * cols + c
            if s == goal:
                transition[s, :, terminal] = 1.0
                continue
            for a, (dr, dc) in enumerate(moves):
                nr, nc = r + dr, c + dc
                if 0 <= nr < rows and 0 <= nc < cols:
                    transition[s, a, nr * cols + nc] = 1.0
                else:
                    transition[s, a, s] = 1.0
    transition[terminal, :, terminal] = 1.0
    features = np.zeros((n, 1))
    features[goal, 0] = 1.0
    initial = np.zeros(n)
    initial[0] = 1.0
    return TabularMdp(
        transition=transition,
        features=features,
        reward_weights=np.array([1.0]),
        discount=discount,
        initial_dist=initial,
        terminal_states=frozenset({terminal}),
    )


# ---------------------------------------------------------------------------
# Versioned on-disk format (explicit matrices, reviewable as plain text).
# ---------------------------------------------------------------------------


def mdp_to_dict(mdp: TabularMdp) -> dict:
    return {
        "schema_version": MDP_SCHEMA_VERSION,
        "transition": mdp.transition.tolist(),
        "features": mdp.features.tolist(),
        "reward_weights": mdp.reward_weights.tolist(),
        "discount": mdp.discount,
        "initial_dist": mdp.initial_dist.tolist(),
        "terminal_states": sorted(mdp.terminal_states),
    }


def mdp_from_dict(payload: dict) -> TabularMdp:
    version = payload.get("schema_version")
    if version != MDP_SCHEMA_VERSION:
        raise MdpValidationError(f"unsupported MDP schema_version {version!r}")
    return TabularMdp(
        transition=np.asarray(payload["transition"], dtype=float),
        features=np.asarray(payload["features"], dtype=float),
        reward_weights=np.asarray(payload["reward_weights"], dtype=float),
        discount=float(payload["discount"]),
        initial_dist=np.asarray(payload["initial_dist"], dtype=float),
        terminal_states=frozenset(payload.get("terminal_states", [])),
    )


def save_mdp(mdp: TabularMdp, path: str | Path) -> None:
    Path(path).write_text(json.dumps(mdp_to_dict(mdp), indent=2, sort_keys=True) + "\n")


def load_mdp(path: str | Path) -> TabularMdp:
    return mdp_from_dict(json.loads(Path(path).read_text()))
