"""Desk-scale verification suites: every theory-level claim against its oracle.

Each suite runs on seeded random instances and returns structured check
results with measured residuals and pinned tolerances. The CLI renders them
as a pass/fail report; the test suite asserts them one by one. Tolerances
live here, next to the checks, and nowhere else.

Suite map:
  * successor/ranking — TD-trained successor representations against the
    exact solver, and critic scalars rank-aligned with exact Q-values;
  * distributional — fitted description models against brute-force rollout
    enumeration, and backup invariance at the fixed point;
  * policy-iteration — the full loop reaching the value-iteration optimum
    with monotone per-iteration returns;
  * replay/EMA — chi-square goodness of prioritized sampling and the EMA
    closed form;
  * losses — the KL loss against direct summation and the policy-loss
    gradient against finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .descriptions import (
    DescriptionDistribution,
    RolloutDescription,
    SuccessorCritic,
    fit_description_model,
    enumerate_rollout_distribution,
    language_bellman_backup,
    train_successor_td,
    tv_distance,
)
from .engine import (
    EmaState,
    ReplayBuffer,
    RunConfig,
    compute_l1,
    compute_l2,
    ema_update,
    l2_logit_gradient,
    run_nlac,
    softmax,
)
from .mdp import (
    TabularPolicy,
    dp_optimal_policy,
    dp_q_values,
    dp_successor_features,
    gridworld_mdp,
    policy_return,
    random_mdp,
    random_policy,
)

SUCCESSOR_SUP_TOL = 1e-6
RANK_CORRELATION_MIN = 1.0
DISTRIBUTION_TV_TOL = 0.05
FIT_DIVERGENCE_TOL = 1e-9
BACKUP_SHIFT_TOL = 2 * FIT_DIVERGENCE_TOL
POLICY_J_TOL = 1e-3
MONOTONE_J_TOL = 1e-6
CHI_SQUARE_MIN_P = 0.01
EMA_CLOSED_FORM_TOL = 1e-12
L1_DIRECT_TOL = 1e-10
L2_GRADIENT_TOL = 1e-6


@dataclass(frozen=True)
class CheckResult:
    suite: str
    name: str
    passed: bool
    residual: float
    tolerance: float
    detail: dict = field(default_factory=dict)

    def to_record(self) -> dict:
        return {
            "suite": self.suite,
            "check": self.name,
            "passed": self.passed,
            "residual": self.residual,
            "tolerance": self.tolerance,
            **self.detail,
        }


# ---------------------------------------------------------------------------
# Suite 1: successor representations and critique ranking.
# ---------------------------------------------------------------------------


def successor_ranking_suite(
    num_instances: int = 20, base_seed: int = 100
) -> tuple[list[CheckResult], dict]:
    results = []
    scatter_s, scatter_q = [], []
    for i in range(num_instances):
        rng = np.random.default_rng(base_seed + i)
        num_states = int(rng.integers(5, 21))
        num_actions = int(rng.integers(2, 6))
        dim = int(rng.integers(2, 9))
        gamma = 0.9 if i % 2 else 0.5
        mdp = random_mdp(num_states, num_actions, dim, gamma, rng)
        policy = random_policy(num_states, num_actions, rng)

        trained = train_successor_td(mdp, policy, learning_rate=0.5, tol=1e-11)
        exact = dp_successor_features(mdp, policy, tol=1e-12)
        sup_gap = float(np.max(np.abs(trained - exact)))
        results.append(
            CheckResult(
                suite="successor",
                name=f"td_matches_dp_seed{base_seed + i}",
                passed=sup_gap <= SUCCESSOR_SUP_TOL,
                residual=sup_gap,
                tolerance=SUCCESSOR_SUP_TOL,
                detail={"states": num_states, "actions": num_actions, "gamma": gamma},
            )
        )

        critic = SuccessorCritic(mdp, policy, trained)
        sentiments = np.array(
            [critic.sentiment(s, a) for s in range(num_states) for a in range(num_actions)]
        )
        q_values = dp_q_values(mdp, policy, tol=1e-12).ravel()
        # Identical rank vectors are Spearman 1.0 by definition; going through
        # the rank-Pearson formula only adds float noise at the 1e-16 level.
        if np.array_equal(stats.rankdata(sentiments), stats.rankdata(q_values)):
            rho = 1.0
        else:
            rho = float(stats.spearmanr(sentiments, q_values).statistic)
        results.append(
            CheckResult(
                suite="successor",
                name=f"rank_correlation_seed{base_seed + i}",
                passed=rho >= RANK_CORRELATION_MIN,
                residual=1.0 - rho,
                tolerance=0.0,
                detail={"spearman": rho},
            )
        )
        scatter_s.append(sentiments)
        scatter_q.append(q_values)
    artifacts = {
        "sentiments": np.concatenate(scatter_s),
        "q_values": np.concatenate(scatter_q),
    }
    return results, artifacts


# ---------------------------------------------------------------------------
# Suite 2: description distributions against brute-force enumeration.
# ---------------------------------------------------------------------------


def distributional_suite(
    num_instances: int = 10, base_seed: int = 300
) -> tuple[list[CheckResult], dict]:
    results = []
    for i in range(num_instances):
        rng = np.random.default_rng(base_seed + i)
        num_states = int(rng.integers(3, 7))
        num_actions = int(rng.integers(2, 4))
        horizon = int(rng.integers(2, 5))
        gamma = 0.9 if i % 2 else 0.5
        mdp = random_mdp(num_states, num_actions, 3, gamma, rng, branching=2)
        policy = random_policy(num_states, num_actions, rng)

        model = fit_description_model(
            mdp, policy, horizon=horizon, divergence_tol=FIT_DIVERGENCE_TOL
        )
        worst_tv = 0.0
        worst_shift = 0.0
        for s in range(num_states):
            for a in range(num_actions):
                oracle = enumerate_rollout_distribution(mdp, policy, s, a, horizon)
                worst_tv = max(worst_tv, tv_distance(model.distribution(s, a), oracle))
                backed = language_bellman_backup(model, mdp, policy, s, a, mode="exact")
                worst_shift = max(worst_shift, tv_distance(backed, model.distribution(s, a)))
        results.append(
            CheckResult(
                suite="distributional",
                name=f"model_matches_enumeration_seed{base_seed + i}",
                passed=worst_tv <= DISTRIBUTION_TV_TOL,
                residual=worst_tv,
                tolerance=DISTRIBUTION_TV_TOL,
                detail={"states": num_states, "horizon": horizon},
            )
        )
        results.append(
            CheckResult(
                suite="distributional",
                name=f"backup_fixed_point_seed{base_seed + i}",
                passed=worst_shift <= BACKUP_SHIFT_TOL,
                residual=worst_shift,
                tolerance=BACKUP_SHIFT_TOL,
            )
        )
    return results, {}


# ---------------------------------------------------------------------------
# Suite 3: the full loop against value iteration.
# ---------------------------------------------------------------------------


def policy_iteration_suite(
    num_instances: int = 10, base_seed: int = 500, iterations: int = 15
) -> tuple[list[CheckResult], dict]:
    results = []
    curves: dict[str, list[float]] = {}
    instances = [
        (f"random_seed{base_seed + i}", None, base_seed + i) for i in range(num_instances)
    ] + [("gridworld_4x4", gridworld_mdp(4, 4, 0.9), 0)]
    for name, mdp, seed in instances:
        if mdp is None:
            rng = np.random.default_rng(seed)
            num_states = int(rng.integers(4, 13))
            num_actions = int(rng.integers(2, 5))
            mdp = random_mdp(num_states, num_actions, 4, 0.9, rng)
        config = RunConfig(iterations=iterations, critic_mode="exact", seed=seed)
        policy, diagnostics = run_nlac(mdp, config)
        j_values = [d.j_value for d in diagnostics]
        curves[name] = j_values
        optimal, _ = dp_optimal_policy(mdp, tol=1e-12)
        j_star = policy_return(mdp, optimal, tol=1e-12)
        gap = abs(j_values[-1] - j_star)
        worst_drop = max(
            (a - b for a, b in zip(j_values, j_values[1:])), default=0.0
        )
        results.append(
            CheckResult(
                suite="policy_iteration",
                name=f"{name}_reaches_optimum",
                passed=gap <= POLICY_J_TOL,
                residual=gap,
                tolerance=POLICY_J_TOL,
                detail={"j_final": j_values[-1], "j_star": j_star},
            )
        )
        results.append(
            CheckResult(
                suite="policy_iteration",
                name=f"{name}_monotone_j",
                passed=worst_drop <= MONOTONE_J_TOL,
                residual=max(worst_drop, 0.0),
                tolerance=MONOTONE_J_TOL,
            )
        )
    return results, {"curves": curves}


# ---------------------------------------------------------------------------
# Suite 4: replay sampling statistics and EMA closed form.
# ---------------------------------------------------------------------------


def replay_ema_suite(
    draws: int = 100_000, base_seed: int = 700
) -> tuple[list[CheckResult], dict]:
    results = []
    priorities = [0.5, 1.0, 2.0, 3.0, 4.0]
    for alpha in (0.0, 0.1, 1.0):
        buffer = ReplayBuffer(capacity=len(priorities), alpha=alpha)
        for p in priorities:
            buffer.add(f"record_p{p}", priority=p)
        indices = buffer.sample_indices(draws, np.random.default_rng(base_seed))
        observed = np.bincount(indices, minlength=len(priorities))
        expected = buffer.sampling_probabilities() * draws
        p_value = float(stats.chisquare(observed, expected).pvalue)
        results.append(
            CheckResult(
                suite="replay_ema",
                name=f"chi_square_alpha_{alpha:g}",
                passed=p_value > CHI_SQUARE_MIN_P,
                residual=p_value,
                tolerance=CHI_SQUARE_MIN_P,
                detail={"interpretation": "residual is the p-value; must exceed tolerance"},
            )
        )

    tau = 0.005
    updates = 10_000
    current = np.array([0.8, -0.3, 1.7])
    target0 = np.array([-1.0, 2.0, 0.25])
    state = EmaState(current=current, target=target0.copy(), tau=tau)
    for _ in range(updates):
        state = ema_update(state)
    closed_form = current + (1.0 - tau) ** updates * (target0 - current)
    gap = float(np.max(np.abs(state.target - closed_form)))
    results.append(
        CheckResult(
            suite="replay_ema",
            name="ema_closed_form_10k",
            passed=gap <= EMA_CLOSED_FORM_TOL,
            residual=gap,
            tolerance=EMA_CLOSED_FORM_TOL,
        )
    )
    return results, {}


# ---------------------------------------------------------------------------
# Suite 5: losses against independent computations.
# ---------------------------------------------------------------------------


def _random_distribution_pair(rng: np.random.Generator) -> tuple[DescriptionDistribution, DescriptionDistribution]:
    size = int(rng.integers(2, 9))
    descriptions = [
        RolloutDescription(
            steps=((int(rng.integers(0, 5)), int(rng.integers(0, 3))), (j, 0)),
            discount=0.9,
        )
        for j in range(size)
    ]
    p = rng.dirichlet(np.ones(size))
    q = rng.dirichlet(np.ones(size))
    target = DescriptionDistribution(dict(zip(descriptions, p)))
    model = DescriptionDistribution(dict(zip(descriptions, q)))
    return target, model


def loss_suite(num_pairs: int = 100, base_seed: int = 900) -> tuple[list[CheckResult], dict]:
    import math

    results = []
    rng = np.random.default_rng(base_seed)
    worst_l1 = 0.0
    for _ in range(num_pairs):
        target, model = _random_distribution_pair(rng)
        computed = compute_l1(target, model)
        # Independent oracle: plain python summation over the support.
        direct = sum(
            p * math.log(p / model.probability(d)) for d, p in target if p > 0
        )
        worst_l1 = max(worst_l1, abs(computed - direct))
    results.append(
        CheckResult(
            suite="losses",
            name="l1_matches_direct_sum",
            passed=worst_l1 <= L1_DIRECT_TOL,
            residual=worst_l1,
            tolerance=L1_DIRECT_TOL,
            detail={"pairs": num_pairs},
        )
    )

    worst_grad = 0.0
    eps = 1e-6
    for _ in range(50):
        num_actions = int(rng.integers(2, 6))
        logits = rng.normal(size=num_actions)
        refined = int(rng.integers(num_actions))
        grad = l2_logit_gradient(logits, refined)
        for j in range(num_actions):
            bumped_up, bumped_down = logits.copy(), logits.copy()
            bumped_up[j] += eps
            bumped_down[j] -= eps
            fd = (
                -np.log(softmax(bumped_up)[refined])
                + np.log(softmax(bumped_down)[refined])
            ) / (2 * eps)
            worst_grad = max(worst_grad, abs(float(grad[j]) - float(fd)))
    results.append(
        CheckResult(
            suite="losses",
            name="l2_gradient_matches_finite_differences",
            passed=worst_grad <= L2_GRADIENT_TOL,
            residual=worst_grad,
            tolerance=L2_GRADIENT_TOL,
        )
    )

    # Spot values: certainty costs nothing, a coin flip costs log 2.
    policy = TabularPolicy(np.array([[1.0, 0.0], [0.5, 0.5]]))
    spot = max(
        abs(compute_l2(policy, 0, 0) - 0.0),
        abs(compute_l2(policy, 1, 1) - np.log(2.0)),
    )
    results.append(
        CheckResult(
            suite="losses",
            name="l2_spot_values",
            passed=spot <= 1e-12,
            residual=spot,
            tolerance=1e-12,
        )
    )
    return results, {}


def run_all_suites(fast: bool = False) -> tuple[list[CheckResult], dict]:
    """Run every suite; ``fast`` shrinks instance counts for smoke runs."""
    scale = 3 if fast else None
    all_results: list[CheckResult] = []
    artifacts: dict = {}
    for suite, kwargs in (
        (successor_ranking_suite, {"num_instances": scale or 20}),
        (distributional_suite, {"num_instances": scale or 10}),
        (policy_iteration_suite, {"num_instances": scale or 10}),
        (replay_ema_suite, {}),
        (loss_suite, {"num_pairs": 20 if fast else 100}),
    ):
        results, extra = suite(**kwargs)
        all_results.extend(results)
        artifacts.update(extra)
    return all_results, artifacts
