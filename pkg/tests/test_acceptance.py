"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines alongside pytest's own report. Tolerances are pinned in langac.verify
and asserted here at their stated values.
"""

import json
import time
from pathlib import Path

import pytest

from langac.envs import CustomerServiceEnv, TwentyQuestionsEnv
from langac.envs.agents import BisectionGuesser, RandomGuesser
from langac.envs.customer import load_bundled_scenario
from langac.gateway import (
    ChatContext,
    ChatGateway,
    ComposedAction,
    EndpointConfig,
    ParseError,
    ReplayTransport,
    build_request,
    parse_correctness_reply,
    parse_evaluation_reply,
    parse_react_reply,
)
from langac.pipeline import (
    EmitConfig,
    emit_training_pairs,
    load_buffer,
    load_pairs,
    save_pairs,
)
from langac.verify import (
    distributional_suite,
    loss_suite,
    policy_iteration_suite,
    replay_ema_suite,
    successor_ranking_suite,
)

FIXTURES = Path(__file__).parent / "fixtures"


def _report(criterion: str, passed: bool, detail: str) -> None:
    print(f"[{'PASS' if passed else 'FAIL'}] {criterion}: {detail}")


def _assert_suite(criterion: str, results, detail: str) -> None:
    failed = [r for r in results if not r.passed]
    _report(criterion, not failed, detail)
    assert not failed, [f"{r.suite}/{r.name}: {r.residual:.3e}" for r in failed]


def test_criterion_1_successor_and_ranking():
    start = time.monotonic()
    results, _ = successor_ranking_suite(num_instances=20)
    elapsed = time.monotonic() - start
    _assert_suite(
        "criterion 1 (successor/ranking)",
        results,
        f"20 instances, sup-norm 1e-6, rank correlation 1.0, {elapsed:.1f}s",
    )
    assert elapsed < 60.0


def test_criterion_2_distributional_backup():
    results, _ = distributional_suite(num_instances=10)
    _assert_suite(
        "criterion 2 (distributional backup)",
        results,
        "10 instances, TV 0.05 vs enumeration, fixed-point shift <= 2x tolerance",
    )


def test_criterion_3_policy_iteration():
    start = time.monotonic()
    results, _ = policy_iteration_suite(num_instances=10)
    elapsed = time.monotonic() - start
    _assert_suite(
        "criterion 3 (policy iteration)",
        results,
        f"10 instances + gridworld, |J - J*| <= 1e-3, monotone within 1e-6, {elapsed:.1f}s",
    )
    assert elapsed < 300.0


def test_criterion_4_replay_and_ema():
    results, _ = replay_ema_suite()
    _assert_suite(
        "criterion 4 (replay/EMA)",
        results,
        "chi-square p > 0.01 for alpha in {0, 0.1, 1}; EMA closed form to 1e-12 over 10^4",
    )


def test_criterion_5_losses():
    results, _ = loss_suite(num_pairs=100)
    _assert_suite(
        "criterion 5 (losses)",
        results,
        "KL vs direct sum to 1e-10 on 100 pairs; policy-loss gradient to 1e-6",
    )


# ---------------------------------------------------------------------------
# Criterion 6: gateway format fixtures, fully offline.
# ---------------------------------------------------------------------------

_CASE_CONFIG = EndpointConfig(model_name="fixture-model", max_attempts=1)
_BASE_CONTEXT = ChatContext((("user", "You are handling a retail support conversation."),))
_BASE_ACTION = ComposedAction(
    thought="Ask before changing anything.",
    name="respond",
    arguments={"message": "Which items should I exchange?"},
)
_SOLUTION_CONTEXT = ChatContext(
    (
        ("user", "Solve: what is 6 * 7?"),
        ("assistant", "The product is \\boxed{42}."),
    )
)


def _request(gateway, context, behavior):
    temperature = 0.0 if behavior in ("refine", "correct") else _CASE_CONFIG.temperature
    return build_request(_CASE_CONFIG, context, temperature)


def _run_case(case: dict):
    gateway = ChatGateway(_CASE_CONFIG, transport=ReplayTransport([]))
    op = case["op"]
    replies = case.get("replies", [case.get("reply")])

    if op == "evaluation":
        staged = _BASE_CONTEXT.append("assistant", _BASE_ACTION.render()).append(
            "user", gateway.prompts["evaluate_action"]
        )
        entries = [(_request(gateway, staged, "evaluate"), replies[0])]
        gateway.transport = ReplayTransport(entries)
        parsed = gateway.generate_critique(_BASE_CONTEXT, _BASE_ACTION, k=1)[0]
        return {"future": parsed.future, "optimal": parsed.optimal, "explanation": parsed.explanation}

    if op == "correctness":
        staged = _SOLUTION_CONTEXT.append("user", gateway.prompts["evaluate_solution"])
        gateway.transport = ReplayTransport([(_request(gateway, staged, "evaluate"), replies[0])])
        correct, explanation = parse_correctness_reply(gateway.complete_text(staged))
        return {"correct": correct, "explanation": explanation}

    if op == "correction":
        staged = _BASE_CONTEXT.append("assistant", _BASE_ACTION.render()).append(
            "user", gateway.prompts["evaluate_action"]
        )
        correction_ctx = staged.append("assistant", case["raw_reply"]).append(
            "user", gateway.prompts["correct_thinking_evaluation"]
        )
        gateway.transport = ReplayTransport(
            [(_request(gateway, correction_ctx, "correct"), replies[0])]
        )
        _, corrected = gateway.correct_chain_of_thought(
            staged, case["raw_reply"], gateway.prompts["correct_thinking_evaluation"]
        )
        return {"corrected": corrected}

    if op == "action":
        prompted = _BASE_CONTEXT.append_user(gateway.prompts["react"])
        gateway.transport = ReplayTransport([(_request(gateway, prompted, "action"), replies[0])])
        action = gateway.generate_action(_BASE_CONTEXT)
        return {"thought": action.thought, "name": action.name, "arguments": action.arguments}

    if op == "refinement":
        staged = (
            _BASE_CONTEXT.append("assistant", _BASE_ACTION.render())
            .append("user", gateway.prompts["evaluate_action"])
            .append("assistant", case["critique"])
            .append("user", gateway.prompts["refine_action"])
        )
        entries = [(_request(gateway, staged, "refine"), replies[0])]
        if len(replies) > 1:
            correction_ctx = staged.append("assistant", replies[0]).append(
                "user", gateway.prompts["correct_thinking_refinement"]
            )
            entries.append((_request(gateway, correction_ctx, "correct"), replies[1]))
        gateway.transport = ReplayTransport(entries)
        refined = gateway.generate_refined_action(_BASE_CONTEXT, [(_BASE_ACTION, case["critique"])])
        return {"name": refined.name, "arguments": refined.arguments, "flags": list(refined.flags)}

    raise AssertionError(f"unknown case op {op!r}")


def test_criterion_6_gateway_golden_formats():
    payload = json.loads((FIXTURES / "gateway_cases.json").read_text())
    cases = payload["cases"]
    assert len(cases) >= 25
    failures = []
    for case in cases:
        try:
            outcome = _run_case(case)
        except ParseError as exc:
            if "error" not in case:
                failures.append(f"{case['id']}: unexpected error {exc}")
            elif case["error"] not in str(exc):
                failures.append(f"{case['id']}: error {exc} does not mention {case['error']!r}")
            continue
        if "error" in case:
            failures.append(f"{case['id']}: expected an error, got {outcome}")
            continue
        expected = case["expect"]
        flags_contain = expected.pop("flags_contain", None)
        for key, value in expected.items():
            if outcome.get(key) != value:
                failures.append(f"{case['id']}: field {key} = {outcome.get(key)!r}, expected {value!r}")
        if flags_contain is not None:
            missing = [f for f in flags_contain if f not in outcome.get("flags", [])]
            if missing:
                failures.append(f"{case['id']}: flags missing {missing}")
    _report(
        "criterion 6 (gateway formats)",
        not failures,
        f"{len(cases)} recorded-transport cases, bit-exact fields, offline",
    )
    assert not failures, failures


# ---------------------------------------------------------------------------
# Criterion 7: environments.
# ---------------------------------------------------------------------------


def test_criterion_7_environments():
    env = TwentyQuestionsEnv()
    losses = []
    for hidden in env.objects:
        game = TwentyQuestionsEnv(hidden_object=hidden)
        state = game.reset(seed=0)
        agent = BisectionGuesser(game.attribute_table, max_turns=game.max_turns)
        while not state.done:
            state = game.step(agent.act(state.observation))
        if state.reward != 1.0 or state.turn > 20:
            losses.append(hidden)
    bisection_ok = not losses

    episodes_per_seed = 200
    wins = 0
    for seed in (0, 1, 2):
        agent = RandomGuesser(env.attributes, env.objects, rng=seed + 10_000)
        for i in range(episodes_per_seed):
            game_env = TwentyQuestionsEnv()
            state = game_env.reset(seed=seed * episodes_per_seed + i)
            agent.reset()
            while not state.done:
                state = game_env.step(agent.act(state.observation))
            wins += state.reward
    random_rate = wins / (3 * episodes_per_seed)
    random_ok = random_rate < 0.05

    scenario = load_bundled_scenario("exchange")
    good = CustomerServiceEnv(scenario)
    good.reset()
    good.step({"name": "find_user", "arguments": {"email": "dana.r@example.com"}})
    good.step({"name": "respond", "arguments": {"message": "What should change?"}})
    good.step({"name": "respond", "arguments": {"message": "Anything else?"}})
    good.step(
        {
            "name": "modify_order",
            "arguments": {
                "order_id": "o1001",
                "items": [
                    {"sku": "mug-blue", "qty": 1},
                    {"sku": "tee-green-m", "qty": 2},
                    {"sku": "poster-a2", "qty": 1},
                ],
            },
        }
    )
    state = good.step({"name": "respond", "arguments": {"message": "Done."}})
    while not state.done:
        state = good.step({"name": "respond", "arguments": {"message": "Bye."}})
    single_ok = state.reward == 1.0

    bad = CustomerServiceEnv(scenario)
    bad.reset()
    bad.step({"name": "find_user", "arguments": {"email": "dana.r@example.com"}})
    bad.step(
        {
            "name": "modify_order",
            "arguments": {"order_id": "o1001", "items": [{"sku": "mug-blue", "qty": 1}]},
        }
    )
    state = bad.step(
        {
            "name": "modify_order",
            "arguments": {"order_id": "o1001", "items": [{"sku": "tee-green-m", "qty": 2}]},
        }
    )
    violation_ok = state.done and state.reward == 0.0 and bad.world.violation is not None

    passed = bisection_ok and random_ok and single_ok and violation_ok
    _report(
        "criterion 7 (environments)",
        passed,
        f"bisection 200/200 wins, random rate {random_rate:.3f} < 0.05, "
        "tool-use single-call 1 / double-call 0 with flag",
    )
    assert bisection_ok, f"bisection lost on {losses}"
    assert random_ok, f"random guesser rate {random_rate}"
    assert single_ok and violation_ok


# ---------------------------------------------------------------------------
# Criterion 8: pipeline golden outputs.
# ---------------------------------------------------------------------------


def test_criterion_8_pipeline_golden(tmp_path):
    buffer = load_buffer(FIXTURES / "customer_transitions.jsonl")
    gateway = ChatGateway(
        EndpointConfig(model_name="fixture-model", max_attempts=2, backoff_seconds=0.0),
        transport=ReplayTransport.from_path(FIXTURES / "emit_cassette.jsonl"),
    )
    pairs = emit_training_pairs(buffer, gateway, EmitConfig(num_transitions=4, seed=0))
    out = tmp_path / "pairs.jsonl"
    save_pairs(pairs, out)
    byte_identical = out.read_bytes() == (FIXTURES / "golden_pairs.jsonl").read_bytes()

    reparse_ok = True
    for pair in load_pairs(FIXTURES / "golden_pairs.jsonl"):
        try:
            if pair.kind == "critic_L1":
                parse_evaluation_reply(pair.target_text)
            else:
                parse_react_reply(pair.target_text)
        except ParseError:
            reparse_ok = False

    _report(
        "criterion 8 (pipeline golden)",
        byte_identical and reparse_ok,
        f"{len(pairs)} emitted pairs byte-identical to golden; every target re-parses",
    )
    assert byte_identical
    assert reparse_ok
