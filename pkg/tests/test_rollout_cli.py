import json
from pathlib import Path

import pytest

from langac.cli import EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_OK, main
from langac.envs import TwentyQuestionsEnv
from langac.envs.agents import BisectionGuesser
from langac.gateway import ChatGateway, EndpointConfig, ReplayTransport
from langac.rollout import GatewayPolicy, ScriptedPolicy, run_episode, run_episodes

FIXTURES = Path(__file__).parent / "fixtures"


def twentyq_gateway() -> ChatGateway:
    return ChatGateway(
        EndpointConfig(model_name="fixture-model", max_attempts=2, backoff_seconds=0.0),
        transport=ReplayTransport.from_path(FIXTURES / "twentyq_cassette.jsonl"),
    )


class TestRollout:
    def test_scripted_episode_records_contexts(self):
        env = TwentyQuestionsEnv(hidden_object="raisin")
        policy = ScriptedPolicy(BisectionGuesser(env.attribute_table), thought="bisect")
        result = run_episode(env, policy, episode_id="t0", seed=0)
        assert result.total_reward == 1.0
        first = result.transitions[0]
        assert first.context[0][0] == "user"
        assert first.thought == "bisect"
        # Contexts grow by one action/observation pair per step.
        assert len(result.transitions[1].context) == len(first.context) + 2

    def test_stubbed_gateway_rollout_matches_fixture_winrate(self):
        env = TwentyQuestionsEnv()
        results = run_episodes(env, GatewayPolicy(twentyq_gateway()), 10, seed=0, max_steps=25)
        winrate = sum(r.total_reward for r in results) / len(results)
        assert winrate == pytest.approx(0.7)

    def test_gateway_rollout_is_deterministic(self):
        outcomes = []
        for _ in range(2):
            env = TwentyQuestionsEnv()
            results = run_episodes(env, GatewayPolicy(twentyq_gateway()), 10, seed=0, max_steps=25)
            outcomes.append([r.total_reward for r in results])
        assert outcomes[0] == outcomes[1]


class TestCli:
    def test_verify_theory_fast(self, tmp_path):
        out = tmp_path / "report"
        code = main(["verify-theory", "--fast", "--out", str(out)])
        assert code == EXIT_OK
        lines = (out / "report.jsonl").read_text().splitlines()
        assert all(json.loads(line)["passed"] for line in lines)
        assert (out / "rank_scatter.png").exists()
        assert (out / "learning_curves.png").exists()
        assert (out / "residuals.png").exists()

    def test_verify_theory_report_bytes_are_reproducible(self, tmp_path):
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            assert main(["verify-theory", "--fast", "--out", str(out)]) == EXIT_OK
            outs.append((out / "report.jsonl").read_bytes())
        assert outs[0] == outs[1]

    def test_eval_scripted_agents(self, tmp_path):
        out = tmp_path / "eval"
        code = main([
            "eval", "--env", "twentyq", "--agent", "bisection",
            "--episodes", "5", "--seeds", "0,1,2", "--out", str(out),
        ])
        assert code == EXIT_OK
        rows = [json.loads(line) for line in (out / "metrics.jsonl").read_text().splitlines()]
        seeds = [row["seed"] for row in rows]
        assert seeds == [0, 1, 2, "mean"]
        assert all(row["success_rate"] == 1.0 for row in rows)
        assert (out / "success_rates.png").exists()

    def test_eval_zero_episodes_ok(self, tmp_path):
        out = tmp_path / "eval0"
        code = main([
            "eval", "--env", "twentyq", "--agent", "bisection",
            "--episodes", "0", "--seeds", "0", "--out", str(out),
        ])
        assert code == EXIT_OK

    def test_rollout_with_cassette_writes_transitions(self, tmp_path):
        out = tmp_path / "rollout"
        code = main([
            "rollout", "--env", "twentyq", "--agent", "gateway",
            "--model", "fixture-model",
            "--cassette", str(FIXTURES / "twentyq_cassette.jsonl"),
            "--episodes", "10", "--seed", "0", "--out", str(out),
        ])
        assert code == EXIT_OK
        episodes = [json.loads(line) for line in (out / "episodes.jsonl").read_text().splitlines()]
        assert len(episodes) == 10
        winrate = sum(e["total_reward"] for e in episodes) / len(episodes)
        assert winrate == pytest.approx(0.7)
        assert (out / "transitions.jsonl").exists()

    def test_emit_command_round_trip(self, tmp_path):
        out = tmp_path / "emit"
        code = main([
            "emit", "--buffer", str(FIXTURES / "customer_transitions.jsonl"),
            "--model", "fixture-model",
            "--cassette", str(FIXTURES / "emit_cassette.jsonl"),
            "--num", "4", "--seed", "0", "--out", str(out),
        ])
        assert code == EXIT_OK
        assert (out / "pairs.jsonl").read_bytes() == (FIXTURES / "golden_pairs.jsonl").read_bytes()

    def test_config_file_with_flag_override(self, tmp_path):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"episodes": 3, "agent": "bisection", "env": "twentyq"}))
        out = tmp_path / "eval"
        code = main(["eval", "--config", str(config), "--seeds", "0", "--episodes", "2",
                     "--out", str(out)])
        assert code == EXIT_OK
        rows = [json.loads(line) for line in (out / "metrics.jsonl").read_text().splitlines()]
        assert rows[0]["episodes"] == 2  # flag wins over config

    def test_missing_config_file_is_config_error(self):
        assert main(["eval", "--config", "/does/not/exist.json"]) == EXIT_CONFIG

    def test_missing_env_is_config_error(self, tmp_path):
        assert main(["eval", "--out", str(tmp_path)]) == EXIT_CONFIG

    def test_bad_buffer_path_is_config_error(self):
        assert main(["emit", "--buffer", "/does/not/exist.jsonl"]) == EXIT_CONFIG
