"""Optional gateway-backed environment modes, driven through replay transports."""

import json

import pytest

from langac.engine import RunConfig
from langac.envs import CustomerServiceEnv, TwentyQuestionsEnv, judge_guess
from langac.envs.customer import load_bundled_scenario
from langac.gateway import ChatContext, ChatGateway, EndpointConfig, ReplayTransport, build_request
from langac.mdp import MdpValidationError

CONFIG = EndpointConfig(model_name="fixture-model", max_attempts=1)


def gateway_answering(prompt_to_reply: dict[str, str]) -> ChatGateway:
    """Gateway whose transport replies by substring match on the last message."""

    class MatchTransport:
        def complete(self, payload):
            last = payload["messages"][-1]["content"]
            for needle, reply in prompt_to_reply.items():
                if needle in last:
                    return reply
            raise AssertionError(f"no canned reply for: {last[:80]}")

    gateway = ChatGateway(CONFIG, transport=MatchTransport())
    return gateway


class TestLlmJudge:
    def test_judge_accepts_via_gateway(self):
        gateway = gateway_answering({"same object": "Yes, they match."})
        assert judge_guess("couch", "sofa", gateway=gateway)

    def test_judge_rejects_via_gateway(self):
        gateway = gateway_answering({"same object": "No."})
        assert not judge_guess("banana", "sofa", gateway=gateway)


class TestLlmOracle:
    def test_free_text_question_answered_by_gateway(self):
        gateway = gateway_answering({"yes/no question": "Yes"})
        env = TwentyQuestionsEnv(hidden_object="raisin", oracle_gateway=gateway)
        env.reset(seed=0)
        state = env.step({"name": "ask", "arguments": {"question": "Is it dried fruit?"}})
        assert state.observation == "yes"

    def test_attribute_path_still_works_with_oracle(self):
        gateway = gateway_answering({})
        env = TwentyQuestionsEnv(hidden_object="raisin", oracle_gateway=gateway)
        env.reset(seed=0)
        state = env.step({"name": "ask", "arguments": {"attribute": "edible"}})
        assert state.observation == "yes"


class TestSimulatedUser:
    def test_simulated_customer_talks_then_leaves(self):
        replies = iter(["I want to swap the red mug for the blue one.", "[leaves]"])

        class SeqTransport:
            def complete(self, payload):
                return next(replies)

        gateway = ChatGateway(CONFIG, transport=SeqTransport())
        env = CustomerServiceEnv(load_bundled_scenario("exchange"), user_gateway=gateway)
        env.reset()
        state = env.step({"name": "respond", "arguments": {"message": "How can I help?"}})
        assert "swap the red mug" in state.observation and not state.done
        state = env.step({"name": "respond", "arguments": {"message": "Done, anything else?"}})
        assert state.done


class TestRunConfigFile:
    def test_load_from_file(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"iterations": 3, "critic_mode": "exact", "replay_alpha": 0.1}))
        config = RunConfig.from_file(path)
        assert config.iterations == 3

    def test_unknown_field_rejected(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"iterationz": 3}))
        with pytest.raises(MdpValidationError, match="iterationz"):
            RunConfig.from_file(path)

    def test_invalid_value_rejected(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"critic_mode": "psychic"}))
        with pytest.raises(MdpValidationError, match="critic_mode"):
            RunConfig.from_file(path)
