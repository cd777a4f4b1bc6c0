import copy
import json

import pytest

from langac.envs import (
    CustomerServiceEnv,
    EnvError,
    EnvState,
    MathAnswerEnv,
    TwentyQuestionsEnv,
    extract_boxed,
    judge_guess,
    load_object_table,
    make_env,
)
from langac.envs.agents import BisectionGuesser, RandomGuesser
from langac.envs.customer import load_bundled_scenario


class TestEnvState:
    def test_reward_zero_until_done(self):
        with pytest.raises(EnvError):
            EnvState(observation="o", turn=1, done=False, reward=1.0)

    def test_terminal_reward_binary(self):
        with pytest.raises(EnvError):
            EnvState(observation="o", turn=1, done=True, reward=0.5)


class TestTwentyQuestions:
    def test_reset_is_deterministic(self):
        env = TwentyQuestionsEnv()
        a = env.reset(seed=4)
        hidden_a = env.world.hidden_object
        b = env.reset(seed=4)
        assert a == b and env.world.hidden_object == hidden_a

    def test_reset_turn_zero_not_done(self):
        state = TwentyQuestionsEnv().reset(seed=0)
        assert state.turn == 0 and not state.done and state.reward == 0.0

    def test_correct_guess_mid_game_wins(self):
        env = TwentyQuestionsEnv(hidden_object="raisin")
        env.reset(seed=0)
        for attribute in ("alive", "edible", "fruit", "sweet"):
            state = env.step({"name": "ask", "arguments": {"attribute": attribute}})
        state = env.step({"name": "guess", "arguments": {"object": "raisin"}})
        assert state.done and state.reward == 1.0 and state.turn == 5

    def test_wrong_guess_ends_episode_with_zero(self):
        env = TwentyQuestionsEnv(hidden_object="raisin")
        env.reset(seed=0)
        state = env.step({"name": "guess", "arguments": {"object": "grape"}})
        assert state.done and state.reward == 0.0

    def test_turn_limit_ends_episode(self):
        env = TwentyQuestionsEnv(hidden_object="dog")
        state = env.reset(seed=0)
        for _ in range(20):
            assert not state.done
            state = env.step({"name": "ask", "arguments": {"attribute": "alive"}})
        assert state.done and state.reward == 0.0 and state.turn == 20

    def test_unknown_attribute_is_error_observation(self):
        env = TwentyQuestionsEnv(hidden_object="dog")
        env.reset(seed=0)
        state = env.step({"name": "ask", "arguments": {"attribute": "phlogiston"}})
        assert state.observation.startswith("error:") and not state.done

    def test_stepping_done_episode_raises(self):
        env = TwentyQuestionsEnv(hidden_object="dog")
        env.reset(seed=0)
        env.step({"name": "guess", "arguments": {"object": "dog"}})
        with pytest.raises(EnvError):
            env.step({"name": "ask", "arguments": {"attribute": "alive"}})

    def test_oracle_answers_from_table(self):
        env = TwentyQuestionsEnv(hidden_object="dog")
        env.reset(seed=0)
        assert env.step({"name": "ask", "arguments": {"attribute": "alive"}}).observation == "yes"
        assert env.step({"name": "ask", "arguments": {"attribute": "electronic"}}).observation == "no"


class TestJudge:
    def test_exact_match(self):
        assert judge_guess("raisin", "raisin")

    def test_normalization(self):
        assert judge_guess(" The Raisin. ", "raisin")

    def test_synonym_table(self):
        table = load_object_table()
        synonyms = {k.lower(): v.lower() for k, v in table["synonyms"].items()}
        assert judge_guess("couch", "sofa", synonyms)
        assert judge_guess("tv", "television", synonyms)

    def test_unrelated_word(self):
        assert not judge_guess("banana", "sofa")


class TestAgents:
    def test_bisection_wins_sampled_objects(self):
        env = TwentyQuestionsEnv()
        for hidden in ("raisin", "sofa", "drone", "moon", "teddy bear"):
            fixed = TwentyQuestionsEnv(hidden_object=hidden)
            state = fixed.reset(seed=0)
            agent = BisectionGuesser(fixed.attribute_table, max_turns=fixed.max_turns)
            while not state.done:
                state = fixed.step(agent.act(state.observation))
            assert state.reward == 1.0, hidden
            assert state.turn <= 20

    def test_random_guesser_is_deterministic_per_seed(self):
        env = TwentyQuestionsEnv()
        a = RandomGuesser(env.attributes, env.objects, rng=9)
        b = RandomGuesser(env.attributes, env.objects, rng=9)
        assert [a.act("x") for _ in range(10)] == [b.act("x") for _ in range(10)]


class TestObjectTable:
    def test_bundled_table_size_bound(self):
        table = load_object_table()
        assert len(table["objects"]) <= 200

    def test_signatures_are_unique(self):
        table = load_object_table()
        signatures = {frozenset(attrs) for attrs in table["objects"].values()}
        assert len(signatures) == len(table["objects"])

    def test_attributes_listing_is_complete(self):
        table = load_object_table()
        used = {a for attrs in table["objects"].values() for a in attrs}
        assert used <= set(table["attributes"])


class TestCustomerService:
    @pytest.fixture
    def scenario(self):
        return load_bundled_scenario("exchange")

    def test_reset_database_matches_fixture(self, scenario):
        env = CustomerServiceEnv(scenario)
        env.reset()
        assert env.world.orders == scenario["database"]["orders"]
        assert env.world.violation is None

    def test_single_batched_modification_wins(self, scenario):
        env = CustomerServiceEnv(scenario)
        env.reset()
        env.step({"name": "find_user", "arguments": {"email": "dana.r@example.com"}})
        env.step({"name": "get_order", "arguments": {"order_id": "o1001"}})
        env.step({"name": "respond", "arguments": {"message": "What would you like to exchange?"}})
        env.step({"name": "respond", "arguments": {"message": "Anything else?"}})
        env.step(
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
        state = env.step({"name": "respond", "arguments": {"message": "All done!"}})
        state = env.step({"name": "respond", "arguments": {"message": "Goodbye"}})
        assert state.done and state.reward == 1.0

    def test_second_modification_violates_and_zeroes(self, scenario):
        env = CustomerServiceEnv(scenario)
        env.reset()
        env.step({"name": "find_user", "arguments": {"email": "dana.r@example.com"}})
        env.step(
            {
                "name": "modify_order",
                "arguments": {
                    "order_id": "o1001",
                    "items": [
                        {"sku": "mug-blue", "qty": 1},
                        {"sku": "tee-blue-m", "qty": 2},
                        {"sku": "poster-a2", "qty": 1},
                    ],
                },
            }
        )
        state = env.step(
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
        assert state.done and state.reward == 0.0
        assert env.world.violation is not None
        assert "one database-modifying call" in state.observation

    def test_modification_requires_identity(self, scenario):
        env = CustomerServiceEnv(scenario)
        env.reset()
        state = env.step(
            {"name": "cancel_order", "arguments": {"order_id": "o1001"}}
        )
        assert state.done and state.reward == 0.0
        assert "identity" in state.observation

    def test_pending_only_rule(self):
        scenario = load_bundled_scenario("cancel")
        env = CustomerServiceEnv(scenario)
        env.reset()
        env.step({"name": "find_user", "arguments": {"email": "sam.t@example.com"}})
        state = env.step({"name": "cancel_order", "arguments": {"order_id": "o2002"}})
        assert state.done and state.reward == 0.0
        assert "pending" in state.observation

    def test_cancel_scenario_solution(self):
        scenario = load_bundled_scenario("cancel")
        env = CustomerServiceEnv(scenario)
        env.reset()
        env.step({"name": "respond", "arguments": {"message": "Can I have your email?"}})
        env.step({"name": "find_user", "arguments": {"email": "sam.t@example.com"}})
        env.step({"name": "cancel_order", "arguments": {"order_id": "o2001"}})
        state = env.step({"name": "respond", "arguments": {"message": "Done."}})
        state = env.step({"name": "respond", "arguments": {"message": "Bye."}})
        assert state.done and state.reward == 1.0

    def test_malformed_arguments_are_in_episode_errors(self, scenario):
        env = CustomerServiceEnv(scenario)
        env.reset()
        state = env.step({"name": "get_order", "arguments": {}})
        assert state.observation.startswith("error:") and not state.done
        state = env.step({"name": "teleport", "arguments": {}})
        assert "unknown tool" in state.observation and not state.done

    def test_replaying_actions_reproduces_observations(self, scenario):
        actions = [
            {"name": "find_user", "arguments": {"email": "dana.r@example.com"}},
            {"name": "get_order", "arguments": {"order_id": "o1001"}},
            {"name": "respond", "arguments": {"message": "hi"}},
        ]

        def run():
            env = CustomerServiceEnv(copy.deepcopy(scenario))
            env.reset()
            return [env.step(a).observation for a in actions]

        assert run() == run()

    def test_reward_requires_db_match_and_clean_flag(self, scenario):
        env = CustomerServiceEnv(scenario)
        env.reset()
        env.step({"name": "find_user", "arguments": {"email": "dana.r@example.com"}})
        # Wrong modification: db will not match ground truth.
        env.step(
            {
                "name": "modify_order",
                "arguments": {"order_id": "o1001", "items": [{"sku": "mug-blue", "qty": 1}]},
            }
        )
        state = env.step({"name": "respond", "arguments": {"message": "done?"}})
        while not state.done:
            state = env.step({"name": "respond", "arguments": {"message": "ok"}})
        assert state.reward == 0.0 and env.world.violation is None


class TestMathAnswers:
    def test_boxed_correct_answer(self):
        env = MathAnswerEnv()
        env.reset(seed=0)
        answer = "The product is \\boxed{" + env.problem["answer"] + "}"
        state = env.step({"name": "submit", "arguments": {"answer": answer}})
        assert state.done and state.reward == 1.0

    def test_unboxed_answer_scores_zero(self):
        env = MathAnswerEnv()
        env.reset(seed=0)
        state = env.step({"name": "submit", "arguments": {"answer": env.problem["answer"]}})
        assert state.done and state.reward == 0.0

    def test_wrong_boxed_answer(self):
        env = MathAnswerEnv()
        env.reset(seed=0)
        state = env.step({"name": "submit", "arguments": {"answer": "\\boxed{-1}"}})
        assert state.done and state.reward == 0.0

    def test_extract_boxed_handles_nested_braces(self):
        assert extract_boxed("so \\boxed{\\frac{1}{2}}") == "\\frac{1}{2}"
        assert extract_boxed("nothing here") is None
        assert extract_boxed("two \\boxed{1} then \\boxed{2}") == "2"


class TestRegistry:
    def test_make_env_kinds(self):
        assert isinstance(make_env({"kind": "twentyq"}), TwentyQuestionsEnv)
        assert isinstance(make_env({"kind": "math"}), MathAnswerEnv)
        scenario = load_bundled_scenario("cancel")
        assert isinstance(make_env({"kind": "customer", "scenario": scenario}), CustomerServiceEnv)
        with pytest.raises(EnvError):
            make_env({"kind": "chess"})
