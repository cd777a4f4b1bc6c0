"""Episode collection: drive a policy against an environment, record transitions.

The runner owns the message history (task description, actions, observations)
so that every recorded transition carries the exact context an LLM policy
would condition on, whether the acting policy is a gateway-backed model or a
scripted agent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gateway import ChatContext, ChatGateway, ComposedAction
from .mdp import as_rng
from .pipeline import TransitionRecord


class GatewayPolicy:
    """Acts by sampling the gateway's policy prompt over the running context."""

    def __init__(self, gateway: ChatGateway):
        self.gateway = gateway

    def reset(self) -> None:
        pass

    def act(self, messages: list[tuple[str, str]]) -> ComposedAction:
        return self.gateway.generate_action(ChatContext(tuple(messages)))


class ScriptedPolicy:
    """Adapts an agent with ``reset()`` and ``act(observation) -> env action``."""

    def __init__(self, agent, thought: str = ""):
        self.agent = agent
        self.thought = thought

    def reset(self) -> None:
        self.agent.reset()

    def act(self, messages: list[tuple[str, str]]) -> ComposedAction:
        observation = messages[-1][1]
        action = self.agent.act(observation)
        return ComposedAction(
            thought=self.thought, name=action["name"], arguments=action["arguments"]
        )


@dataclass(frozen=True)
class EpisodeResult:
    episode_id: str
    transitions: tuple[TransitionRecord, ...]
    total_reward: float
    turns: int

    def to_record(self) -> dict:
        return {
            "episode_id": self.episode_id,
            "total_reward": self.total_reward,
            "turns": self.turns,
        }


def run_episode(
    env,
    policy,
    episode_id: str = "ep0",
    seed: int | np.random.Generator | None = None,
    max_steps: int = 64,
) -> EpisodeResult:
    """Play one episode and return its transitions with full contexts."""
    policy.reset()
    state = env.reset(as_rng(seed))
    messages: list[tuple[str, str]] = [("user", state.observation)]
    transitions: list[TransitionRecord] = []
    step_index = 0
    while not state.done and step_index < max_steps:
        action = policy.act(messages)
        context = tuple(messages)
        state = env.step({"name": action.name, "arguments": action.arguments})
        transitions.append(
            TransitionRecord(
                episode_id=episode_id,
                step_index=step_index,
                context=context,
                thought=action.thought,
                action_name=action.name,
                action_arguments=action.arguments,
                reward=state.reward,
                next_observation=state.observation,
                done=state.done,
                priority=1.0,
            )
        )
        messages.append(("assistant", action.render()))
        messages.append(("user", state.observation))
        step_index += 1
    return EpisodeResult(
        episode_id=episode_id,
        transitions=tuple(transitions),
        total_reward=state.reward if state.done else 0.0,
        turns=step_index,
    )


def run_episodes(
    env,
    policy,
    num_episodes: int,
    seed: int = 0,
    episode_prefix: str = "ep",
    max_steps: int = 64,
) -> list[EpisodeResult]:
    rng = as_rng(seed)
    return [
        run_episode(env, policy, f"{episode_prefix}{i:04d}", rng, max_steps)
        for i in range(num_episodes)
    ]
