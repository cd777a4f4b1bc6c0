"""Shared environment state and the environment registry."""

from __future__ import annotations

from dataclasses import dataclass


class EnvError(RuntimeError):
    """Misuse of an environment (e.g. stepping a finished episode)."""


@dataclass(frozen=True)
class EnvState:
    """Snapshot returned by reset/step.

    ``reward`` stays 0 while the episode runs and is 0 or 1 at termination.
    """

    observation: str
    turn: int
    done: bool
    reward: float

    def __post_init__(self):
        if not self.done and self.reward != 0.0:
            raise EnvError("reward must be 0 until the episode terminates")
        if self.done and self.reward not in (0.0, 1.0):
            raise EnvError("terminal reward must be 0 or 1")


def make_env(spec: dict):
    """Build an environment from a spec dict: {"kind": ..., ...}."""
    from .customer import CustomerServiceEnv, load_scenario
    from .math_answers import MathAnswerEnv
    from .twentyq import TwentyQuestionsEnv

    kind = spec.get("kind")
    if kind == "twentyq":
        return TwentyQuestionsEnv(
            objects_path=spec.get("objects_path"),
            hidden_object=spec.get("hidden_object"),
        )
    if kind == "customer":
        scenario = spec.get("scenario")
        if scenario is None:
            scenario = load_scenario(spec["scenario_path"])
        return CustomerServiceEnv(scenario)
    if kind == "math":
        return MathAnswerEnv(problems_path=spec.get("problems_path"))
    raise EnvError(f"unknown environment kind {kind!r}")
