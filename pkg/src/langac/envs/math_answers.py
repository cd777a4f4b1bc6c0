"""Single-step math answer checking: reward 1 for a correct, boxed answer."""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

import numpy as np

from ..mdp import as_rng
from .base import EnvError, EnvState


def extract_boxed(text: str) -> str | None:
    """Content of the last ``\\boxed{...}`` in the text, braces balanced, or None."""
    marker = "\\boxed{"
    start = text.rfind(marker)
    if start < 0:
        return None
    depth = 1
    for i in range(start + len(marker), len(text)):
        if text[i] == "{":
            depth += 1
        elif text[i] == "}":
            depth -= 1
            if depth == 0:
                return text[start + len(marker) : i]
    return None


def _normalize(answer: str) -> str:
    return answer.replace(" ", "").strip()


def load_problems(path: str | Path | None = None) -> list[dict]:
    if path is None:
        text = resources.files("langac.envs.data").joinpath("problems.json").read_text()
    else:
        text = Path(path).read_text()
    payload = json.loads(text)
    if payload.get("schema_version") != 1:
        raise EnvError(f"unsupported problems schema_version {payload.get('schema_version')!r}")
    return payload["problems"]


class MathAnswerEnv:
    """One problem, one attempt. The answer must be boxed to count."""

    def __init__(self, problems_path: str | Path | None = None):
        self.problems = load_problems(problems_path)
        self.problem: dict | None = None
        self._state: EnvState | None = None

    def reset(self, seed: int | np.random.Generator | None = None) -> EnvState:
        index = int(as_rng(seed).integers(len(self.problems)))
        self.problem = self.problems[index]
        observation = (
            "Solve the problem and give the final answer in the format "
            "\\boxed{answer}, submitted with "
            '{"name": "submit", "arguments": {"answer": ...}}.\n'
            f"Problem: {self.problem['problem']}"
        )
        self._state = EnvState(observation=observation, turn=0, done=False, reward=0.0)
        return self._state

    def step(self, action: dict) -> EnvState:
        if self._state is None:
            raise EnvError("reset the environment before stepping")
        if self._state.done:
            raise EnvError("episode is finished; reset to play again")
        assert self.problem is not None
        name = action.get("name")
        arguments = action.get("arguments", {})
        answer_text = arguments.get("answer") if isinstance(arguments, dict) else None
        if name != "submit" or not isinstance(answer_text, str):
            state = EnvState(
                observation="error: submit an 'answer' string", turn=1, done=True, reward=0.0
            )
            self._state = state
            return state
        boxed = extract_boxed(answer_text)
        correct = boxed is not None and _normalize(boxed) == _normalize(self.problem["answer"])
        state = EnvState(
            observation="correct" if correct else "incorrect",
            turn=1,
            done=True,
            reward=1.0 if correct else 0.0,
        )
        self._state = state
        return state
