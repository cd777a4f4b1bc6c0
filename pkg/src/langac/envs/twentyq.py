"""Scripted 20 Questions: a yes/no attribute oracle over a bundled object table.

The guesser asks about attributes (``ask``) or commits to an object
(``guess``). The oracle answers from the attribute table; a guess ends the
episode — reward 1 if the judge accepts it, 0 otherwise — and so does running
out of turns. Committing to a wrong guess loses: agents get one chance.

The scripted judge accepts exact matches after normalization plus entries from
a synonym table; an LLM judge through the gateway is available as an optional
mode for free-text play.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from ..mdp import as_rng
from .base import EnvError, EnvState

MAX_TURNS = 20

_ARTICLE_RE = re.compile(r"^(a|an|the)\s+")


def load_object_table(path: str | Path | None = None) -> dict:
    """Load the bundled (or given) object/attribute/synonym table."""
    if path is None:
        text = resources.files("langac.envs.data").joinpath("objects.json").read_text()
    else:
        text = Path(path).read_text()
    payload = json.loads(text)
    if payload.get("schema_version") != 1:
        raise EnvError(f"unsupported object table schema_version {payload.get('schema_version')!r}")
    return payload


@dataclass
class TwentyQWorld:
    """One episode's worth of hidden truth: the object and the oracle's table."""

    hidden_object: str
    attribute_table: dict[str, set[str]]
    synonyms: dict[str, str] = field(default_factory=dict)
    max_turns: int = MAX_TURNS

    def __post_init__(self):
        if self.hidden_object not in self.attribute_table:
            raise EnvError(f"hidden object {self.hidden_object!r} not in the attribute table")

    def oracle_answer(self, attribute: str) -> bool:
        return attribute in self.attribute_table[self.hidden_object]


def normalize_guess(text: str) -> str:
    text = text.strip().lower()
    text = _ARTICLE_RE.sub("", text)
    return text.strip(" .,!?\"'")


def judge_guess(
    guess: str,
    hidden: str,
    synonyms: dict[str, str] | None = None,
    gateway=None,
) -> bool:
    """Scripted mode: normalized match or synonym-table hit. LLM mode: ask the gateway."""
    if gateway is not None:
        from ..gateway import ChatContext

        context = ChatContext().append(
            "user",
            "You are judging a guessing game. The hidden object is "
            f"{hidden!r} and the player guessed {guess!r}. Do these refer to "
            "the same object? Answer with exactly one word: Yes or No.",
        )
        reply = gateway.complete_text(context, "correct")
        return reply.strip().lower().startswith("yes")
    synonyms = synonyms or {}
    g = normalize_guess(guess)
    h = normalize_guess(hidden)
    if g == h:
        return True
    return synonyms.get(g) == h or synonyms.get(h) == g


class TwentyQuestionsEnv:
    """Scripted oracle environment over the bundled attribute table."""

    def __init__(
        self,
        objects_path: str | Path | None = None,
        hidden_object: str | None = None,
        max_turns: int = MAX_TURNS,
        oracle_gateway=None,
    ):
        payload = load_object_table(objects_path)
        self.attribute_table = {
            name: set(attrs) for name, attrs in payload["objects"].items()
        }
        self.attributes = sorted(payload["attributes"])
        self.synonyms = {
            normalize_guess(k): normalize_guess(v) for k, v in payload["synonyms"].items()
        }
        self.objects = sorted(self.attribute_table)
        self.max_turns = max_turns
        # Optional free-text oracle: with a gateway, `ask` also accepts a
        # "question" argument answered by the model instead of the table.
        self.oracle_gateway = oracle_gateway
        self._fixed_hidden = hidden_object
        self.world: TwentyQWorld | None = None
        self._state: EnvState | None = None

    def reset(self, seed: int | np.random.Generator | None = None) -> EnvState:
        if self._fixed_hidden is not None:
            hidden = self._fixed_hidden
        else:
            hidden = self.objects[int(as_rng(seed).integers(len(self.objects)))]
        self.world = TwentyQWorld(
            hidden_object=hidden,
            attribute_table=self.attribute_table,
            synonyms=self.synonyms,
            max_turns=self.max_turns,
        )
        observation = (
            "You are playing 20 Questions. I am thinking of an object; uncover it "
            f"within {self.max_turns} turns. Each turn, either ask whether the object "
            'has an attribute with {"name": "ask", "arguments": {"attribute": ...}} '
            'or commit to a final answer with {"name": "guess", "arguments": '
            '{"object": ...}}. A guess ends the game: right wins, wrong loses.\n'
            "Attributes the oracle understands: " + ", ".join(self.attributes)
        )
        self._state = EnvState(observation=observation, turn=0, done=False, reward=0.0)
        return self._state

    def step(self, action: dict) -> EnvState:
        if self._state is None:
            raise EnvError("reset the environment before stepping")
        if self._state.done:
            raise EnvError("episode is finished; reset to play again")
        assert self.world is not None
        turn = self._state.turn + 1
        name = action.get("name")
        arguments = action.get("arguments", {})

        if name == "ask":
            attribute = arguments.get("attribute")
            question = arguments.get("question")
            if self.oracle_gateway is not None and isinstance(question, str):
                observation = "yes" if self._oracle_llm_answer(question) else "no"
            elif not isinstance(attribute, str) or attribute not in self.attributes:
                observation = f"error: unknown attribute {attribute!r}"
            else:
                observation = "yes" if self.world.oracle_answer(attribute) else "no"
            done = turn >= self.max_turns
            state = EnvState(observation=observation, turn=turn, done=done, reward=0.0)
        elif name == "guess":
            guess = arguments.get("object")
            if not isinstance(guess, str):
                state = EnvState(
                    observation="error: guess needs an 'object' argument",
                    turn=turn,
                    done=turn >= self.max_turns,
                    reward=0.0,
                )
                self._state = state
                return state
            correct = judge_guess(guess, self.world.hidden_object, self.synonyms)
            observation = (
                f"correct! the object was {self.world.hidden_object!r}"
                if correct
                else f"wrong. the object was {self.world.hidden_object!r}"
            )
            state = EnvState(
                observation=observation, turn=turn, done=True, reward=1.0 if correct else 0.0
            )
        else:
            observation = f"error: unknown action {name!r}; use 'ask' or 'guess'"
            done = turn >= self.max_turns
            state = EnvState(observation=observation, turn=turn, done=done, reward=0.0)

        self._state = state
        return state

    def _oracle_llm_answer(self, question: str) -> bool:
        from ..gateway import ChatContext

        assert self.world is not None
        context = ChatContext().append(
            "user",
            "You are the oracle in a guessing game. The hidden object is "
            f"{self.world.hidden_object!r}. Answer the player's yes/no question "
            f"with exactly one word, Yes or No.\nQuestion: {question}",
        )
        reply = self.oracle_gateway.complete_text(context, "correct")
        return reply.strip().lower().startswith("yes")
