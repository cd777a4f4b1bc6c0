"""Scripted agents for the guessing game: a table-informed bisector and a random baseline."""

from __future__ import annotations

import numpy as np

from ..mdp import as_rng


class BisectionGuesser:
    """Greedy halving over the oracle's own attribute table.

    Asks the attribute that most evenly splits the remaining candidates and
    only commits to a guess once a single candidate remains (or the turn
    budget forces its hand). With distinct attribute signatures this wins
    every game well inside the turn limit, since the candidate pool shrinks
    geometrically.
    """

    def __init__(self, attribute_table: dict[str, set[str]], max_turns: int = 20):
        self.table = {name: set(attrs) for name, attrs in attribute_table.items()}
        self.attributes = sorted({a for attrs in self.table.values() for a in attrs})
        self.max_turns = max_turns
        self.reset()

    def reset(self) -> None:
        self.candidates = set(self.table)
        self.pending: str | None = None
        self.turns_used = 0

    def _absorb(self, observation: str) -> None:
        if self.pending is None:
            return
        answer = observation.strip().lower()
        if answer == "yes":
            self.candidates = {c for c in self.candidates if self.pending in self.table[c]}
        elif answer == "no":
            self.candidates = {c for c in self.candidates if self.pending not in self.table[c]}
        self.pending = None

    def _best_split(self) -> str | None:
        best_attr = None
        best_score = None
        for attr in self.attributes:
            yes = sum(1 for c in self.candidates if attr in self.table[c])
            no = len(self.candidates) - yes
            if yes == 0 or no == 0:
                continue
            score = max(yes, no)
            if best_score is None or score < best_score:
                best_score, best_attr = score, attr
        return best_attr

    def act(self, observation: str) -> dict:
        self._absorb(observation)
        self.turns_used += 1
        turns_left = self.max_turns - self.turns_used
        if len(self.candidates) == 1 or turns_left <= 0:
            guess = min(self.candidates) if self.candidates else min(self.table)
            return {"name": "guess", "arguments": {"object": guess}}
        attr = self._best_split()
        if attr is None:
            # Indistinguishable candidates; nothing left to ask.
            return {"name": "guess", "arguments": {"object": min(self.candidates)}}
        self.pending = attr
        return {"name": "ask", "arguments": {"attribute": attr}}


class RandomGuesser:
    """Uniform over the whole action space: every attribute ask and every object guess."""

    def __init__(
        self,
        attributes: list[str],
        objects: list[str],
        rng: int | np.random.Generator | None = None,
    ):
        self.actions = [
            {"name": "ask", "arguments": {"attribute": a}} for a in sorted(attributes)
        ] + [{"name": "guess", "arguments": {"object": o}} for o in sorted(objects)]
        self.rng = as_rng(rng)

    def reset(self) -> None:
        pass

    def act(self, observation: str) -> dict:
        return self.actions[int(self.rng.integers(len(self.actions)))]
