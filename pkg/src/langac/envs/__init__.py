"""Episodic agent environments with scripted counterparts for offline testing.

All environments share the same surface: ``reset(seed)`` returns the initial
state (task description plus first observation), ``step(action)`` consumes an
environment action ``{"name": ..., "arguments": {...}}`` and returns the next
state. Rewards are 0 until termination and 0/1 at it. Scripted oracles and
users make every environment fully deterministic under a seed; LLM-backed
variants are available through the gateway where noted.
"""

from .base import EnvError, EnvState, make_env
from .customer import CustomerServiceEnv, ToolUseWorld, load_scenario
from .math_answers import MathAnswerEnv, extract_boxed
from .twentyq import TwentyQuestionsEnv, TwentyQWorld, judge_guess, load_object_table

__all__ = [
    "EnvError",
    "EnvState",
    "make_env",
    "CustomerServiceEnv",
    "ToolUseWorld",
    "load_scenario",
    "MathAnswerEnv",
    "extract_boxed",
    "TwentyQuestionsEnv",
    "TwentyQWorld",
    "judge_guess",
    "load_object_table",
]
