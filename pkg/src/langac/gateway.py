"""Chat-completions gateway: prompt construction, strict parsing, replayable transport.

Every behavior of the system — acting, predicting futures, building backup
targets, critiquing, refining — is one underlying chat model driven by a
different prompt template (see ``prompts/``). Replies must parse bit-exactly
into typed results; anything else is a structured error carrying the raw
text, retried up to the configured attempt budget.

Reasoning models prepend ``<think>...</think>`` blocks that can leak
privileged information (the observed next state, the final score) into what
would otherwise be a valid training target. The correction step asks the
model to rewrite its thinking without those references and splices the
single ``<corrected_think>`` block back over the original.

Transports are pluggable: an HTTP client for live endpoints, plus a
record/replay pair so the whole tier runs offline and byte-deterministically
in tests.
"""

from __future__ import annotations

import json
import math
import os
import re
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import httpx

# Rough budget heuristic when no tokenizer is available: four characters per
# token, matching the usual English-text rule of thumb.
CHARS_PER_TOKEN = 4

_VALID_ROLES = ("system", "user", "assistant")


class GatewayError(RuntimeError):
    pass


class TransportError(GatewayError):
    pass


class ReplayMissError(TransportError):
    """The replay cassette has no (remaining) response for this request."""


class PromptBudgetError(GatewayError):
    """The serialized context exceeds the maximum prompt length."""


class ParseError(GatewayError):
    """A model reply violated its output contract. Carries the raw text."""

    def __init__(self, message: str, raw_text: str):
        super().__init__(message)
        self.raw_text = raw_text


def load_prompt(name: str) -> str:
    return resources.files("langac.prompts").joinpath(f"{name}.txt").read_text()


def render_prompt(template: str, **values: str) -> str:
    """Substitute ``{placeholder}`` markers literally (templates contain JSON braces)."""
    for key, value in values.items():
        template = template.replace("{" + key + "}", str(value))
    return template


def estimate_tokens(text: str) -> int:
    return math.ceil(len(text) / CHARS_PER_TOKEN)


@dataclass(frozen=True)
class EndpointConfig:
    base_url: str = "http://localhost:8000/v1"
    model_name: str = "local-model"
    auth_token_env_var: str = "LANGAC_API_TOKEN"
    temperature: float = 1.0
    timeout: float = 120.0
    max_attempts: int = 3
    backoff_seconds: float = 1.0
    max_response_tokens: int = 24576
    max_prompt_tokens: int = 8192

    def __post_init__(self):
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")

    def auth_token(self) -> str | None:
        return os.environ.get(self.auth_token_env_var) or None


@dataclass(frozen=True)
class ChatContext:
    """Interaction history: the task plus alternating agent/environment turns."""

    messages: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        previous = None
        for i, (role, _) in enumerate(self.messages):
            if role not in _VALID_ROLES:
                raise ValueError(f"invalid role {role!r} at position {i}")
            if role == "system" and i != 0:
                raise ValueError("system message only allowed first")
            if role == previous:
                raise ValueError(f"consecutive {role!r} messages at position {i}")
            previous = role

    def append(self, role: str, content: str) -> "ChatContext":
        return ChatContext(self.messages + ((role, content),))

    def append_user(self, content: str) -> "ChatContext":
        """Append user content, merging into a trailing user message if present."""
        if self.messages and self.messages[-1][0] == "user":
            head = self.messages[:-1]
            merged = self.messages[-1][1] + "\n\n" + content
            return ChatContext(head + (("user", merged),))
        return self.append("user", content)

    def token_estimate(self) -> int:
        return sum(estimate_tokens(content) for _, content in self.messages)

    def as_payload(self) -> list[dict]:
        return [{"role": role, "content": content} for role, content in self.messages]


@dataclass(frozen=True)
class ComposedAction:
    """A reasoning step plus the environment action it motivates."""

    thought: str
    name: str
    arguments: dict
    flags: tuple[str, ...] = ()

    def render(self) -> str:
        blob = json.dumps({"name": self.name, "arguments": self.arguments}, sort_keys=True)
        return f"Thought:\n{self.thought}\nAction:\n{blob}"


@dataclass(frozen=True)
class ParsedEvaluation:
    """Parsed critic output: predicted future, verdict, and optional amendments."""

    future: str
    optimal: bool
    explanation: str | None = None
    corrected_thought: str | None = None
    text: str = ""  # the full (corrected) reply this evaluation was parsed from


# ---------------------------------------------------------------------------
# Request serialization.
# ---------------------------------------------------------------------------


def build_request(
    config: EndpointConfig, context: ChatContext, temperature: float | None = None
) -> dict:
    return {
        "model": config.model_name,
        "messages": context.as_payload(),
        "temperature": config.temperature if temperature is None else temperature,
        "max_tokens": config.max_response_tokens,
    }


def canonical_request(payload: dict) -> str:
    """Canonical JSON: stable key for record/replay and round-trip identity."""
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def parse_request(serialized: str) -> dict:
    return json.loads(serialized)


# ---------------------------------------------------------------------------
# Transports.
# ---------------------------------------------------------------------------


class HttpTransport:
    """POSTs to a chat-completions endpoint with retry and backoff."""

    def __init__(self, config: EndpointConfig):
        self.config = config

    def complete(self, payload: dict) -> str:
        url = self.config.base_url.rstrip("/") + "/chat/completions"
        headers = {"Content-Type": "application/json"}
        token = self.config.auth_token()
        if token:
            headers["Authorization"] = f"Bearer {token}"
        last_error: Exception | None = None
        for attempt in range(self.config.max_attempts):
            try:
                response = httpx.post(
                    url, json=payload, headers=headers, timeout=self.config.timeout
                )
                response.raise_for_status()
                body = response.json()
                return body["choices"][0]["message"]["content"]
            except (httpx.HTTPError, KeyError, IndexError, json.JSONDecodeError) as exc:
                last_error = exc
                if attempt + 1 < self.config.max_attempts:
                    time.sleep(self.config.backoff_seconds * 2**attempt)
        raise TransportError(f"endpoint failed after {self.config.max_attempts} attempts: {last_error}")


class ReplayTransport:
    """Serves recorded responses keyed by the canonical request.

    Multiple recordings of the same request are served in file order, which
    keeps repeated sampling (k > 1 at nonzero temperature) replayable. Lookups
    are locked so the transport can back concurrent callers, though replay
    runs that rely on per-key ordering should stay single-worker.
    """

    def __init__(self, entries: list[tuple[dict, str]]):
        import threading

        self._queues: dict[str, list[str]] = {}
        self._lock = threading.Lock()
        for payload, response in entries:
            self._queues.setdefault(canonical_request(payload), []).append(response)
        self.served = 0

    @classmethod
    def from_path(cls, path: str | Path) -> "ReplayTransport":
        entries = []
        for line in Path(path).read_text().splitlines():
            if not line.strip():
                continue
            record = json.loads(line)
            entries.append((record["request"], record["response"]))
        return cls(entries)

    def complete(self, payload: dict) -> str:
        key = canonical_request(payload)
        with self._lock:
            queue = self._queues.get(key)
            if not queue:
                raise ReplayMissError(f"no recorded response for request: {key[:200]}...")
            self.served += 1
            return queue.pop(0)


class RecordingTransport:
    """Wraps a transport and appends every exchange to a cassette file."""

    def __init__(self, inner, path: str | Path):
        self.inner = inner
        self.path = Path(path)

    def complete(self, payload: dict) -> str:
        response = self.inner.complete(payload)
        with self.path.open("a") as fh:
            fh.write(json.dumps({"request": payload, "response": response}) + "\n")
        return response


# ---------------------------------------------------------------------------
# Reply parsers. Pure functions; every violation is a ParseError with raw text.
# ---------------------------------------------------------------------------

_THINK_RE = re.compile(r"<think>(.*?)</think>", re.DOTALL)
_CORRECTED_RE = re.compile(r"<corrected_think>(.*?)<[\\/]corrected_think>", re.DOTALL)


def split_thinking(text: str) -> tuple[str | None, str]:
    """Return (thinking content or None, visible remainder)."""
    match = _THINK_RE.search(text)
    if not match:
        return None, text
    visible = text[: match.start()] + text[match.end():]
    return match.group(1), visible


def _balanced_json_object(text: str) -> str:
    start = text.find("{")
    if start < 0:
        raise ValueError("no JSON object found")
    depth = 0
    in_string = False
    escaped = False
    for i in range(start, len(text)):
        ch = text[i]
        if in_string:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_string = False
            continue
        if ch == '"':
            in_string = True
        elif ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                return text[start : i + 1]
    raise ValueError("unbalanced JSON object")


def parse_react_reply(text: str) -> ComposedAction:
    """Parse a Thought/Action reply into a composed action."""
    _, visible = split_thinking(text)
    thought_match = re.search(r"Thought:\s*\n?(.*?)\n\s*Action:", visible, re.DOTALL)
    if thought_match is None:
        if "Action:" not in visible:
            raise ParseError("reply is missing the 'Action:' section", text)
        raise ParseError("reply is missing the 'Thought:' section", text)
    thought = thought_match.group(1).strip()
    after = visible[visible.index("Action:") + len("Action:"):]
    try:
        blob = _balanced_json_object(after)
        record = json.loads(blob)
    except (ValueError, json.JSONDecodeError) as exc:
        raise ParseError(f"action is not a well-formed record: {exc}", text) from None
    if not isinstance(record, dict) or "name" not in record:
        raise ParseError("action record must contain a 'name'", text)
    name = record["name"]
    arguments = record.get("arguments", {})
    if not isinstance(name, str):
        raise ParseError("action 'name' must be a string", text)
    if not isinstance(arguments, dict):
        raise ParseError(f"arguments of action {name!r} must be a JSON object", text)
    return ComposedAction(thought=thought, name=name, arguments=arguments)


def _split_verdict(tail: str, text: str) -> tuple[bool, str | None]:
    stripped = tail.strip()
    match = re.match(r'["\']?(yes|no)["\']?[.,]?', stripped, re.IGNORECASE)
    if match is None:
        raise ParseError("optimality verdict must start with 'Yes' or 'No'", text)
    optimal = match.group(1).lower() == "yes"
    remainder = stripped[match.end():].strip()
    if optimal and remainder:
        raise ParseError("'Yes' verdict must not carry an explanation", text)
    if not optimal and not remainder:
        raise ParseError("'No' verdict requires an explanation", text)
    return optimal, remainder or None


def parse_evaluation_reply(text: str, corrected_thought: str | None = None) -> ParsedEvaluation:
    """Parse a Future/Optimality evaluation reply."""
    _, visible = split_thinking(text)
    future_match = re.search(r"Future:\s*\n?(.*?)\n\s*Optimality:", visible, re.DOTALL)
    if future_match is None:
        if "Optimality:" not in visible:
            raise ParseError("reply is missing the 'Optimality:' tag", text)
        raise ParseError("reply is missing the 'Future:' section", text)
    future = future_match.group(1).strip()
    tail = visible[visible.index("Optimality:") + len("Optimality:"):]
    optimal, explanation = _split_verdict(tail, text)
    return ParsedEvaluation(
        future=future,
        optimal=optimal,
        explanation=explanation,
        corrected_thought=corrected_thought,
        text=text,
    )


def parse_correctness_reply(text: str) -> tuple[bool, str | None]:
    """Parse the single-step 'Correctness:' variant of the evaluation."""
    _, visible = split_thinking(text)
    if "Correctness:" not in visible:
        raise ParseError("reply is missing the 'Correctness:' tag", text)
    tail = visible[visible.index("Correctness:") + len("Correctness:"):].strip()
    match = re.match(r'["\']?(yes|no)["\']?[.,]?', tail, re.IGNORECASE)
    if match is None:
        raise ParseError("correctness verdict must start with 'Yes' or 'No'", text)
    correct = match.group(1).lower() == "yes"
    remainder = tail[match.end():].strip()
    if not correct and not remainder:
        raise ParseError("'No' correctness verdict requires an explanation", text)
    return correct, remainder or None


def extract_corrected_thinking(text: str) -> str:
    """Extract the single corrected-thinking block; reject zero, multiple, or nested."""
    blocks = _CORRECTED_RE.findall(text)
    if len(blocks) == 0:
        raise ParseError("reply contains no <corrected_think> block", text)
    if len(blocks) > 1:
        raise ParseError(f"reply contains {len(blocks)} <corrected_think> blocks, expected exactly one", text)
    block = blocks[0]
    if "<think>" in block or "</think>" in block or "<\\think>" in block:
        raise ParseError("corrected thinking must not contain nested think tags", text)
    return block


def substitute_thinking(original: str, corrected: str) -> str:
    """Replace the content of the original <think> block with corrected text."""
    match = _THINK_RE.search(original)
    if match is None:
        raise ParseError("original reply has no <think> block to substitute", original)
    return original[: match.start()] + f"<think>{corrected}</think>" + original[match.end():]


# ---------------------------------------------------------------------------
# The gateway.
# ---------------------------------------------------------------------------

# Distribution-bearing behaviors sample at the configured temperature;
# parsing-critical rewrites run greedy.
_GREEDY_BEHAVIORS = ("refine", "correct")


class ChatGateway:
    """All model behaviors behind one endpoint, differentiated by prompt."""

    def __init__(self, config: EndpointConfig, transport=None):
        self.config = config
        self.transport = transport if transport is not None else HttpTransport(config)
        self.prompts = {
            name: load_prompt(name)
            for name in (
                "react",
                "evaluate_action",
                "evaluate_solution",
                "bootstrap_future",
                "target_evaluation",
                "correct_thinking_evaluation",
                "correct_thinking_refinement",
                "refine_action",
            )
        }

    # -- plumbing -----------------------------------------------------------

    def _complete(self, context: ChatContext, behavior: str) -> str:
        if context.token_estimate() > self.config.max_prompt_tokens:
            raise PromptBudgetError(
                f"context estimates {context.token_estimate()} tokens, "
                f"budget is {self.config.max_prompt_tokens}"
            )
        temperature = 0.0 if behavior in _GREEDY_BEHAVIORS else self.config.temperature
        payload = build_request(self.config, context, temperature)
        return self.transport.complete(payload)

    def _complete_parsed(self, context: ChatContext, behavior: str, parser):
        last: ParseError | None = None
        for _ in range(self.config.max_attempts):
            reply = self._complete(context, behavior)
            try:
                return parser(reply)
            except ParseError as exc:
                last = exc
        raise last

    def complete_text(self, context: ChatContext, behavior: str = "evaluate") -> str:
        """One raw completion, for auxiliary behaviors (e.g. judging)."""
        return self._complete(context, behavior)

    # -- behaviors ----------------------------------------------------------

    def generate_action(self, context: ChatContext) -> ComposedAction:
        """Sample a composed (thought, environment action) from the policy prompt."""
        prompted = context.append_user(self.prompts["react"])
        return self._complete_parsed(prompted, "action", parse_react_reply)

    def generate_critique(
        self, context: ChatContext, action: ComposedAction, k: int = 1
    ) -> list[ParsedEvaluation]:
        """k independent future-plus-verdict evaluations of the latest action."""
        if k < 1:
            raise ValueError("k must be >= 1")
        prompted = context.append("assistant", action.render()).append(
            "user", self.prompts["evaluate_action"]
        )
        return [
            self._complete_parsed(prompted, "evaluate", parse_evaluation_reply)
            for _ in range(k)
        ]

    def generate_bellman_target(
        self,
        context: ChatContext,
        action: ComposedAction,
        reward: float | None,
        next_observation: str,
    ) -> ParsedEvaluation:
        """Two-stage backup target: bootstrap a future from the observed next
        state, then evaluate the action against the combined future.

        The resulting text is the critic's supervision target, so any thinking
        block is rewritten to stop referencing the observation or score.
        """
        observation = next_observation
        if reward is not None:
            observation = f"{next_observation}\nFinal score: {reward:g}"
        bootstrap_prompt = render_prompt(
            self.prompts["bootstrap_future"], next_observation=observation
        )
        staged = context.append("assistant", action.render()).append("user", bootstrap_prompt)
        future_reply = self._complete(staged, "predict")
        staged = staged.append("assistant", future_reply).append(
            "user", self.prompts["target_evaluation"]
        )
        last: ParseError | None = None
        for _ in range(self.config.max_attempts):
            reply = self._complete(staged, "evaluate")
            try:
                corrected_thought = None
                if _THINK_RE.search(reply):
                    reply, corrected_thought = self.correct_chain_of_thought(
                        staged, reply, self.prompts["correct_thinking_evaluation"]
                    )
                return parse_evaluation_reply(reply, corrected_thought=corrected_thought)
            except ParseError as exc:
                last = exc
        raise last

    def correct_chain_of_thought(
        self, context: ChatContext, raw_reply: str, correction_prompt: str
    ) -> tuple[str, str]:
        """Rewrite the reply's thinking block; returns (corrected reply, new thinking)."""
        if not _THINK_RE.search(raw_reply):
            raise ParseError("reply has no thinking content to correct", raw_reply)
        prompted = context.append("assistant", raw_reply).append("user", correction_prompt)
        corrected = self._complete_parsed(prompted, "correct", extract_corrected_thinking)
        return substitute_thinking(raw_reply, corrected), corrected

    def generate_refined_action(
        self,
        context: ChatContext,
        transcript: list[tuple[ComposedAction, str]],
    ) -> ComposedAction:
        """Revise the latest action given its critique(s); the result is the
        policy's supervision target."""
        if not transcript:
            raise ValueError("refinement requires at least one (action, critique) pair")
        staged = context
        for attempt, critique_text in transcript:
            staged = staged.append("assistant", attempt.render())
            staged = staged.append("user", self.prompts["evaluate_action"])
            staged = staged.append("assistant", critique_text)
        staged = staged.append("user", self.prompts["refine_action"])
        last: ParseError | None = None
        reply = ""
        action = None
        corrected_thought = None
        for _ in range(self.config.max_attempts):
            reply = self._complete(staged, "refine")
            try:
                corrected_thought = None
                if _THINK_RE.search(reply):
                    reply, corrected_thought = self.correct_chain_of_thought(
                        staged, reply, self.prompts["correct_thinking_refinement"]
                    )
                action = parse_react_reply(reply)
                break
            except ParseError as exc:
                last = exc
        if action is None:
            raise last
        flags = list(action.flags)
        _, visible = split_thinking(reply)
        if "previous action" in visible.lower():
            # Soft contract: the prompt forbids referencing the prior attempt,
            # but such replies still parse; record the violation instead.
            flags.append("references_previous_action")
        if corrected_thought is not None:
            flags.append("thinking_corrected")
        return ComposedAction(
            thought=action.thought,
            name=action.name,
            arguments=action.arguments,
            flags=tuple(flags),
        )
