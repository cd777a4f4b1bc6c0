"""Persistence of transitions and emission of supervision records.

This package's boundary is supervision *text*, not gradients: an external
trainer owns the model weights, while this module owns building its targets.
Transitions and training pairs are line-delimited JSON with an explicit
schema_version: streamable, diffable, and byte-stable under canonical
serialization (round trips are identity).

Two kinds of pairs are emitted per sampled transition: a critic pair whose
context is the evaluation prompt at (s_t, a_t) and whose target is the
corrected backup-target evaluation, and a policy pair whose context is the
policy prompt at s_t and whose target is the corrected refined action.
Every emitted target re-parses under the corresponding gateway parser before
it is released.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

from .engine import ReplayBuffer
from .gateway import (
    ChatContext,
    ChatGateway,
    ComposedAction,
    GatewayError,
    parse_evaluation_reply,
    parse_react_reply,
)
from .mdp import as_rng

log = logging.getLogger(__name__)

TRANSITION_SCHEMA_VERSION = 1
PAIR_SCHEMA_VERSION = 1


class SchemaError(ValueError):
    """A record does not match its schema; the message names the field path."""


class EmitError(RuntimeError):
    """Too many gateway failures while emitting training pairs."""


def canonical_json(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


@dataclass(frozen=True)
class TransitionRecord:
    """One persisted environment step with its full prompt context."""

    episode_id: str
    step_index: int
    context: tuple[tuple[str, str], ...]
    thought: str
    action_name: str
    action_arguments: dict
    reward: float
    next_observation: str
    done: bool
    priority: float
    schema_version: int = TRANSITION_SCHEMA_VERSION

    def __post_init__(self):
        if self.priority < 0:
            raise SchemaError("priority: must be >= 0")

    def to_record(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "episode_id": self.episode_id,
            "step_index": self.step_index,
            "context": [list(m) for m in self.context],
            "action": {
                "thought": self.thought,
                "name": self.action_name,
                "arguments": self.action_arguments,
            },
            "reward": self.reward,
            "next_observation": self.next_observation,
            "done": self.done,
            "priority": self.priority,
        }

    @classmethod
    def from_record(cls, payload: dict) -> "TransitionRecord":
        version = payload.get("schema_version")
        if version != TRANSITION_SCHEMA_VERSION:
            raise SchemaError(f"schema_version: unsupported value {version!r}")
        for key in ("episode_id", "step_index", "context", "action", "reward",
                    "next_observation", "done", "priority"):
            if key not in payload:
                raise SchemaError(f"{key}: missing")
        action = payload["action"]
        for key in ("thought", "name", "arguments"):
            if key not in action:
                raise SchemaError(f"action.{key}: missing")
        return cls(
            episode_id=payload["episode_id"],
            step_index=int(payload["step_index"]),
            context=tuple((role, content) for role, content in payload["context"]),
            thought=action["thought"],
            action_name=action["name"],
            action_arguments=action["arguments"],
            reward=float(payload["reward"]),
            next_observation=payload["next_observation"],
            done=bool(payload["done"]),
            priority=float(payload["priority"]),
        )


@dataclass(frozen=True)
class TrainingPair:
    """One supervision record for the external trainer."""

    kind: str  # "critic_L1" or "policy_L2"
    context: tuple[tuple[str, str], ...]
    target_text: str
    episode_id: str
    step_index: int
    attempt: int = 0
    correction_applied: bool = False
    schema_version: int = PAIR_SCHEMA_VERSION

    def __post_init__(self):
        if self.kind not in ("critic_L1", "policy_L2"):
            raise SchemaError(f"kind: unknown value {self.kind!r}")

    def to_record(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "kind": self.kind,
            "context": [list(m) for m in self.context],
            "target_text": self.target_text,
            "provenance": {
                "episode_id": self.episode_id,
                "step_index": self.step_index,
                "attempt": self.attempt,
                "correction_applied": self.correction_applied,
            },
        }

    @classmethod
    def from_record(cls, payload: dict) -> "TrainingPair":
        version = payload.get("schema_version")
        if version != PAIR_SCHEMA_VERSION:
            raise SchemaError(f"schema_version: unsupported value {version!r}")
        for key in ("kind", "context", "target_text", "provenance"):
            if key not in payload:
                raise SchemaError(f"{key}: missing")
        prov = payload["provenance"]
        return cls(
            kind=payload["kind"],
            context=tuple((role, content) for role, content in payload["context"]),
            target_text=payload["target_text"],
            episode_id=prov["episode_id"],
            step_index=int(prov["step_index"]),
            attempt=int(prov.get("attempt", 0)),
            correction_applied=bool(prov.get("correction_applied", False)),
        )


# ---------------------------------------------------------------------------
# Append-only logs.
# ---------------------------------------------------------------------------


def persist_transitions(records: list[TransitionRecord], path: str | Path) -> int:
    """Append records to a line-delimited log; returns the count written."""
    with Path(path).open("a") as fh:
        for record in records:
            fh.write(canonical_json(record.to_record()) + "\n")
    return len(records)


def load_transitions(path: str | Path) -> tuple[list[TransitionRecord], int]:
    """Read a transition log; a truncated final line is skipped and counted."""
    lines = Path(path).read_text().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    records: list[TransitionRecord] = []
    skipped = 0
    for i, line in enumerate(lines):
        try:
            payload = json.loads(line)
        except json.JSONDecodeError:
            if i == len(lines) - 1:
                skipped += 1
                continue
            raise SchemaError(f"line {i + 1}: not valid JSON") from None
        records.append(TransitionRecord.from_record(payload))
    return records, skipped


def load_buffer(
    path: str | Path, capacity: int | None = None, alpha: float = 0.1
) -> ReplayBuffer:
    """Reconstruct a replay buffer (records plus priorities) from a log."""
    records, skipped = load_transitions(path)
    if skipped:
        log.warning("skipped %d truncated line(s) while loading %s", skipped, path)
    buffer = ReplayBuffer(capacity or max(len(records), 1), alpha=alpha)
    for record in records:
        buffer.add(record, priority=record.priority)
    return buffer


def save_pairs(pairs: list[TrainingPair], path: str | Path) -> int:
    with Path(path).open("w") as fh:
        for pair in pairs:
            fh.write(canonical_json(pair.to_record()) + "\n")
    return len(pairs)


def load_pairs(path: str | Path) -> list[TrainingPair]:
    return [
        TrainingPair.from_record(json.loads(line))
        for line in Path(path).read_text().splitlines()
        if line.strip()
    ]


# ---------------------------------------------------------------------------
# Emission.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EmitConfig:
    num_transitions: int = 32
    policy_pair_ratio: float = 1.0  # fraction of sampled transitions that also get an L2 pair
    k: int = 1
    seed: int = 0
    failure_rate_threshold: float = 0.25
    max_workers: int = 1  # >1 parallelizes gateway calls; output order stays fixed


def _emit_for_record(
    gateway: ChatGateway, record: TransitionRecord, want_policy_pair: bool, k: int
) -> tuple[list[TrainingPair], int]:
    """All pairs for one sampled transition, plus the number of failed calls."""
    context = ChatContext(record.context)
    action = ComposedAction(
        thought=record.thought,
        name=record.action_name,
        arguments=record.action_arguments,
    )
    pairs: list[TrainingPair] = []
    failures = 0
    try:
        evaluation = gateway.generate_bellman_target(
            context,
            action,
            record.reward if record.done else None,
            record.next_observation,
        )
        critic_context = context.append("assistant", action.render()).append(
            "user", gateway.prompts["evaluate_action"]
        )
        parse_evaluation_reply(evaluation.text)  # emitted targets must re-parse
        pairs.append(
            TrainingPair(
                kind="critic_L1",
                context=critic_context.messages,
                target_text=evaluation.text,
                episode_id=record.episode_id,
                step_index=record.step_index,
                attempt=0,
                correction_applied=evaluation.corrected_thought is not None,
            )
        )
    except GatewayError as exc:
        failures += 1
        log.warning(
            "skipping critic pair for %s/%d: %s",
            record.episode_id, record.step_index, exc,
        )

    if want_policy_pair:
        try:
            critiques = gateway.generate_critique(context, action, k=k)
            refined = gateway.generate_refined_action(
                context, [(action, critiques[0].text)]
            )
            target_text = refined.render()
            parse_react_reply(target_text)
            policy_context = context.append_user(gateway.prompts["react"])
            pairs.append(
                TrainingPair(
                    kind="policy_L2",
                    context=policy_context.messages,
                    target_text=target_text,
                    episode_id=record.episode_id,
                    step_index=record.step_index,
                    attempt=len(critiques),
                    correction_applied="thinking_corrected" in refined.flags,
                )
            )
        except GatewayError as exc:
            failures += 1
            log.warning(
                "skipping policy pair for %s/%d: %s",
                record.episode_id, record.step_index, exc,
            )
    return pairs, failures


def emit_training_pairs(
    buffer: ReplayBuffer, gateway: ChatGateway, config: EmitConfig
) -> list[TrainingPair]:
    """Build critic and policy supervision pairs from prioritized samples.

    Gateway failures skip the record with a logged reason; the run aborts only
    if the failure rate crosses the configured threshold. Emission is
    deterministic for a fixed seed and a replay transport; with more than one
    worker, gateway calls run concurrently but the output order is still the
    sampling order (replay transports should stay single-worker).
    """
    if not len(buffer):
        return []
    rng = as_rng(config.seed)
    indices = buffer.sample_indices(config.num_transitions, rng)
    plan = [
        (buffer.records[int(idx)], bool(rng.random() < config.policy_pair_ratio))
        for idx in indices
    ]
    if config.max_workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=config.max_workers) as pool:
            outcomes = list(
                pool.map(
                    lambda item: _emit_for_record(gateway, item[0], item[1], config.k),
                    plan,
                )
            )
    else:
        outcomes = [_emit_for_record(gateway, rec, want, config.k) for rec, want in plan]

    pairs = [pair for chunk, _ in outcomes for pair in chunk]
    failures = sum(failed for _, failed in outcomes)
    attempts = len(plan) + sum(1 for _, want in plan if want)
    if attempts and failures / attempts > config.failure_rate_threshold:
        raise EmitError(
            f"{failures}/{attempts} gateway calls failed, above the "
            f"{config.failure_rate_threshold:.0%} threshold"
        )
    return pairs
