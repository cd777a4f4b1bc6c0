"""Miniature tool-use customer-service world with machine-checkable guidelines.

The agent alternates between messaging a scripted customer and calling tools
against an order database. Three rules are enforced mechanically:

1. identity must be verified (``find_user`` with the customer's email) before
   any database-modifying call;
2. at most one database-modifying call per episode — batch the changes;
3. only pending orders may be modified or cancelled.

Breaking a rule sets the violation flag and ends the episode. The terminal
reward is 1 iff the final order database deep-equals the scenario's ground
truth and the flag is unset. Malformed tool calls are in-episode error
observations, never crashes. Scenarios are plain data files, so the rule set
extends by adding files rather than code.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path

from .base import EnvError, EnvState

SCENARIO_SCHEMA_VERSION = 1

MODIFYING_TOOLS = ("modify_order", "cancel_order")

TOOL_SCHEMA = {
    "find_user": ("email",),
    "get_order": ("order_id",),
    "list_orders": ("user_id",),
    "modify_order": ("order_id", "items"),
    "cancel_order": ("order_id",),
    "respond": ("message",),
}


def load_scenario(path: str | Path) -> dict:
    payload = json.loads(Path(path).read_text())
    version = payload.get("schema_version")
    if version != SCENARIO_SCHEMA_VERSION:
        raise EnvError(f"unsupported scenario schema_version {version!r}")
    return payload


def load_bundled_scenario(name: str) -> dict:
    """Load one of the scenarios shipped with the package (``exchange``, ``cancel``)."""
    from importlib import resources

    payload = json.loads(
        resources.files("langac.envs.data").joinpath(f"scenario_{name}.json").read_text()
    )
    if payload.get("schema_version") != SCENARIO_SCHEMA_VERSION:
        raise EnvError(f"unsupported scenario schema_version in bundled {name!r}")
    return payload


@dataclass
class ToolUseWorld:
    """Mutable episode state: the database, the scripted user, and the audit flags."""

    scenario: dict
    orders: dict = field(init=False)
    users: dict = field(init=False)
    script_cursor: int = 0
    identity_verified: bool = False
    modifying_calls: int = 0
    violation: str | None = None

    def __post_init__(self):
        self.orders = copy.deepcopy(self.scenario["database"]["orders"])
        self.users = copy.deepcopy(self.scenario["database"]["users"])

    def database_matches_truth(self) -> bool:
        return self.orders == self.scenario["ground_truth_orders"]


class CustomerServiceEnv:
    def __init__(self, scenario: dict, max_turns: int = 20, user_gateway=None):
        self.scenario = scenario
        self.max_turns = int(scenario.get("max_turns", max_turns))
        # Optional simulated customer: with a gateway, `respond` consults the
        # model (primed with the scenario's request and identity) instead of
        # the scripted utterances. The simulated customer ends the episode by
        # saying "[leaves]".
        self.user_gateway = user_gateway
        self._dialog: list[tuple[str, str]] = []
        self.world: ToolUseWorld | None = None
        self._state: EnvState | None = None

    def reset(self, seed: int | None = None) -> EnvState:
        # Scenarios are fully scripted; the seed is accepted for interface
        # uniformity but does not influence the episode.
        self.world = ToolUseWorld(scenario=self.scenario)
        self._dialog = []
        tools = ", ".join(
            f'{name}({", ".join(args)})' for name, args in TOOL_SCHEMA.items()
        )
        observation = (
            "You are a customer service agent working over an order database. "
            "Guidelines: verify the customer's identity (find_user with their "
            "email) before changing anything; database changes are allowed via "
            "at most ONE modifying call (modify_order or cancel_order) in the "
            "whole conversation, so batch them; only pending orders may be "
            f"changed. Available tools: {tools}.\n"
            f"Customer says: {self.scenario['opening']}"
        )
        self._state = EnvState(observation=observation, turn=0, done=False, reward=0.0)
        return self._state

    # -- tool implementations ------------------------------------------------

    def _terminal_reward(self) -> float:
        assert self.world is not None
        ok = self.world.database_matches_truth() and self.world.violation is None
        return 1.0 if ok else 0.0

    def _guideline_check(self, tool: str, order: dict | None) -> str | None:
        world = self.world
        assert world is not None
        if not world.identity_verified:
            return "identity must be verified before modifying the database"
        if world.modifying_calls >= 1:
            return "only one database-modifying call is allowed per conversation"
        if order is not None and order.get("status") != "pending":
            return "only pending orders may be changed"
        return None

    def _run_tool(self, name: str, arguments: dict) -> tuple[str, bool]:
        """Execute one tool; returns (observation, episode_over)."""
        world = self.world
        assert world is not None
        missing = [key for key in TOOL_SCHEMA[name] if key not in arguments]
        if missing:
            return f"error: {name} is missing argument(s) {', '.join(missing)}", False

        if name == "find_user":
            email = arguments["email"]
            for user_id, record in world.users.items():
                if record.get("email") == email:
                    if user_id == world.scenario["user"]["user_id"]:
                        world.identity_verified = True
                    return f"user found: {user_id}", False
            return f"error: no user with email {email!r}", False

        if name == "get_order":
            order = world.orders.get(arguments["order_id"])
            if order is None:
                return f"error: no order {arguments['order_id']!r}", False
            return json.dumps(order, sort_keys=True), False

        if name == "list_orders":
            ids = sorted(
                oid for oid, o in world.orders.items() if o.get("user_id") == arguments["user_id"]
            )
            return json.dumps(ids), False

        if name in MODIFYING_TOOLS:
            order = world.orders.get(arguments["order_id"])
            if order is None:
                return f"error: no order {arguments['order_id']!r}", False
            problem = self._guideline_check(name, order)
            if problem is not None:
                world.violation = problem
                return f"guideline violation: {problem}", True
            world.modifying_calls += 1
            if name == "modify_order":
                items = arguments["items"]
                if not isinstance(items, list):
                    world.modifying_calls -= 1
                    return "error: items must be a list of {sku, qty} records", False
                order["items"] = copy.deepcopy(items)
                return "order updated: " + json.dumps(order, sort_keys=True), False
            order["status"] = "cancelled"
            return "order cancelled: " + json.dumps(order, sort_keys=True), False

        if name == "respond":
            if self.user_gateway is not None:
                return self._simulated_user_reply(arguments["message"])
            script = world.scenario["user_script"]
            if world.script_cursor < len(script):
                utterance = script[world.script_cursor]
                world.script_cursor += 1
                return f"Customer says: {utterance}", False
            return "[the customer has left the conversation]", True

        raise AssertionError(f"unhandled tool {name}")

    def _simulated_user_reply(self, agent_message: str) -> tuple[str, bool]:
        from ..gateway import ChatContext

        user = self.scenario["user"]
        priming = (
            "You are role-playing a customer talking to a support agent. "
            f"Your name is {user['name']} and your email is {user['email']}. "
            f"Your request: {self.scenario['opening']} Answer the agent in one "
            "or two sentences. When your request has been fully handled, reply "
            "with exactly [leaves]."
        )
        self._dialog.append(("user", agent_message))
        context = ChatContext().append("user", priming)
        # The agent speaks in the customer's "user" slot of the simulation.
        for role, content in self._dialog:
            context = (
                context.append_user(content) if role == "user" else context.append("assistant", content)
            )
        reply = self.user_gateway.complete_text(context, "evaluate").strip()
        self._dialog.append(("assistant", reply))
        if "[leaves]" in reply:
            return "[the customer has left the conversation]", True
        return f"Customer says: {reply}", False

    def step(self, action: dict) -> EnvState:
        if self._state is None:
            raise EnvError("reset the environment before stepping")
        if self._state.done:
            raise EnvError("episode is finished; reset to play again")
        turn = self._state.turn + 1
        name = action.get("name")
        arguments = action.get("arguments", {})
        if name not in TOOL_SCHEMA:
            observation, over = f"error: unknown tool {name!r}", False
        elif not isinstance(arguments, dict):
            observation, over = f"error: arguments of {name} must be a JSON object", False
        else:
            observation, over = self._run_tool(name, arguments)
        done = over or turn >= self.max_turns
        reward = self._terminal_reward() if done else 0.0
        self._state = EnvState(observation=observation, turn=turn, done=done, reward=reward)
        return self._state
