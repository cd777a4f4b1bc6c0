"""Operator entry points.

    langac verify-theory   run the desk-scale verification suites
    langac rollout         collect episodes from an environment
    langac eval            success rates across seeds, with per-seed breakdown
    langac emit            build supervision pairs from a transition log

Commands read an optional JSON config file; command-line flags win over
config values. Secrets (endpoint tokens) come only from environment
variables. Exit codes: 0 success, 2 bad configuration, 3 runtime failure,
4 verification failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3
EXIT_CHECK_FAILED = 4


class ConfigError(ValueError):
    pass


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file {path!r} does not exist")
    try:
        payload = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path!r} is not valid JSON: {exc}") from None
    if not isinstance(payload, dict):
        raise ConfigError("config file must hold a JSON object")
    return payload


def _merged(args: argparse.Namespace, config: dict, key: str, default):
    """Flag value if given, else config value, else default."""
    value = getattr(args, key.replace("-", "_"), None)
    if value is not None:
        return value
    return config.get(key, default)


def _make_gateway(args, config: dict):
    from .gateway import ChatGateway, EndpointConfig, ReplayTransport

    endpoint = EndpointConfig(
        base_url=_merged(args, config, "base-url", "http://localhost:8000/v1"),
        model_name=_merged(args, config, "model", "local-model"),
        auth_token_env_var=_merged(args, config, "token-env", "LANGAC_API_TOKEN"),
        temperature=float(_merged(args, config, "temperature", 1.0)),
        max_attempts=int(_merged(args, config, "max-attempts", 3)),
    )
    cassette = _merged(args, config, "cassette", None)
    transport = ReplayTransport.from_path(cassette) if cassette else None
    return ChatGateway(endpoint, transport=transport)


def _make_env(args, config: dict):
    from .envs import make_env
    from .envs.customer import load_bundled_scenario, load_scenario

    kind = _merged(args, config, "env", None)
    if kind is None:
        raise ConfigError("an environment is required (--env)")
    spec: dict = {"kind": kind}
    if kind == "twentyq":
        spec["hidden_object"] = _merged(args, config, "hidden", None)
    elif kind == "customer":
        scenario_path = _merged(args, config, "scenario", None)
        if scenario_path and Path(scenario_path).exists():
            spec["scenario"] = load_scenario(scenario_path)
        else:
            spec["scenario"] = load_bundled_scenario(scenario_path or "exchange")
    elif kind != "math":
        raise ConfigError(f"unknown environment {kind!r}")
    return make_env(spec)


def _make_policy(args, config: dict, env):
    from .envs.agents import BisectionGuesser, RandomGuesser
    from .rollout import GatewayPolicy, ScriptedPolicy

    agent = _merged(args, config, "agent", "gateway")
    if agent == "gateway":
        return GatewayPolicy(_make_gateway(args, config))
    if agent == "bisection":
        if not hasattr(env, "attribute_table"):
            raise ConfigError("the bisection agent only plays the guessing game")
        return ScriptedPolicy(
            BisectionGuesser(env.attribute_table, max_turns=env.max_turns),
            thought="narrow the candidates, then commit",
        )
    if agent == "random":
        if not hasattr(env, "attribute_table"):
            raise ConfigError("the random agent only plays the guessing game")
        seed = int(_merged(args, config, "seed", 0))
        return ScriptedPolicy(
            RandomGuesser(env.attributes, env.objects, rng=seed + 77_000),
            thought="",
        )
    raise ConfigError(f"unknown agent {agent!r}")


# ---------------------------------------------------------------------------
# Commands.
# ---------------------------------------------------------------------------


def cmd_verify_theory(args) -> int:
    from . import report
    from .verify import run_all_suites

    config = _load_config(args.config)
    out_dir = Path(_merged(args, config, "out", "verify_report"))
    out_dir.mkdir(parents=True, exist_ok=True)
    fast = bool(_merged(args, config, "fast", False))

    results, artifacts = run_all_suites(fast=fast)
    for result in results:
        status = "PASS" if result.passed else "FAIL"
        print(f"[{status}] {result.suite}/{result.name}: residual {result.residual:.3e} "
              f"(tolerance {result.tolerance:.3e})")
    report.write_records(out_dir / "report.jsonl", [r.to_record() for r in results])
    if "curves" in artifacts:
        report.render_learning_curves(artifacts["curves"], out_dir / "learning_curves.png")
    if "sentiments" in artifacts:
        report.render_rank_scatter(
            artifacts["sentiments"], artifacts["q_values"], out_dir / "rank_scatter.png"
        )
    report.render_residual_bars(
        {f"{r.suite}/{r.name}": (r.residual, max(r.tolerance, 1e-18)) for r in results
         if "rank_correlation" not in r.name and "chi_square" not in r.name},
        out_dir / "residuals.png",
    )
    failed = [r for r in results if not r.passed]
    print(f"\n{len(results) - len(failed)}/{len(results)} checks passed; "
          f"report in {out_dir}/")
    return EXIT_CHECK_FAILED if failed else EXIT_OK


def cmd_rollout(args) -> int:
    from . import report
    from .pipeline import persist_transitions
    from .rollout import run_episodes

    config = _load_config(args.config)
    out_dir = Path(_merged(args, config, "out", "rollout_out"))
    out_dir.mkdir(parents=True, exist_ok=True)
    episodes = int(_merged(args, config, "episodes", 10))
    seed = int(_merged(args, config, "seed", 0))

    env = _make_env(args, config)
    policy = _make_policy(args, config, env)
    results = run_episodes(env, policy, episodes, seed=seed)

    transitions_path = out_dir / "transitions.jsonl"
    transitions_path.unlink(missing_ok=True)
    total = 0
    for result in results:
        total += persist_transitions(list(result.transitions), transitions_path)
    report.write_records(out_dir / "episodes.jsonl", [r.to_record() for r in results])
    wins = sum(r.total_reward for r in results)
    print(f"{episodes} episode(s), {total} transitions, "
          f"success rate {wins / max(episodes, 1):.2f}; records in {out_dir}/")
    return EXIT_OK


def cmd_eval(args) -> int:
    from . import report
    from .rollout import run_episodes

    config = _load_config(args.config)
    out_dir = Path(_merged(args, config, "out", "eval_out"))
    out_dir.mkdir(parents=True, exist_ok=True)
    episodes = int(_merged(args, config, "episodes", 10))
    seeds = _merged(args, config, "seeds", "0,1,2")
    seed_list = [int(s) for s in str(seeds).split(",") if s != ""]

    env = _make_env(args, config)
    records = []
    per_seed: dict[str, float] = {}
    for seed in seed_list:
        policy = _make_policy(args, config, env)
        results = run_episodes(env, policy, episodes, seed=seed)
        rate = sum(r.total_reward for r in results) / max(len(results), 1)
        per_seed[f"seed{seed}"] = rate
        records.append({"seed": seed, "episodes": episodes, "success_rate": rate})
    mean_rate = sum(per_seed.values()) / max(len(per_seed), 1)
    records.append({"seed": "mean", "episodes": episodes * len(seed_list),
                    "success_rate": mean_rate})
    report.write_records(out_dir / "metrics.jsonl", records)
    report.render_winrate_bars(per_seed, out_dir / "success_rates.png")
    width = max(len(name) for name in per_seed) if per_seed else 4
    print(f"{'seed':<{width}}  success_rate")
    for name in sorted(per_seed):
        print(f"{name:<{width}}  {per_seed[name]:.3f}")
    print(f"{'mean':<{width}}  {mean_rate:.3f}")
    print(f"report in {out_dir}/")
    return EXIT_OK


def cmd_emit(args) -> int:
    from .pipeline import EmitConfig, emit_training_pairs, load_buffer, save_pairs

    config = _load_config(args.config)
    buffer_path = _merged(args, config, "buffer", None)
    if buffer_path is None:
        raise ConfigError("a transition log is required (--buffer)")
    if not Path(buffer_path).exists():
        raise ConfigError(f"transition log {buffer_path!r} does not exist")
    out_dir = Path(_merged(args, config, "out", "emit_out"))
    out_dir.mkdir(parents=True, exist_ok=True)

    buffer = load_buffer(buffer_path, alpha=float(_merged(args, config, "alpha", 0.1)))
    gateway = _make_gateway(args, config)
    emit_config = EmitConfig(
        num_transitions=int(_merged(args, config, "num", 32)),
        policy_pair_ratio=float(_merged(args, config, "policy-ratio", 1.0)),
        k=int(_merged(args, config, "k", 1)),
        seed=int(_merged(args, config, "seed", 0)),
    )
    pairs = emit_training_pairs(buffer, gateway, emit_config)
    count = save_pairs(pairs, out_dir / "pairs.jsonl")
    critic = sum(1 for p in pairs if p.kind == "critic_L1")
    print(f"emitted {count} pair(s) ({critic} critic, {count - critic} policy) "
          f"to {out_dir / 'pairs.jsonl'}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="langac", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify-theory", help="run the desk-scale verification suites")
    p.add_argument("--config")
    p.add_argument("--out")
    p.add_argument("--fast", action="store_true", default=None)
    p.set_defaults(func=cmd_verify_theory)

    for name, func in (("rollout", cmd_rollout), ("eval", cmd_eval)):
        p = sub.add_parser(name, help=f"{name} episodes against an environment")
        p.add_argument("--config")
        p.add_argument("--env", choices=("twentyq", "customer", "math"))
        p.add_argument("--agent", choices=("gateway", "bisection", "random"))
        p.add_argument("--episodes", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--seeds")
        p.add_argument("--scenario")
        p.add_argument("--hidden")
        p.add_argument("--out")
        p.add_argument("--cassette")
        p.add_argument("--base-url")
        p.add_argument("--model")
        p.add_argument("--temperature", type=float)
        p.add_argument("--token-env")
        p.set_defaults(func=func)

    p = sub.add_parser("emit", help="emit supervision pairs from a transition log")
    p.add_argument("--config")
    p.add_argument("--buffer")
    p.add_argument("--num", type=int)
    p.add_argument("--policy-ratio", type=float)
    p.add_argument("--k", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--cassette")
    p.add_argument("--base-url")
    p.add_argument("--model")
    p.add_argument("--temperature", type=float)
    p.add_argument("--token-env")
    p.set_defaults(func=cmd_emit)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # runtime failures get their own exit code
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
