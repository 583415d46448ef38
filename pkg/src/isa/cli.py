"""Command-line entry point: ``isa {influence,train,decompose,evaluate,ablate}``.

Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import yaml

from .config import ExperimentConfig
from .core import ConfigurationError, UsageError, as_state
from .envs import make_env
from .experiment import compute_report, env_factory, run_seeds, summarize, write_csv, write_json
from .goals import GoalBuffer, decomposition_dump
from .influence import InfluenceReport, check_trainable
from .trainer.runner import VARIANTS, Trainer

ABLATION_VARIANTS = ["isa", "no-influence-scope", "individual-goal", "no-eq7-gate", "no-eq10-gate"]


def parse_seeds(text: str) -> list[int]:
    """``3`` -> [3]; ``0..4`` -> [0, 1, 2, 3, 4]; ``1,5,9`` -> [1, 5, 9]."""
    try:
        if ".." in text:
            lo, hi = text.split("..")
            lo, hi = int(lo), int(hi)
            if hi < lo:
                raise ValueError
            return list(range(lo, hi + 1))
        return [int(s) for s in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad seed range {text!r}; use N, N..M or N,M,...") from None


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML experiment config")
    p.add_argument("--env", help="environment name")
    p.add_argument("--seed", type=int, help="single seed")
    p.add_argument("--seeds", type=parse_seeds, help="seed range N..M")
    p.add_argument("--out", help="output directory")
    p.add_argument("--variant", choices=VARIANTS)
    p.add_argument("--delta", type=float, help="influence threshold")
    p.add_argument("--workers", type=int, help="parallel seed workers")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config key (YAML value), repeatable")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="isa", description="Influence scopes of agents: estimation, training, ablations.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("influence", help="estimate influence scopes and MI matrices")
    _common(p)

    p = sub.add_parser("train", help="train one variant over seeds")
    _common(p)
    p.add_argument("--resume", action="store_true", help="continue from existing checkpoints")

    p = sub.add_parser("decompose", help="dump a goal decomposed into per-agent goals")
    _common(p)
    src = p.add_mutually_exclusive_group()
    src.add_argument("--goal", help="comma-separated global goal vector")
    src.add_argument("--buffer", help="goals.json or checkpoint state.json holding a goal buffer")
    p.add_argument("--report", help="influence report JSON (estimated when absent)")
    p.add_argument("--index", type=int, default=0, help="which buffered goal to dump")

    p = sub.add_parser("evaluate", help="evaluate a trained checkpoint")
    _common(p)
    p.add_argument("--checkpoint", required=True, help="seed directory written by train")
    p.add_argument("--episodes", type=int, default=None)
    p.add_argument("--sampled", action="store_true", help="sample actions instead of greedy")

    p = sub.add_parser("ablate", help="run ISA and its four ablations over seeds")
    _common(p)
    p.add_argument("--variants", default=",".join(ABLATION_VARIANTS),
                   help="comma-separated variants to include")
    return ap


def load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    changes = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigurationError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        changes[key] = yaml.safe_load(value)
    if args.env:
        changes["env"] = args.env
        if args.env.lower() != cfg.env and "env_params" not in changes:
            changes["env_params"] = {}  # parameters of another environment do not carry over
    if args.variant:
        changes["variant"] = args.variant
    if args.delta is not None:
        changes["delta"] = args.delta
    if args.out:
        changes["out"] = args.out
    if args.workers:
        changes["workers"] = args.workers
    if args.seeds:
        changes["seeds"] = args.seeds
    elif args.seed is not None:
        changes["seeds"] = [args.seed]
    return cfg.replace(**changes) if changes else cfg


# -- influence ---------------------------------------------------------------
def cmd_influence(cfg: ExperimentConfig) -> int:
    seed = cfg.seeds[0]
    env = make_env(cfg.env, **cfg.env_params)
    report, matrices = compute_report(cfg, seed)
    out = os.path.join(cfg.out, "influence", f"seed{seed}")
    os.makedirs(out, exist_ok=True)
    write_json(os.path.join(out, "influence.json"), report.to_json())
    write_json(os.path.join(out, "legend.json"), env.legend())
    for m in matrices or []:
        with open(os.path.join(out, f"mi_agent{m.agent}.csv"), "w") as fh:
            fh.write(m.to_csv())
    gt = env.ground_truth()
    check = check_trainable(gt.reward_relevant, report.agent_scopes)
    write_json(os.path.join(out, "trainability.json"), check.to_json())

    print(f"influence scopes for {cfg.env} (delta={cfg.delta}, seed={seed})")
    mismatches = 0
    for i in range(report.n_agents):
        print(f"  agent {i}: scope {list(report.agent_scopes[i])}, special {list(report.special[i])}")
        for a, label in enumerate(env.action_labels[i]):
            got = report.action_scope(i, a)
            want = gt.scopes[i][a]
            tag = "ok" if got == want else f"MISMATCH (declared {list(want)})"
            mismatches += got != want
            print(f"    {label:>12}: {list(got)}  {tag}")
    print(f"  common: {list(report.common)}")
    print(f"  ground truth: {'all actions match' if not mismatches else f'{mismatches} action(s) differ'}")
    if check.trainable:
        print("  trainability: ok, every reward-relevant dimension is influenced by some agent")
    else:
        print(f"  trainability: FAILED, reward-relevant dimensions {list(check.uncovered)} "
              f"({', '.join(env.dim_labels[k - 1] for k in check.uncovered)}) are influenced by no agent")
    print(f"  written to {out}")
    return 0


# -- train -------------------------------------------------------------------
def cmd_train(cfg: ExperimentConfig, resume: bool = False) -> int:
    results = run_seeds(cfg, resume)
    failed = [r for r in results if "error" in r]
    for r in results:
        if "error" in r:
            print(f"seed {r['seed']}: FAILED {r['error']}", file=sys.stderr)
        else:
            print(f"seed {r['seed']}: success {r['success_rate']:.3f} after {r['env_steps']} steps "
                  f"({r['episodes']} episodes, phase {r['phase']})")
    ok = [r["success_rate"] for r in results if "error" not in r]
    if ok:
        s = summarize(ok)
        print(f"{cfg.variant}: median success {s['median']:.3f} (min {s['min']:.3f}, max {s['max']:.3f})")
    return 2 if failed else 0


# -- decompose ---------------------------------------------------------------
def _load_buffer(path: str) -> GoalBuffer:
    with open(path) as fh:
        data = json.load(fh)
    return GoalBuffer.from_json(data.get("goal_buffer", data))


def cmd_decompose(cfg: ExperimentConfig, goal: str | None, buffer: str | None, report_path: str | None,
                  index: int) -> int:
    env = make_env(cfg.env, **cfg.env_params)
    if report_path:
        with open(report_path) as fh:
            report = InfluenceReport.from_json(json.load(fh))
    else:
        report, _ = compute_report(cfg, cfg.seeds[0])
    if goal is not None:
        try:
            g = as_state([float(v) for v in goal.split(",")])
        except ValueError:
            raise ConfigurationError(f"bad goal vector {goal!r}") from None
    else:
        buf = _load_buffer(buffer) if buffer else GoalBuffer()
        if not len(buf):
            raise UsageError("no goal: the buffer is empty and no --goal vector was given")
        if not 0 <= index < len(buf):
            raise ConfigurationError(f"--index {index} out of range for a buffer of {len(buf)}")
        g = buf.goals[index]
    labels = env.dim_labels if len(g) == env.K else None
    dump = decomposition_dump(g, report, labels)
    os.makedirs(cfg.out, exist_ok=True)
    path = os.path.join(cfg.out, "decomposition.json")
    write_json(path, dump)
    for ag in dump["agents"]:
        parts = ", ".join(f"{d['label']}={d['value']:g}[{d['segment'][0]}]" for d in ag["goal"])
        print(f"agent {ag['id']}: {parts or '(empty)'}")
    print(f"written to {path}")
    return 0


# -- evaluate ----------------------------------------------------------------
def cmd_evaluate(cfg: ExperimentConfig, checkpoint: str, episodes: int | None, sampled: bool) -> int:
    final_path = os.path.join(checkpoint, "final.json")
    seed = cfg.seeds[0]
    if os.path.exists(final_path):
        with open(final_path) as fh:
            meta = json.load(fh)
        seed = meta["seed"]
        if meta["variant"] != cfg.variant or meta["env"] != cfg.env:
            cfg = cfg.replace(variant=meta["variant"], env=meta["env"])
    with open(os.path.join(checkpoint, "influence.json")) as fh:
        report = InfluenceReport.from_json(json.load(fh))
    trainer = Trainer(cfg.train_config(), env_factory(cfg), report, seed)
    trainer.load(os.path.join(checkpoint, "checkpoint"))
    res = trainer.evaluate(episodes, greedy=not sampled)
    res.update({"seed": seed, "variant": cfg.variant, "episodes": episodes or cfg.eval_episodes})
    print(json.dumps(res, sort_keys=True))
    return 0


# -- ablate ------------------------------------------------------------------
def cmd_ablate(cfg: ExperimentConfig, variants: list[str]) -> int:
    rows, failed = [], False
    for v in variants:
        if v not in VARIANTS:
            raise ConfigurationError(f"unknown variant {v!r}")
        results = run_seeds(cfg.replace(variant=v))
        ok = [r["success_rate"] for r in results if "error" not in r]
        failed |= len(ok) < len(results)
        s = summarize(ok)
        rows.append({"variant": v, "success_median": s["median"], "success_min": s["min"],
                     "success_max": s["max"], "seeds": s["n"]})
        print(f"{v:>20}: median {s['median']:.3f}  min {s['min']:.3f}  max {s['max']:.3f}  ({s['n']} seeds)")
    os.makedirs(cfg.out, exist_ok=True)
    write_csv(os.path.join(cfg.out, "ablation.csv"), rows)
    return 2 if failed else 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on bad usage; remap to 1
        return 0 if exc.code == 0 else 1
    try:
        cfg = load_config(args)
        if args.command == "influence":
            return cmd_influence(cfg)
        if args.command == "train":
            return cmd_train(cfg, args.resume)
        if args.command == "decompose":
            return cmd_decompose(cfg, args.goal, args.buffer, args.report, args.index)
        if args.command == "evaluate":
            return cmd_evaluate(cfg, args.checkpoint, args.episodes, args.sampled)
        if args.command == "ablate":
            return cmd_ablate(cfg, [v.strip() for v in args.variants.split(",") if v.strip()])
    except (ConfigurationError, UsageError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 1


if __name__ == "__main__":
    sys.exit(main())
