"""Seed-level experiment plumbing shared by the CLI and the acceptance suite."""

from __future__ import annotations

import csv
import json
import os
import traceback
from concurrent.futures import ProcessPoolExecutor
from functools import partial

import numpy as np

from .config import ExperimentConfig
from .envs import make_env
from .influence import InfluenceReport, check_trainable, estimate_influence
from .trainer.runner import Trainer


def env_factory(cfg: ExperimentConfig):
    return partial(make_env, cfg.env, **cfg.env_params)


def compute_report(cfg: ExperimentConfig, seed: int):
    """Influence report for one seed, or the configured precomputed one (no matrices)."""
    if cfg.report:
        with open(cfg.report) as fh:
            return InfluenceReport.from_json(json.load(fh)), None
    env = make_env(cfg.env, **cfg.env_params)
    return estimate_influence(
        env, cfg.delta, cfg.probe_transitions, cfg.contexts, cfg.horizon, cfg.bins, cfg.min_samples,
        rng=np.random.default_rng([seed, 1]),
    )


def write_csv(path: str, rows: list[dict], fields: list[str] | None = None) -> None:
    fields = fields or (list(rows[0]) if rows else [])
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, extrasaction="ignore")
        w.writeheader()
        w.writerows(rows)


def write_json(path: str, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def seed_dir(out: str, variant: str, seed: int) -> str:
    return os.path.join(out, variant, f"seed{seed}")


def run_seed(cfg: ExperimentConfig, seed: int, resume: bool = False) -> dict:
    """Train one seed and write its curve, evaluations, goals and checkpoint."""
    out = seed_dir(cfg.out, cfg.variant, seed)
    os.makedirs(out, exist_ok=True)
    env = make_env(cfg.env, **cfg.env_params)
    report, _ = compute_report(cfg, seed)
    write_json(os.path.join(out, "influence.json"), report.to_json())
    trainable = check_trainable(env.ground_truth().reward_relevant, report.agent_scopes)
    trainer = Trainer(cfg.train_config(), env_factory(cfg), report, seed)
    ckpt = os.path.join(out, "checkpoint")
    if resume and os.path.exists(os.path.join(ckpt, "state.json")):
        trainer.load(ckpt)
    trainer.run()
    trainer.save(ckpt)
    final = trainer.evaluate()
    fields = ["episode", "phase", "success", "return", "buffer_len", "env_steps"] + [
        f"intrinsic_agent{i}" for i in range(env.n_agents)]
    write_csv(os.path.join(out, "curve.csv"), trainer.curve, fields)
    write_csv(os.path.join(out, "eval.csv"), trainer.evals,
              ["env_steps", "episode", "success_rate", "mean_return", "phase"])
    write_json(os.path.join(out, "goals.json"), trainer.buffer.to_json())
    summary = {"seed": seed, "variant": cfg.variant, "env": cfg.env, "episodes": trainer.episode,
               "env_steps": trainer.env_steps, "phase": trainer.phase, "trainable": trainable.trainable,
               "success_rate": final["success_rate"], "mean_return": final["mean_return"]}
    write_json(os.path.join(out, "final.json"), summary)
    return summary


def _safe_run_seed(cfg: ExperimentConfig, resume: bool, seed: int) -> dict:
    try:
        return run_seed(cfg, seed, resume)
    except Exception as exc:  # isolate per-seed failures
        out = seed_dir(cfg.out, cfg.variant, seed)
        os.makedirs(out, exist_ok=True)
        err = {"seed": seed, "variant": cfg.variant, "error": f"{type(exc).__name__}: {exc}",
               "traceback": traceback.format_exc()}
        if hasattr(exc, "diagnostics"):
            err["diagnostics"] = exc.diagnostics
        write_json(os.path.join(out, "error.json"), err)
        return err


def run_seeds(cfg: ExperimentConfig, resume: bool = False) -> list[dict]:
    job = partial(_safe_run_seed, cfg, resume)
    if cfg.workers > 1 and len(cfg.seeds) > 1:
        with ProcessPoolExecutor(cfg.workers) as ex:
            results = list(ex.map(job, cfg.seeds))
    else:
        results = [job(s) for s in cfg.seeds]
    ok = [r for r in results if "error" not in r]
    out = os.path.join(cfg.out, cfg.variant)
    os.makedirs(out, exist_ok=True)
    if ok:
        curves = []
        for r in ok:
            with open(os.path.join(seed_dir(cfg.out, cfg.variant, r["seed"]), "curve.csv")) as fh:
                curves.append(list(csv.DictReader(fh)))
        write_csv(os.path.join(out, "aggregate.csv"), aggregate_curves(curves, cfg.total_steps))
        write_csv(os.path.join(out, "summary.csv"), ok,
                  ["seed", "variant", "env", "episodes", "env_steps", "phase", "trainable",
                   "success_rate", "mean_return"])
    return results


def aggregate_curves(curves: list[list[dict]], total_steps: int, n_points: int = 50) -> list[dict]:
    """Median/min/max across seeds of the success rate and return, on a grid of env steps.

    Each grid point averages the episodes of a seed that ended in that step window.
    """
    edges = np.linspace(0, total_steps, n_points + 1)
    rows = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        succ, ret = [], []
        for curve in curves:
            window = [r for r in curve if lo < float(r["env_steps"]) <= hi]
            if window:
                succ.append(np.mean([float(r["success"]) for r in window]))
                ret.append(np.mean([float(r["return"]) for r in window]))
        if not succ:
            continue
        rows.append({
            "env_steps": int(hi), "seeds": len(succ),
            "success_median": float(np.median(succ)), "success_min": float(np.min(succ)),
            "success_max": float(np.max(succ)),
            "return_median": float(np.median(ret)), "return_min": float(np.min(ret)),
            "return_max": float(np.max(ret)),
        })
    return rows


def summarize(values: list[float]) -> dict:
    if not values:
        return {"median": float("nan"), "min": float("nan"), "max": float("nan"), "n": 0}
    return {"median": float(np.median(values)), "min": float(np.min(values)),
            "max": float(np.max(values)), "n": len(values)}
