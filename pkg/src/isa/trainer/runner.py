"""Two-phase training loop: scoped exploration until a success is found, then
goal-conditioned learning with influence-gated rewards."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import torch

from ..core import ConfigurationError, IndexSet
from ..envs.base import GridEnv
from ..exploration import ScopedCounter, exploration_reward
from ..goals import GoalBuffer, decompose
from ..influence import InfluenceReport
from ..rewards import DistanceConfig, RewardConfig, agent_reward, individual_goal_reward
from .policy import act, make_policy
from .ppo import Batch, PPOConfig, TrainingDiverged, gae, update_policy

VARIANTS = ("isa", "no-influence-scope", "individual-goal", "no-eq7-gate", "no-eq10-gate",
            "baseline-count", "baseline-vanilla")

CURVE_FIELDS = ["episode", "phase", "success", "return", "buffer_len", "env_steps"]


@dataclass
class TrainConfig:
    variant: str = "isa"
    total_steps: int = 100_000
    episodes: int | None = None  # M; None means limited by total_steps only
    num_envs: int = 8
    goal_trigger: int = 1  # L
    alpha1: float = 0.2
    alpha2: float = 1.0
    beta1: float = 0.2
    beta2: float = 1.0
    lam: float = 0.0
    hamming_tolerance: float = 1e-6
    dedup_goals: bool = True
    policy: str = "mlp"
    hidden: int = 64
    share_params: bool = False
    eval_episodes: int = 20
    eval_every: int = 0  # env steps between evaluations; 0 disables periodic evaluation
    greedy_eval: bool = True
    ppo: PPOConfig = field(default_factory=PPOConfig)

    def __post_init__(self):
        if isinstance(self.ppo, dict):
            self.ppo = PPOConfig(**self.ppo)
        if self.variant not in VARIANTS:
            raise ConfigurationError(f"unknown variant {self.variant!r}; choose from {list(VARIANTS)}")
        if self.goal_trigger < 1 or self.num_envs < 1 or self.total_steps < 1:
            raise ConfigurationError("goal_trigger, num_envs and total_steps must be >= 1")

    @property
    def uses_goals(self) -> bool:
        return not self.variant.startswith("baseline")


class _Net:
    """Policy/value module with its own optimizer."""

    def __init__(self, in_dim: int, n_actions: int, cfg: TrainConfig):
        self.module = make_policy(cfg.policy, in_dim, n_actions, cfg.hidden)
        self.opt = torch.optim.Adam(self.module.parameters(), lr=cfg.ppo.lr, eps=1e-5)


class Trainer:
    """State of one training run (one seed)."""

    def __init__(self, cfg: TrainConfig, env_fn: Callable[[], GridEnv], report: InfluenceReport, seed: int = 0):
        torch.set_num_threads(1)
        torch.manual_seed(seed)
        self.cfg = cfg
        self.env_fn = env_fn
        self.envs = [env_fn() for _ in range(cfg.num_envs)]
        env = self.envs[0]
        if report.K != env.K or report.n_agents != env.n_agents:
            raise ConfigurationError("influence report does not match the environment")
        self.seed = seed
        self.rng = np.random.default_rng(seed)
        self.n_agents = env.n_agents
        self.scale = np.maximum(env.state_scale, 1e-8)
        self.report = report
        # the scopes used for counting and goals; full state for the no-scope ablation
        self.scopes = report.full_state() if cfg.variant in ("no-influence-scope", "baseline-count") else report
        self.dist = DistanceConfig(cfg.lam, cfg.hamming_tolerance)
        self.rew = RewardConfig(cfg.alpha1, cfg.alpha2)
        widths = env.quantization
        self.counter = ScopedCounter(self.scopes.common, self.scopes.special, widths)
        self.buffer = GoalBuffer(widths, dedup=cfg.dedup_goals)
        obs_dim = env.obs_dim
        counts = env.action_counts
        self.explore_nets = self._build([obs_dim] * self.n_agents, counts)
        goal_dims = [obs_dim + len(d) for d in self.scopes.agent_scopes]
        self.goal_nets = self._build(goal_dims, counts) if cfg.uses_goals else []
        self.episode = 0
        self.env_steps = 0
        self.curve: list[dict] = []
        self.evals: list[dict] = []
        self._next_eval = cfg.eval_every or None

    def _build(self, dims: list[int], counts: list[int]) -> list[_Net]:
        if self.cfg.share_params:
            if len(set(dims)) != 1 or len(set(counts)) != 1:
                raise ConfigurationError("parameter sharing needs equal input and action sizes for all agents")
            net = _Net(dims[0], counts[0], self.cfg)
            return [net] * len(dims)
        return [_Net(d, n, self.cfg) for d, n in zip(dims, counts)]

    # -- phases ------------------------------------------------------------
    @property
    def phase(self) -> str:
        if self.cfg.uses_goals and len(self.buffer) >= self.cfg.goal_trigger:
            return "goal"
        return "explore"

    def goal_input(self, agent: int, goal) -> np.ndarray:
        d = self.scopes.agent_scopes[agent]
        return goal.individual[agent] / self.scale[d.zero_based()]

    def policy_input(self, agent: int, obs: np.ndarray, goal) -> np.ndarray:
        """What agent ``agent`` sees: its own observation and, if any, its own goal."""
        if goal is None:
            return np.asarray(obs, dtype=np.float64)
        return np.concatenate([obs, self.goal_input(agent, goal)])

    # -- intrinsic rewards -------------------------------------------------
    def _explore_rewards(self, s_next: np.ndarray, actions) -> list[float]:
        cfg = self.cfg
        if cfg.variant == "baseline-vanilla":
            return [0.0] * self.n_agents
        rc, rs = self.counter.step(s_next)
        out = []
        for i, a in enumerate(actions):
            gated = True if cfg.variant == "no-eq10-gate" else self.scopes.gate(i, a)
            out.append(exploration_reward(rc, rs[i], gated, cfg.beta1))
        return out

    def _goal_rewards(self, s, actions, s_next, goal) -> list[float]:
        cfg = self.cfg
        out = []
        for i, a in enumerate(actions):
            if cfg.variant == "individual-goal":
                out.append(individual_goal_reward(s, s_next, goal, i, self.scopes, self.dist))
            else:
                out.append(agent_reward(s, a, s_next, goal, i, self.scopes, self.dist, self.rew,
                                        gate=cfg.variant != "no-eq7-gate"))
        return out

    def extrinsic_scale(self, phase: str) -> float:
        if self.cfg.variant == "baseline-vanilla":
            return 1.0
        return self.cfg.alpha2 if phase == "goal" else self.cfg.beta2

    # -- rollout -----------------------------------------------------------
    def _batch_size(self) -> int:
        cfg = self.cfg
        n = min(cfg.num_envs, (cfg.total_steps - self.env_steps) // self.envs[0].max_steps)
        if cfg.episodes is not None:
            n = min(n, cfg.episodes - self.episode)
        return max(n, 0)

    def train_batch(self) -> list[dict]:
        """Collect one episode per environment in lockstep, then update."""
        n_env = self._batch_size()
        if n_env == 0:
            return []
        phase = self.phase
        nets = self.goal_nets if phase == "goal" else self.explore_nets
        envs = self.envs[:n_env]
        states, obs, goals = [], [], []
        for env in envs:
            s, o = env.reset(int(self.rng.integers(2**31)))
            states.append(s)
            obs.append(o)
            goals.append(decompose(self.buffer.sample(self.rng), self.scopes) if phase == "goal" else None)

        N = self.n_agents
        traj = [{"x": [[] for _ in range(N)], "a": [[] for _ in range(N)], "logp": [[] for _ in range(N)],
                 "v": [[] for _ in range(N)], "r": [[] for _ in range(N)], "ri": [[] for _ in range(N)], "done": [],
                 "ret": 0.0, "success": False} for _ in envs]
        ext = self.extrinsic_scale(phase)
        active = list(range(n_env))
        while active:
            per_agent = []
            for i in range(N):
                x = np.stack([self.policy_input(i, obs[e][i], goals[e]) for e in active])
                per_agent.append((x,) + act(nets[i].module, x, self.rng))
            still = []
            for j, e in enumerate(active):
                actions = [int(per_agent[i][1][j]) for i in range(N)]
                res = envs[e].step(actions)
                if phase == "goal":
                    intrinsic = self._goal_rewards(states[e], actions, res.state, goals[e])
                else:
                    intrinsic = self._explore_rewards(res.state, actions)
                tr = traj[e]
                for i in range(N):
                    x, a, logp, v = per_agent[i]
                    tr["x"][i].append(x[j])
                    tr["a"][i].append(a[j])
                    tr["logp"][i].append(logp[j])
                    tr["v"][i].append(v[j])
                    tr["ri"][i].append(intrinsic[i])
                    tr["r"][i].append(intrinsic[i] + ext * res.reward)
                tr["done"].append(res.done)
                tr["ret"] += res.reward
                states[e], obs[e] = res.state, res.obs
                self.env_steps += 1
                if res.done:
                    tr["success"] = res.success
                    tr["terminal"] = res.state
                else:
                    still.append(e)
            active = still

        rows = []
        for e, tr in enumerate(traj):
            self.buffer.store_if_success(tr["terminal"], tr["success"])
            self.episode += 1
            row = {"episode": self.episode, "phase": phase, "success": int(tr["success"]),
                   "return": tr["ret"], "buffer_len": len(self.buffer), "env_steps": 0}
            for i in range(N):
                row[f"intrinsic_agent{i}"] = float(np.mean(tr["ri"][i]))
            rows.append(row)
        for k, row in enumerate(rows):
            # steps consumed up to and including this episode, in batch order
            row["env_steps"] = self.env_steps - sum(len(t["done"]) for t in traj[k + 1:])

        try:
            self._update(nets, traj)
        except TrainingDiverged as exc:
            exc.diagnostics["episode"] = self.episode
            raise
        self.curve.extend(rows)
        if self._next_eval is not None and self.env_steps >= self._next_eval:
            self.evals.append(self.evaluate_row())
            while self._next_eval <= self.env_steps:
                self._next_eval += self.cfg.eval_every
        return rows

    def _agent_batch(self, traj, i: int) -> Batch:
        ppo = self.cfg.ppo
        parts = []
        for tr in traj:
            adv, ret = gae(np.asarray(tr["r"][i]), np.asarray(tr["v"][i]), np.asarray(tr["done"]),
                           0.0, ppo.gamma, ppo.gae_lambda)
            parts.append((np.asarray(tr["x"][i]), np.asarray(tr["a"][i]), np.asarray(tr["logp"][i]), adv, ret))
        return Batch(*(np.concatenate([p[k] for p in parts]) for k in range(5)))

    def _update(self, nets, traj) -> list[dict]:
        if self.cfg.ppo.anneal_lr:
            frac = max(0.0, 1.0 - self.env_steps / self.cfg.total_steps)
            for net in {id(n): n for n in nets}.values():
                for group in net.opt.param_groups:
                    group["lr"] = self.cfg.ppo.lr * frac
        batches = [self._agent_batch(traj, i) for i in range(self.n_agents)]
        if self.cfg.share_params:
            merged = Batch(*(np.concatenate([getattr(b, f) for b in batches])
                             for f in ("inputs", "actions", "logp", "advantages", "returns")))
            return [update_policy(nets[0].module, nets[0].opt, merged, self.cfg.ppo, self.rng)]
        return [update_policy(nets[i].module, nets[i].opt, batches[i], self.cfg.ppo, self.rng)
                for i in range(self.n_agents)]

    def run(self) -> list[dict]:
        while self.train_batch():
            pass
        return self.curve

    # -- evaluation --------------------------------------------------------
    def evaluate(self, episodes: int | None = None, greedy: bool | None = None, seed: int | None = None) -> dict:
        """Success rate and mean return without learning, counting or storing goals."""
        episodes = self.cfg.eval_episodes if episodes is None else episodes
        greedy = self.cfg.greedy_eval if greedy is None else greedy
        rng = np.random.default_rng([self.seed, 7919] if seed is None else seed)
        use_goals = self.phase == "goal"
        nets = self.goal_nets if use_goals else self.explore_nets
        env = self.env_fn()
        wins, total = 0, 0.0
        for _ in range(episodes):
            s, obs = env.reset(int(rng.integers(2**31)))
            goal = decompose(self.buffer.sample(rng), self.scopes) if use_goals else None
            done = False
            while not done:
                actions = []
                for i in range(self.n_agents):
                    x = self.policy_input(i, obs[i], goal)[None]
                    actions.append(int(act(nets[i].module, x, rng, greedy)[0][0]))
                res = env.step(actions)
                obs, done = res.obs, res.done
                total += res.reward
            wins += int(res.success)
        return {"success_rate": wins / episodes, "mean_return": total / episodes, "phase": self.phase}

    def evaluate_row(self) -> dict:
        ev = self.evaluate()
        return {"env_steps": self.env_steps, "episode": self.episode, **ev}

    # -- checkpoints -------------------------------------------------------
    def save(self, directory: str) -> None:
        os.makedirs(directory, exist_ok=True)
        arrays = {}
        for tag, nets in (("explore", self.explore_nets), ("goal", self.goal_nets)):
            for i, net in enumerate(nets):
                for name, t in net.module.state_dict().items():
                    arrays[f"{tag}/{i}/param/{name}"] = t.numpy()
                for pid, st in net.opt.state_dict()["state"].items():
                    for key, val in st.items():
                        arrays[f"{tag}/{i}/adam/{pid}/{key}"] = torch.as_tensor(val).numpy()
        np.savez(os.path.join(directory, "params.npz"), **arrays)
        state = {
            "seed": self.seed,
            "episode": self.episode,
            "env_steps": self.env_steps,
            "phase": self.phase,
            "rng": self.rng.bit_generator.state,
            "goal_buffer": self.buffer.to_json(),
            "counts": self.counter.to_json(),
            "curve": self.curve,
            "evals": self.evals,
            "next_eval": self._next_eval,
        }
        with open(os.path.join(directory, "state.json"), "w") as fh:
            json.dump(state, fh, default=_json_default)

    def load(self, directory: str) -> None:
        with open(os.path.join(directory, "state.json")) as fh:
            state = json.load(fh)
        data = np.load(os.path.join(directory, "params.npz"))
        for tag, nets in (("explore", self.explore_nets), ("goal", self.goal_nets)):
            for i, net in enumerate(nets):
                prefix = f"{tag}/{i}/param/"
                net.module.load_state_dict({k[len(prefix):]: torch.as_tensor(data[k])
                                            for k in data.files if k.startswith(prefix)})
                opt_state = net.opt.state_dict()
                adam = {}
                prefix = f"{tag}/{i}/adam/"
                for k in data.files:
                    if k.startswith(prefix):
                        pid, key = k[len(prefix):].split("/")
                        adam.setdefault(int(pid), {})[key] = torch.as_tensor(data[k])
                opt_state["state"] = adam
                net.opt.load_state_dict(opt_state)
        self.episode = state["episode"]
        self.env_steps = state["env_steps"]
        self.rng.bit_generator.state = state["rng"]
        self.buffer = GoalBuffer.from_json(state["goal_buffer"])
        self.counter = ScopedCounter.from_json(state["counts"])
        self.curve = state["curve"]
        self.evals = state.get("evals", [])
        self._next_eval = state.get("next_eval")


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, IndexSet):
        return o.to_json()
    raise TypeError(type(o).__name__)


@dataclass
class TrainResult:
    curve: list[dict]
    evaluation: dict
    evals: list[dict]
    trainer: Trainer


def run_training(cfg: TrainConfig, env_fn: Callable[[], GridEnv], report: InfluenceReport, seed: int = 0,
                 resume_from: str | None = None) -> TrainResult:
    trainer = Trainer(cfg, env_fn, report, seed)
    if resume_from:
        trainer.load(resume_from)
    trainer.run()
    return TrainResult(trainer.curve, trainer.evaluate(), trainer.evals, trainer)


def random_policy_success(env: GridEnv, episodes: int, rng: np.random.Generator) -> float:
    wins = 0
    for _ in range(episodes):
        env.reset(int(rng.integers(2**31)))
        done = False
        while not done:
            res = env.step([int(rng.integers(n)) for n in env.action_counts])
            done = res.done
        wins += int(res.success)
    return wins / episodes


def oracle_success(env: GridEnv, episodes: int, rng: np.random.Generator) -> float:
    wins = 0
    for _ in range(episodes):
        env.reset(int(rng.integers(2**31)))
        done = False
        while not done:
            res = env.step(env.oracle_actions())
            done = res.done
        wins += int(res.success)
    return wins / episodes



