"""Experiment configuration, read from and written to YAML."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Any

import yaml

from .core import ConfigurationError
from .envs import REGISTRY
from .influence import DEFAULT_DELTA
from .mi import DEFAULT_BINS, DEFAULT_MIN_SAMPLES
from .trainer.ppo import PPOConfig
from .trainer.runner import VARIANTS, TrainConfig

# Hamming weight per environment: 0 for navigation and unlock, 50 elsewhere
LAMBDA_DEFAULTS = {"gridnavigation": 0.0, "gridunlock": 0.0, "gridshooting": 50.0}

# YAML spelling -> field name, for keys that are Python keywords
_ALIASES = {"lambda": "lam"}


@dataclass
class ExperimentConfig:
    env: str = "gridunlock"
    env_params: dict = field(default_factory=dict)
    variant: str = "isa"
    # influence estimation
    delta: float = DEFAULT_DELTA
    probe_transitions: int = 2000  # N
    contexts: int = 8
    horizon: int = 1
    bins: int = DEFAULT_BINS
    min_samples: int = DEFAULT_MIN_SAMPLES
    report: str | None = None  # precomputed influence report; estimated per seed when absent
    # rewards
    lam: float | None = None  # None: per-environment default
    hamming_tolerance: float = 1e-6
    alpha1: float = 0.2
    alpha2: float = 1.0
    beta1: float = 0.2
    beta2: float = 1.0
    # training
    goal_trigger: int = 1  # L
    episodes: int | None = None  # M
    total_steps: int = 100_000
    num_envs: int = 8
    policy: str = "mlp"
    hidden: int = 64
    share_params: bool = False
    dedup_goals: bool = True
    ppo: PPOConfig = field(default_factory=PPOConfig)
    # evaluation and output
    eval_episodes: int = 50
    eval_every: int = 10_000
    greedy_eval: bool = True
    seeds: list = field(default_factory=lambda: [0, 1, 2, 3, 4])
    out: str = "runs"
    workers: int = 1

    def __post_init__(self):
        if isinstance(self.ppo, dict):
            try:
                self.ppo = PPOConfig(**self.ppo)
            except TypeError as exc:
                raise ConfigurationError(f"bad ppo section: {exc}") from None
        self.env = self.env.lower()
        if self.env not in REGISTRY:
            raise ConfigurationError(f"unknown environment {self.env!r}; choose from {sorted(REGISTRY)}")
        if self.variant not in VARIANTS:
            raise ConfigurationError(f"unknown variant {self.variant!r}; choose from {list(VARIANTS)}")
        if self.delta < 0:
            raise ConfigurationError("delta must be >= 0")
        if self.lam is not None and self.lam < 0:
            raise ConfigurationError("lambda must be >= 0")
        if self.horizon < 1 or self.bins < 1 or self.contexts < 1:
            raise ConfigurationError("horizon, bins and contexts must be >= 1")
        if self.probe_transitions // self.contexts < self.min_samples:
            raise ConfigurationError("probe_transitions / contexts must be at least min_samples")
        self.seeds = [int(s) for s in self.seeds]

    @property
    def distance_lambda(self) -> float:
        return LAMBDA_DEFAULTS[self.env] if self.lam is None else float(self.lam)

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            variant=self.variant, total_steps=self.total_steps, episodes=self.episodes,
            num_envs=self.num_envs, goal_trigger=self.goal_trigger,
            alpha1=self.alpha1, alpha2=self.alpha2, beta1=self.beta1, beta2=self.beta2,
            lam=self.distance_lambda, hamming_tolerance=self.hamming_tolerance,
            dedup_goals=self.dedup_goals, policy=self.policy, hidden=self.hidden,
            share_params=self.share_params, eval_episodes=self.eval_episodes,
            eval_every=self.eval_every, greedy_eval=self.greedy_eval, ppo=self.ppo,
        )

    def to_dict(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if isinstance(v, PPOConfig):
                v = dataclasses.asdict(v)
            key = next((k for k, name in _ALIASES.items() if name == f.name), f.name)
            out[key] = v
        return out

    @classmethod
    def from_dict(cls, data: dict | None) -> ExperimentConfig:
        data = dict(data or {})
        names = {f.name for f in dataclasses.fields(cls)}
        kwargs: dict[str, Any] = {}
        for key, value in data.items():
            name = _ALIASES.get(key, key)
            if name not in names:
                raise ConfigurationError(f"unknown config key {key!r}")
            kwargs[name] = value
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigurationError(str(exc)) from None

    def dumps(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    @classmethod
    def loads(cls, text: str) -> ExperimentConfig:
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigurationError(f"invalid YAML: {exc}") from None
        if data is not None and not isinstance(data, dict):
            raise ConfigurationError("config must be a mapping")
        return cls.from_dict(data)

    @classmethod
    def load(cls, path: str) -> ExperimentConfig:
        try:
            with open(path) as fh:
                return cls.loads(fh.read())
        except OSError as exc:
            raise ConfigurationError(f"cannot read config: {exc}") from None

    def replace(self, **changes) -> ExperimentConfig:
        return ExperimentConfig.from_dict({**self.to_dict(), **{
            next((k for k, n in _ALIASES.items() if n == key), key): v for key, v in changes.items()}})
