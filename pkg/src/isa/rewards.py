"""Goal-conditioned intrinsic rewards with influence-gated credit assignment."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import IndexSet, StructuralError, project
from .goals import DecomposedGoal
from .influence import InfluenceReport


@dataclass(frozen=True)
class DistanceConfig:
    lam: float = 0.0  # weight of the Hamming term
    hamming_tolerance: float = 1e-6

    def __post_init__(self):
        if not (math.isfinite(self.lam) and self.lam >= 0):
            raise ValueError("lam must be finite and >= 0")
        if not (math.isfinite(self.hamming_tolerance) and self.hamming_tolerance >= 0):
            raise ValueError("hamming_tolerance must be finite and >= 0")


@dataclass(frozen=True)
class RewardConfig:
    alpha1: float = 0.2  # special-segment scale
    alpha2: float = 1.0  # extrinsic scale


def distance(v1: np.ndarray, v2: np.ndarray, cfg: DistanceConfig = DistanceConfig()) -> float:
    """Euclidean distance plus ``lam`` times the number of differing coordinates."""
    v1 = np.asarray(v1, dtype=np.float64)
    v2 = np.asarray(v2, dtype=np.float64)
    if v1.shape != v2.shape:
        raise StructuralError(f"length mismatch: {v1.shape} vs {v2.shape}")
    if v1.size == 0:
        return 0.0
    diff = v1 - v2
    d = float(np.sqrt(np.dot(diff, diff)))
    if cfg.lam:
        d += cfg.lam * int(np.count_nonzero(np.abs(diff) > cfg.hamming_tolerance))
    return d


def segment_reward(s: np.ndarray, s_next: np.ndarray, goal_segment: np.ndarray, dims: IndexSet,
                   cfg: DistanceConfig = DistanceConfig()) -> float:
    """Decrease in distance to the goal on ``dims``; zero for an empty segment."""
    if not dims:
        return 0.0
    return distance(project(s, dims), goal_segment, cfg) - distance(project(s_next, dims), goal_segment, cfg)


def common_reward(s, s_next, goal_common, common: IndexSet, cfg: DistanceConfig = DistanceConfig()) -> float:
    return segment_reward(s, s_next, goal_common, common, cfg)


def special_reward(s, s_next, goal_special, special: IndexSet, cfg: DistanceConfig = DistanceConfig()) -> float:
    return segment_reward(s, s_next, goal_special, special, cfg)


def agent_reward(s: np.ndarray, action: int, s_next: np.ndarray, goal: DecomposedGoal, agent: int,
                 report: InfluenceReport, dist: DistanceConfig = DistanceConfig(),
                 rew: RewardConfig = RewardConfig(), gate: bool = True) -> float:
    """Intrinsic reward of one agent for one transition.

    The common-segment term is paid only if the executed action's scope meets
    the common segment; ``gate=False`` pays it unconditionally.
    """
    gated = report.gate(agent, action)
    rs = special_reward(s, s_next, goal.special[agent], report.special[agent], dist)
    if gated or not gate:
        return common_reward(s, s_next, goal.common, report.common, dist) + rew.alpha1 * rs
    return rew.alpha1 * rs


def individual_goal_reward(s: np.ndarray, s_next: np.ndarray, goal: DecomposedGoal, agent: int,
                           report: InfluenceReport, dist: DistanceConfig = DistanceConfig()) -> float:
    """Unsegmented variant: distance decrease on the agent's whole scope."""
    return segment_reward(s, s_next, goal.individual[agent], report.agent_scopes[agent], dist)


def training_reward(r_i: float, r: float, alpha2: float = 1.0) -> float:
    return r_i + alpha2 * r
