"""Influence scopes of actions and agents, and the common/special split."""

from __future__ import annotations

import json
from functools import cached_property
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import IndexSet, StructuralError
from .mi import DEFAULT_BINS, DEFAULT_MIN_SAMPLES, MIMatrix, collect_probe_transitions, estimate_mi_matrix

DEFAULT_DELTA = 0.3


def scope_of_action(mi_row: Sequence[float], delta: float = DEFAULT_DELTA) -> IndexSet:
    """Dimensions whose MI with the action strictly exceeds ``delta``."""
    row = np.asarray(mi_row, dtype=np.float64)
    return IndexSet(np.nonzero(row > delta)[0] + 1)


def scope_of_agent(action_scopes: Sequence[IndexSet]) -> IndexSet:
    out = IndexSet()
    for d in action_scopes:
        out = out | d
    return out


def partition_segments(agent_scopes: Sequence[IndexSet]) -> tuple[IndexSet, list[IndexSet]]:
    """Return the jointly influenced dims and each agent's remainder."""
    if not agent_scopes:
        raise StructuralError("need at least one agent")
    common = set(agent_scopes[0])
    for d in agent_scopes[1:]:
        common &= set(d)
    common = IndexSet(common)
    return common, [d - common for d in agent_scopes]


@dataclass(frozen=True)
class TrainabilityCheck:
    trainable: bool
    uncovered: IndexSet

    def __bool__(self) -> bool:
        return self.trainable

    def to_json(self) -> dict:
        return {"trainable": self.trainable, "uncovered": self.uncovered.to_json()}


def check_trainable(reward_relevant: IndexSet, agent_scopes: Sequence[IndexSet]) -> TrainabilityCheck:
    covered = scope_of_agent(agent_scopes)
    uncovered = reward_relevant - covered
    return TrainabilityCheck(not uncovered, uncovered)


@dataclass(frozen=True)
class InfluenceReport:
    """Scopes for every agent and action, computed once before training."""

    delta: float
    action_scopes: tuple[tuple[IndexSet, ...], ...]  # [agent][action]
    K: int
    action_labels: tuple[tuple[str, ...], ...] | None = None
    # dims whose MI estimate is exactly zero, per [agent][action]
    zero_mi: tuple[tuple[IndexSet, ...], ...] | None = field(default=None, compare=False)

    def __post_init__(self):
        for per_agent in self.action_scopes:
            for d in per_agent:
                d.check(self.K)

    @property
    def n_agents(self) -> int:
        return len(self.action_scopes)

    @cached_property
    def agent_scopes(self) -> list[IndexSet]:
        return [scope_of_agent(a) for a in self.action_scopes]

    @cached_property
    def _segments(self) -> tuple[IndexSet, list[IndexSet]]:
        return partition_segments(self.agent_scopes)

    @property
    def common(self) -> IndexSet:
        return self._segments[0]

    @property
    def special(self) -> list[IndexSet]:
        return self._segments[1]

    @cached_property
    def _gates(self) -> tuple[tuple[bool, ...], ...]:
        common = self.common
        return tuple(tuple(not d.isdisjoint(common) for d in a) for a in self.action_scopes)

    def action_scope(self, agent: int, action: int) -> IndexSet:
        scopes = self.action_scopes[agent]
        if not 0 <= action < len(scopes):
            raise StructuralError(f"agent {agent} has no action {action}")
        return scopes[action]

    def gate(self, agent: int, action: int) -> bool:
        """True when the action can move the jointly influenced segment."""
        self.action_scope(agent, action)
        return self._gates[agent][action]

    def full_state(self) -> InfluenceReport:
        """Every action influences every dimension (the no-scope ablation)."""
        full = IndexSet.full(self.K)
        return InfluenceReport(
            self.delta, tuple(tuple(full for _ in a) for a in self.action_scopes), self.K, self.action_labels
        )

    def to_json(self) -> dict:
        common = self.common
        special = self.special
        agents = []
        for i, per_agent in enumerate(self.action_scopes):
            actions = []
            for a, d in enumerate(per_agent):
                entry = {"action": a, "scope": d.to_json()}
                if self.action_labels:
                    entry["label"] = self.action_labels[i][a]
                if self.zero_mi is not None:
                    entry["zero_mi"] = self.zero_mi[i][a].to_json()
                actions.append(entry)
            agents.append({
                "id": i,
                "actions": actions,
                "scope": scope_of_agent(per_agent).to_json(),
                "special": special[i].to_json(),
            })
        return {"delta": self.delta, "K": self.K, "agents": agents, "common": common.to_json()}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, data: dict) -> InfluenceReport:
        scopes, labels, zeros = [], [], []
        for ag in sorted(data["agents"], key=lambda a: a["id"]):
            acts = sorted(ag["actions"], key=lambda a: a["action"])
            scopes.append(tuple(IndexSet(a["scope"]) for a in acts))
            labels.append(tuple(a.get("label", str(a["action"])) for a in acts))
            zeros.append(tuple(IndexSet(a.get("zero_mi", [])) for a in acts))
        has_zero = any("zero_mi" in a for ag in data["agents"] for a in ag["actions"])
        K = data.get("K") or max([k for s in scopes for d in s for k in d] + [1])
        return cls(float(data["delta"]), tuple(scopes), int(K), tuple(labels), tuple(zeros) if has_zero else None)

    @classmethod
    def from_ground_truth(cls, gt, K: int, delta: float = DEFAULT_DELTA, action_labels=None) -> InfluenceReport:
        labels = tuple(tuple(x) for x in action_labels) if action_labels else None
        return cls(delta, tuple(tuple(a) for a in gt.scopes), K, labels)


def build_report(matrices: Sequence[MIMatrix], delta: float = DEFAULT_DELTA) -> InfluenceReport:
    scopes, zeros, labels = [], [], []
    K = matrices[0].values.shape[1]
    for m in matrices:
        scopes.append(tuple(scope_of_action(row, delta) for row in m.values))
        zeros.append(tuple(IndexSet(np.nonzero(row == 0.0)[0] + 1) for row in m.values))
        labels.append(tuple(m.action_labels) if m.action_labels else tuple(str(a) for a in range(len(m.values))))
    return InfluenceReport(float(delta), tuple(scopes), K, tuple(labels), tuple(zeros))


def estimate_influence(
    env,
    delta: float = DEFAULT_DELTA,
    n_transitions: int = 2000,
    context_count: int = 8,
    horizon: int = 1,
    bins: int = DEFAULT_BINS,
    min_samples: int = DEFAULT_MIN_SAMPLES,
    rng: np.random.Generator | None = None,
    pooled: bool = False,
) -> tuple[InfluenceReport, list[MIMatrix]]:
    """Probe every agent, estimate its MI matrix and threshold it.

    ``pooled=True`` drops the conditioning on other agents' actions (ablation).
    """
    rng = np.random.default_rng() if rng is None else rng
    per_context = max(1, n_transitions // context_count)
    matrices = []
    for i in range(env.n_agents):
        probe = collect_probe_transitions(env, i, context_count, per_context, horizon, rng)
        if pooled:
            probe = probe.pooled()
        matrices.append(estimate_mi_matrix(probe, bins, min_samples, list(env.action_labels[i])))
    return build_report(matrices, delta), matrices
