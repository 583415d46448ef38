"""Global-goal buffer and per-agent goal decomposition."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import StructuralError, UsageError, as_state, project
from .exploration import hash_projection
from .influence import InfluenceReport


@dataclass(frozen=True)
class DecomposedGoal:
    g: np.ndarray
    individual: tuple[np.ndarray, ...]  # projection on D_i
    common: np.ndarray  # projection on D^c, identical for every agent
    special: tuple[np.ndarray, ...]  # projection on D^(i-c)

    def common_of(self, agent: int) -> np.ndarray:
        return self.common


def decompose(g: Sequence[float] | np.ndarray, report: InfluenceReport) -> DecomposedGoal:
    g = as_state(g)
    if g.shape[0] != report.K:
        raise StructuralError(f"goal has {g.shape[0]} dims, report expects {report.K}")
    return DecomposedGoal(
        g=g,
        individual=tuple(project(g, d) for d in report.agent_scopes),
        common=project(g, report.common),
        special=tuple(project(g, d) for d in report.special),
    )


class GoalBuffer:
    """Terminal states of successful episodes.

    With ``dedup`` on, a goal whose quantized hash is already stored is
    rejected.
    """

    def __init__(self, widths: Sequence[float] | np.ndarray | float = 1.0, dedup: bool = True):
        self.widths = widths
        self.dedup = dedup
        self.goals: list[np.ndarray] = []
        self._hashes: set[int] = set()

    def __len__(self) -> int:
        return len(self.goals)

    def store_if_success(self, terminal_state: np.ndarray, success: bool) -> bool:
        if not success:
            return False
        g = as_state(terminal_state).copy()
        h = hash_projection(g, self.widths)
        if self.dedup and h in self._hashes:
            return False
        self._hashes.add(h)
        self.goals.append(g)
        return True

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        if not self.goals:
            raise UsageError("goal buffer is empty; stay in the exploration phase")
        return self.goals[int(rng.integers(len(self.goals)))]

    def to_json(self) -> dict:
        w = self.widths
        return {"dedup": self.dedup, "widths": np.asarray(w).tolist(),
                "goals": [g.tolist() for g in self.goals]}

    @classmethod
    def from_json(cls, data: dict) -> GoalBuffer:
        buf = cls(np.asarray(data["widths"], dtype=np.float64), data.get("dedup", True))
        for g in data["goals"]:
            g = np.asarray(g, dtype=np.float64)
            buf._hashes.add(hash_projection(g, buf.widths))
            buf.goals.append(g)
        return buf


def decomposition_dump(g: np.ndarray, report: InfluenceReport, dim_labels: Sequence[str] | None = None) -> dict:
    """Per-agent individual goal with each dimension tagged common or special."""
    dec = decompose(g, report)
    labels = list(dim_labels) if dim_labels else [f"s{k}" for k in range(1, report.K + 1)]
    common = report.common
    agents = []
    for i, scope in enumerate(report.agent_scopes):
        agents.append({
            "id": i,
            "scope": scope.to_json(),
            "common": common.to_json(),
            "special": report.special[i].to_json(),
            "goal": [
                {"index": k, "label": labels[k - 1], "value": float(g[k - 1]),
                 "segment": "common" if k in common else "special"}
                for k in scope
            ],
        })
    return {"global_goal": dec.g.tolist(), "K": report.K, "delta": report.delta,
            "common": common.to_json(), "agents": agents}
