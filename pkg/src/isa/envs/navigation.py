"""GridNavigation: N agents have to cover N landmarks at the same time.

State layout (1-based)::

    [agent1_x, agent1_y, ..., agentN_x, agentN_y]

Landmarks are fixed. By default the team gets +1 the first time in an episode
each landmark is stepped on; with ``super_sparse`` the only reward is the +1
for success (all landmarks occupied simultaneously).
"""

from __future__ import annotations

import numpy as np

from ..core import IndexSet
from .base import MOVE_LABELS, EnvSpec, GridEnv, GroundTruth


class GridNavigation(GridEnv):
    name = "gridnavigation"

    def __init__(self, n_agents: int = 2, size: int = 5, max_steps: int = 25,
                 super_sparse: bool = False, random_start: bool = True,
                 observation_radius: int | None = None):
        super().__init__(n_agents, size, max_steps, random_start, observation_radius)
        self.super_sparse = super_sparse
        spots = [(1, size - 2), (size - 2, 1), (1, 1), (size - 2, size - 2)]
        if n_agents > len(spots):
            raise ValueError("at most 4 agents supported")
        self.landmarks = spots[:n_agents]
        self._visited: set[int] = set()

    @property
    def action_labels(self) -> list[list[str]]:
        return [list(MOVE_LABELS) for _ in range(self.n_agents)]

    @property
    def dim_labels(self) -> list[str]:
        labels = []
        for i in range(self.n_agents):
            labels += [f"agent{i + 1}_x", f"agent{i + 1}_y"]
        return labels

    @property
    def state_scale(self) -> np.ndarray:
        return np.full(self.K, float(self.size - 1))

    def ground_truth(self) -> GroundTruth:
        return GroundTruth([self._move_scopes(i) for i in range(self.n_agents)], IndexSet.full(self.K))

    def spec(self) -> EnvSpec:
        return EnvSpec(
            name=self.name,
            grid_size=self.size,
            n_agents=self.n_agents,
            K=self.K,
            action_labels=self.action_labels,
            dim_labels=self.dim_labels,
            ground_truth=self.ground_truth(),
            success="every landmark occupied at the same time",
            reward_rule=("+1 on success only" if self.super_sparse
                         else "+1 the first time each landmark is occupied in an episode"),
            max_steps=self.max_steps,
            params={"super_sparse": self.super_sparse, "random_start": self.random_start,
                    "observation_radius": self.observation_radius,
                    "landmarks": [list(p) for p in self.landmarks]},
        )

    def _initial_state(self, rng: np.random.Generator) -> np.ndarray:
        s = np.zeros(self.K)
        for i, (x, y) in enumerate(self._start_positions(rng)):
            s[2 * i], s[2 * i + 1] = x, y
        self._visited = set()
        self._mark_visits(s)
        return s

    def _occupied(self, s: np.ndarray) -> set[int]:
        pos = {(int(s[2 * i]), int(s[2 * i + 1])) for i in range(self.n_agents)}
        return {j for j, p in enumerate(self.landmarks) if p in pos}

    def _mark_visits(self, s: np.ndarray) -> int:
        new = self._occupied(s) - self._visited
        self._visited |= new
        return len(new)

    def _transition(self, actions: tuple[int, ...]) -> tuple[float, bool]:
        s = self._state
        for i, a in enumerate(actions):
            self._move(s, i, a)
        fresh = self._mark_visits(s)
        success = len(self._occupied(s)) == len(self.landmarks)
        if self.super_sparse:
            return (1.0 if success else 0.0), success
        return float(fresh), success

    def _observe(self, i: int) -> np.ndarray:
        x, y = self.agent_pos(i)
        return np.array([x / (self.size - 1), y / (self.size - 1)])

    def oracle_actions(self) -> list[int]:
        return [self._step_toward(i, self.landmarks[i]) for i in range(self.n_agents)]
