"""GridUnlock: each agent holds keys for its own locks and has to open them.

State layout (1-based)::

    [agent1_x, agent1_y, ..., agentN_x, agentN_y, lock1, ..., lockM]

A lock value is its unlock progress in 0..strength. ``unlock`` advances every
lock the agent holds a key for that is within ``reach`` (Chebyshev distance).
The team gets +1 each time a lock reaches full strength; the episode succeeds
once every lock is open.
"""

from __future__ import annotations

import numpy as np

from ..core import IndexSet
from .base import MOVE_LABELS, EnvSpec, GridEnv, GroundTruth

UNLOCK = 5


class GridUnlock(GridEnv):
    name = "gridunlock"

    def __init__(self, n_agents: int = 2, size: int = 5, max_steps: int = 25,
                 reach: int = 2, strength: int = 5, shared_lock: bool = False,
                 orphan_lock: bool = False, random_start: bool = True,
                 observation_radius: int | None = None):
        super().__init__(n_agents, size, max_steps, random_start, observation_radius)
        self.reach = reach
        self.strength = strength
        self.shared_lock = shared_lock
        self.orphan_lock = orphan_lock
        mid = size // 2
        xs = np.linspace(1, size - 2, n_agents).round().astype(int) if n_agents > 1 else [mid]
        # (position, holders)
        self.locks: list[tuple[tuple[int, int], frozenset[int]]] = [
            ((int(x), mid), frozenset([i])) for i, x in enumerate(xs)
        ]
        if shared_lock:
            self.locks.append(((mid, size - 1), frozenset(range(n_agents))))
        if orphan_lock:
            self.locks.append(((mid, 0), frozenset()))

    @property
    def n_locks(self) -> int:
        return len(self.locks)

    def lock_dim(self, j: int) -> int:
        return 2 * self.n_agents + j + 1

    @property
    def action_labels(self) -> list[list[str]]:
        return [MOVE_LABELS + ["unlock"] for _ in range(self.n_agents)]

    @property
    def dim_labels(self) -> list[str]:
        labels = []
        for i in range(self.n_agents):
            labels += [f"agent{i + 1}_x", f"agent{i + 1}_y"]
        for j, (_, holders) in enumerate(self.locks):
            if len(holders) > 1:
                tag = "shared"
            elif holders:
                tag = f"agent{min(holders) + 1}"
            else:
                tag = "nobody"
            labels.append(f"lock{j + 1}_{tag}")
        return labels

    @property
    def state_scale(self) -> np.ndarray:
        return np.array([self.size - 1] * (2 * self.n_agents) + [self.strength] * self.n_locks, float)

    def ground_truth(self) -> GroundTruth:
        scopes = []
        for i in range(self.n_agents):
            held = IndexSet(self.lock_dim(j) for j, (_, h) in enumerate(self.locks) if i in h)
            scopes.append(self._move_scopes(i) + [held])
        relevant = IndexSet(self.lock_dim(j) for j in range(self.n_locks))
        return GroundTruth(scopes, relevant)

    def spec(self) -> EnvSpec:
        return EnvSpec(
            name=self.name,
            grid_size=self.size,
            n_agents=self.n_agents,
            K=self.K,
            action_labels=self.action_labels,
            dim_labels=self.dim_labels,
            ground_truth=self.ground_truth(),
            success="every lock at full strength",
            reward_rule="+1 to the team whenever a lock becomes fully unlocked",
            max_steps=self.max_steps,
            params={
                "reach": self.reach, "strength": self.strength, "shared_lock": self.shared_lock,
                "orphan_lock": self.orphan_lock, "random_start": self.random_start,
                "observation_radius": self.observation_radius,
                "lock_positions": [list(p) for p, _ in self.locks],
            },
        )

    def _initial_state(self, rng: np.random.Generator) -> np.ndarray:
        s = np.zeros(self.K)
        for i, (x, y) in enumerate(self._start_positions(rng)):
            s[2 * i], s[2 * i + 1] = x, y
        return s

    def _in_reach(self, i: int, pos: tuple[int, int]) -> bool:
        x, y = self.agent_pos(i)
        return max(abs(x - pos[0]), abs(y - pos[1])) <= self.reach

    def _transition(self, actions: tuple[int, ...]) -> tuple[float, bool]:
        s = self._state
        # keys act on the pre-move positions
        turns = np.zeros(self.n_locks)
        for i, a in enumerate(actions):
            if a == UNLOCK:
                for j, (pos, holders) in enumerate(self.locks):
                    if i in holders and self._in_reach(i, pos):
                        turns[j] += 1
        for i, a in enumerate(actions):
            self._move(s, i, a)
        reward = 0.0
        base = 2 * self.n_agents
        for j in range(self.n_locks):
            if turns[j] and s[base + j] < self.strength:
                s[base + j] = min(self.strength, s[base + j] + turns[j])
                if s[base + j] == self.strength:
                    reward += 1.0
        success = bool(np.all(s[base:] == self.strength))
        return reward, success

    def _observe(self, i: int) -> np.ndarray:
        s = self._state
        x, y = self.agent_pos(i)
        out = [x / (self.size - 1), y / (self.size - 1)]
        for j, (pos, _) in enumerate(self.locks):
            v = s[2 * self.n_agents + j] / self.strength
            out.append(v if self._visible(i, pos) else -1.0)
        return np.asarray(out)

    def oracle_actions(self) -> list[int]:
        s = self._state
        acts = []
        for i in range(self.n_agents):
            todo = [pos for j, (pos, h) in enumerate(self.locks)
                    if i in h and s[2 * self.n_agents + j] < self.strength]
            if not todo:
                acts.append(0)
            elif any(self._in_reach(i, p) for p in todo):
                acts.append(UNLOCK)
            else:
                acts.append(self._step_toward(i, todo[0]))
        return acts
