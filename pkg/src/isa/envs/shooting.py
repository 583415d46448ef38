"""GridShooting: agents wear down shared targets, then take up their posts.

State layout (1-based)::

    [agent1_x, agent1_y, ..., agentN_x, agentN_y, target1_health, ..., targetT_health,
     drifter1_x, drifter1_y, ...]

``shoot_k`` from within ``shoot_range`` of target k removes one health point.
With ``damage_delay=1`` the hit lands one step later (the in-flight shot is not
part of the state). Success, paid +1 to the team, is every target at zero
health with every agent on its own post; the episode ends on success or at
``max_steps``. With ``end_on_clear`` the episode also ends (unsuccessfully)
when the last target falls while some agent is off its post.

Drifters wander one random step (or stay) per tick whatever the agents do.
They are neither observed nor reward-relevant; they only enlarge the state.
"""

from __future__ import annotations

import numpy as np

from ..core import IndexSet
from .base import MOVE_LABELS, EnvSpec, GridEnv, GroundTruth


class GridShooting(GridEnv):
    name = "gridshooting"

    def __init__(self, n_agents: int = 2, size: int = 5, max_steps: int = 50,
                 n_targets: int = 1, health: int = 8, shoot_range: int = 2,
                 damage_delay: int = 0, end_on_clear: bool = False, n_drifters: int = 0,
                 random_start: bool = True,
                 observation_radius: int | None = None):
        super().__init__(n_agents, size, max_steps, random_start, observation_radius)
        if damage_delay not in (0, 1):
            raise ValueError("damage_delay must be 0 or 1")
        self.n_targets = n_targets
        self.health = health
        self.shoot_range = shoot_range
        self.damage_delay = damage_delay
        self.end_on_clear = end_on_clear
        if n_drifters < 0:
            raise ValueError("n_drifters must be >= 0")
        self.n_drifters = n_drifters
        mid = size // 2
        self.target_pos = [(mid, mid)] * n_targets
        corners = [(0, 0), (size - 1, size - 1), (0, size - 1), (size - 1, 0)]
        self.posts = [corners[i % 4] for i in range(n_agents)]
        self._pending = np.zeros(n_targets)

    def health_dim(self, k: int) -> int:
        return 2 * self.n_agents + k + 1

    def drifter_dims(self, j: int) -> tuple[int, int]:
        base = 2 * self.n_agents + self.n_targets
        return base + 2 * j + 1, base + 2 * j + 2

    @property
    def exogenous_dims(self) -> IndexSet:
        return IndexSet(d for j in range(self.n_drifters) for d in self.drifter_dims(j))

    @property
    def action_labels(self) -> list[list[str]]:
        shots = [f"shoot_{k + 1}" for k in range(self.n_targets)]
        return [MOVE_LABELS + shots for _ in range(self.n_agents)]

    @property
    def dim_labels(self) -> list[str]:
        labels = []
        for i in range(self.n_agents):
            labels += [f"agent{i + 1}_x", f"agent{i + 1}_y"]
        labels += [f"target{k + 1}_health" for k in range(self.n_targets)]
        for j in range(self.n_drifters):
            labels += [f"drifter{j + 1}_x", f"drifter{j + 1}_y"]
        return labels

    @property
    def state_scale(self) -> np.ndarray:
        return np.array([self.size - 1] * (2 * self.n_agents) + [self.health] * self.n_targets
                        + [self.size - 1] * (2 * self.n_drifters), float)

    def ground_truth(self) -> GroundTruth:
        scopes = [
            self._move_scopes(i) + [IndexSet([self.health_dim(k)]) for k in range(self.n_targets)]
            for i in range(self.n_agents)
        ]
        return GroundTruth(scopes, IndexSet.full(self.K) - self.exogenous_dims)

    def spec(self) -> EnvSpec:
        return EnvSpec(
            name=self.name,
            grid_size=self.size,
            n_agents=self.n_agents,
            K=self.K,
            action_labels=self.action_labels,
            dim_labels=self.dim_labels,
            ground_truth=self.ground_truth(),
            success="all targets at zero health and every agent on its own post",
            reward_rule="+1 to the team only when both subtasks are complete",
            max_steps=self.max_steps,
            params={
                "n_targets": self.n_targets, "health": self.health,
                "shoot_range": self.shoot_range, "damage_delay": self.damage_delay,
                "end_on_clear": self.end_on_clear, "n_drifters": self.n_drifters,
                "random_start": self.random_start, "observation_radius": self.observation_radius,
                "posts": [list(p) for p in self.posts],
                "target_positions": [list(p) for p in self.target_pos],
            },
        )

    def _initial_state(self, rng: np.random.Generator) -> np.ndarray:
        s = np.zeros(self.K)
        for i, (x, y) in enumerate(self._start_positions(rng)):
            s[2 * i], s[2 * i + 1] = x, y
        base = 2 * self.n_agents
        s[base:base + self.n_targets] = self.health
        drift = rng.integers(0, self.size, size=2 * self.n_drifters)
        s[base + self.n_targets:] = drift
        self._rng = rng
        self._pending = np.zeros(self.n_targets)
        self._cleared = False
        return s

    def _in_range(self, i: int, k: int) -> bool:
        x, y = self.agent_pos(i)
        tx, ty = self.target_pos[k]
        return max(abs(x - tx), abs(y - ty)) <= self.shoot_range

    def _transition(self, actions: tuple[int, ...]) -> tuple[float, bool]:
        s = self._state
        base = 2 * self.n_agents
        health = slice(base, base + self.n_targets)
        hits = np.zeros(self.n_targets)
        for i, a in enumerate(actions):
            k = a - len(MOVE_LABELS)
            if k >= 0 and s[base + k] > 0 and self._in_range(i, k):
                hits[k] += 1
        for i, a in enumerate(actions):
            self._move(s, i, a)
        if self.damage_delay:
            hits, self._pending = self._pending, hits
        s[health] = np.maximum(0.0, s[health] - hits)
        self._drift(s)
        self._cleared = bool(np.all(s[health] == 0))
        on_posts = all(self.agent_pos(i) == self.posts[i] for i in range(self.n_agents))
        success = self._cleared and on_posts
        return (1.0 if success else 0.0), success

    def _drift(self, s: np.ndarray) -> None:
        for j in range(self.n_drifters):
            x, y = (d - 1 for d in self.drifter_dims(j))
            dx, dy = [(0, 0), (0, 1), (0, -1), (1, 0), (-1, 0)][int(self._rng.integers(5))]
            s[x] = min(max(s[x] + dx, 0), self.size - 1)
            s[y] = min(max(s[y] + dy, 0), self.size - 1)

    def step(self, actions):
        res = super().step(actions)
        if self.end_on_clear and self._cleared and not res.done:
            self._done = True
            res = res._replace(done=True)
        return res

    def _observe(self, i: int) -> np.ndarray:
        s = self._state
        x, y = self.agent_pos(i)
        out = [x / (self.size - 1), y / (self.size - 1)]
        for k in range(self.n_targets):
            v = s[2 * self.n_agents + k] / self.health
            out.append(v if self._visible(i, self.target_pos[k]) else -1.0)
        return np.asarray(out)

    def oracle_actions(self) -> list[int]:
        s = self._state
        base = 2 * self.n_agents
        remaining = s[base:base + self.n_targets] - self._pending
        alive = [k for k in range(self.n_targets) if remaining[k] > 0]
        acts = []
        for i in range(self.n_agents):
            move = self._step_toward(i, self.posts[i])
            if move:
                acts.append(move)
                continue
            k = next((k for k in alive if remaining[k] > 0 and self._in_range(i, k)), None)
            if k is None:
                acts.append(0)
            else:
                acts.append(len(MOVE_LABELS) + k)
                remaining[k] -= 1
        if any(a >= len(MOVE_LABELS) for a in acts) and any(
                self._step_toward(i, self.posts[i]) for i in range(self.n_agents)):
            # hold fire until everyone is on post so the last hit cannot land early
            acts = [a if a < len(MOVE_LABELS) else 0 for a in acts]
        return acts
