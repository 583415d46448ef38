"""Common machinery for the factored-state grid tasks.

Every environment lays its state out as contiguous entity blocks
(agent x/y pairs first, then shared entities) and declares, per action,
which dimensions that action can change.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from ..core import IndexSet, UsageError, check_joint_action

NOOP, NORTH, SOUTH, EAST, WEST = range(5)
MOVE_LABELS = ["noop", "move_north", "move_south", "move_east", "move_west"]
_MOVES = {NORTH: (0, 1), SOUTH: (0, -1), EAST: (1, 0), WEST: (-1, 0)}


class StepResult(NamedTuple):
    state: np.ndarray
    obs: list[np.ndarray]
    reward: float
    done: bool
    success: bool


@dataclass
class GroundTruth:
    scopes: list[list[IndexSet]]  # [agent][action]
    reward_relevant: IndexSet

    def agent_scope(self, i: int) -> IndexSet:
        out = IndexSet()
        for d in self.scopes[i]:
            out = out | d
        return out


@dataclass
class EnvSpec:
    name: str
    grid_size: int
    n_agents: int
    K: int
    action_labels: list[list[str]]
    dim_labels: list[str]
    ground_truth: GroundTruth
    success: str
    reward_rule: str
    max_steps: int
    params: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "grid_size": self.grid_size,
            "n_agents": self.n_agents,
            "K": self.K,
            "dimensions": [{"index": k + 1, "label": lab} for k, lab in enumerate(self.dim_labels)],
            "actions": [
                [
                    {"action": a, "label": lab, "scope": self.ground_truth.scopes[i][a].to_json()}
                    for a, lab in enumerate(labels)
                ]
                for i, labels in enumerate(self.action_labels)
            ],
            "reward_relevant": self.ground_truth.reward_relevant.to_json(),
            "success": self.success,
            "reward_rule": self.reward_rule,
            "max_steps": self.max_steps,
            "params": self.params,
        }


class GridEnv:
    """Base class. Subclasses fill in layout, dynamics and the oracle policy."""

    name = "grid"

    def __init__(self, n_agents: int = 2, size: int = 5, max_steps: int = 25,
                 random_start: bool = True, observation_radius: int | None = None):
        self.n_agents = n_agents
        self.size = size
        self.max_steps = max_steps
        self.random_start = random_start
        self.observation_radius = observation_radius
        self._state: np.ndarray | None = None
        self._t = 0
        self._done = True

    # -- layout, provided by subclasses ------------------------------------
    @property
    def K(self) -> int:
        return len(self.dim_labels)

    @property
    def action_labels(self) -> list[list[str]]:
        raise NotImplementedError

    @property
    def dim_labels(self) -> list[str]:
        raise NotImplementedError

    @property
    def action_counts(self) -> list[int]:
        return [len(a) for a in self.action_labels]

    @property
    def state_scale(self) -> np.ndarray:
        """Per-dimension magnitude used to normalise state values for policy inputs."""
        raise NotImplementedError

    @property
    def quantization(self) -> np.ndarray:
        """Cell width per dimension for visit counting; all bundled dims are integer-valued."""
        return np.ones(self.K)

    @property
    def exogenous_dims(self) -> IndexSet:
        """Dimensions that change on their own, whatever the agents do."""
        return IndexSet()

    def ground_truth(self) -> GroundTruth:
        raise NotImplementedError

    def spec(self) -> EnvSpec:
        raise NotImplementedError

    def legend(self) -> dict:
        return self.spec().to_json()

    # -- helpers -----------------------------------------------------------
    def pos_dims(self, i: int) -> tuple[int, int]:
        """1-based (x, y) dimension indices of agent ``i``."""
        return 2 * i + 1, 2 * i + 2

    def agent_pos(self, i: int, state: np.ndarray | None = None) -> tuple[int, int]:
        s = self._state if state is None else state
        return int(s[2 * i]), int(s[2 * i + 1])

    def _move(self, s: np.ndarray, i: int, a: int) -> None:
        if a in _MOVES:
            dx, dy = _MOVES[a]
            x, y = s[2 * i] + dx, s[2 * i + 1] + dy
            if 0 <= x < self.size and 0 <= y < self.size:
                s[2 * i], s[2 * i + 1] = x, y

    def _move_scopes(self, i: int) -> list[IndexSet]:
        x, y = self.pos_dims(i)
        return [IndexSet(), IndexSet([y]), IndexSet([y]), IndexSet([x]), IndexSet([x])]

    def _start_positions(self, rng: np.random.Generator) -> list[tuple[int, int]]:
        if self.random_start:
            cells = rng.choice(self.size * self.size, size=self.n_agents, replace=False)
            return [(int(c) % self.size, int(c) // self.size) for c in cells]
        return self.fixed_starts()

    def fixed_starts(self) -> list[tuple[int, int]]:
        xs = np.linspace(0, self.size - 1, self.n_agents).round().astype(int)
        return [(int(x), 0) for x in xs]

    def _visible(self, i: int, pos: tuple[int, int]) -> bool:
        if self.observation_radius is None:
            return True
        x, y = self.agent_pos(i)
        return max(abs(x - pos[0]), abs(y - pos[1])) <= self.observation_radius

    # -- episode API -------------------------------------------------------
    def reset(self, seed: int | None = None) -> tuple[np.ndarray, list[np.ndarray]]:
        rng = np.random.default_rng(seed)
        self._state = self._initial_state(rng)
        self._t = 0
        self._done = False
        return self._state.copy(), self.observe()

    def step(self, actions) -> StepResult:
        if self._done:
            raise UsageError("step() called on a finished episode; call reset() first")
        actions = check_joint_action(actions, self.action_counts)
        reward, success = self._transition(actions)
        self._t += 1
        self._done = success or self._t >= self.max_steps
        return StepResult(self._state.copy(), self.observe(), float(reward), self._done, success)

    @property
    def state(self) -> np.ndarray:
        return self._state.copy()

    def observe(self) -> list[np.ndarray]:
        return [self._observe(i) for i in range(self.n_agents)]

    @property
    def obs_dim(self) -> int:
        return len(self._observe_template())

    def _observe_template(self) -> np.ndarray:
        if self._state is None:
            self.reset(seed=0)
            self._done = True
        return self._observe(0)

    def _initial_state(self, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def _transition(self, actions: tuple[int, ...]) -> tuple[float, bool]:
        raise NotImplementedError

    def _observe(self, i: int) -> np.ndarray:
        raise NotImplementedError

    def oracle_actions(self) -> list[int]:
        """Scripted joint action that solves the task from the current state."""
        raise NotImplementedError

    def _step_toward(self, i: int, target: tuple[int, int]) -> int:
        x, y = self.agent_pos(i)
        if x < target[0]:
            return EAST
        if x > target[0]:
            return WEST
        if y < target[1]:
            return NORTH
        if y > target[1]:
            return SOUTH
        return NOOP
