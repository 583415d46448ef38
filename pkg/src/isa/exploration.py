"""Scoped count-based exploration bonuses.

Visits are counted on hashed, quantized projections of the next state: one
table over the common segment shared by the team, one table per agent over
its special segment.
"""

from __future__ import annotations

import hashlib
import math
from typing import Sequence

import numpy as np

from .core import IndexSet, project

EMPTY_HASH = 0x9E3779B97F4A7C15  # sentinel for the empty projection


def hash_projection(v: Sequence[float] | np.ndarray, widths: Sequence[float] | np.ndarray | float = 1.0) -> int:
    """64-bit BLAKE2b digest of the quantized vector ``floor(v / width)``."""
    v = np.asarray(v, dtype=np.float64)
    if v.size == 0:
        return EMPTY_HASH
    cells = np.floor(v / np.asarray(widths, dtype=np.float64) + 1e-9).astype("<i8")
    return int.from_bytes(hashlib.blake2b(cells.tobytes(), digest_size=8).digest(), "little")


class CountTable:
    """Visit counter keyed by the hash of a projected state."""

    def __init__(self, dims: IndexSet, widths: Sequence[float] | np.ndarray):
        self.dims = dims
        self.widths = np.asarray(widths, dtype=np.float64)
        self._sub_widths = self.widths[dims.zero_based()]
        self.counts: dict[int, int] = {}

    def key(self, state: np.ndarray) -> int:
        return hash_projection(project(state, self.dims), self._sub_widths)

    def visit(self, state: np.ndarray) -> float:
        """Count one visit and return the bonus 1/sqrt(post-increment count)."""
        k = self.key(state)
        n = self.counts.get(k, 0) + 1
        self.counts[k] = n
        return 1.0 / math.sqrt(n)

    def count(self, state: np.ndarray) -> int:
        return self.counts.get(self.key(state), 0)

    def __len__(self) -> int:
        return len(self.counts)

    def to_json(self) -> dict:
        return {"dims": self.dims.to_json(), "widths": self.widths.tolist(),
                "counts": {str(k): v for k, v in self.counts.items()}}

    @classmethod
    def from_json(cls, data: dict) -> CountTable:
        t = cls(IndexSet(data["dims"]), data["widths"])
        t.counts = {int(k): int(v) for k, v in data["counts"].items()}
        return t


def common_bonus(table: CountTable, s_next: np.ndarray) -> float:
    return table.visit(s_next)


def special_bonus(table_i: CountTable, s_next: np.ndarray) -> float:
    return table_i.visit(s_next)


def exploration_reward(common: float, special: float, gated: bool, beta1: float) -> float:
    """Common bonus only when the action can touch the common segment."""
    return common + beta1 * special if gated else beta1 * special


class ScopedCounter:
    """The team's common table plus one special table per agent."""

    def __init__(self, common: IndexSet, special: Sequence[IndexSet], widths: np.ndarray):
        self.common = CountTable(common, widths)
        self.special = [CountTable(d, widths) for d in special]

    def step(self, s_next: np.ndarray) -> tuple[float, list[float]]:
        """One environment step: a single common increment and one per agent."""
        rc = self.common.visit(s_next)
        return rc, [t.visit(s_next) for t in self.special]

    def to_json(self) -> dict:
        return {"common": self.common.to_json(), "special": [t.to_json() for t in self.special]}

    @classmethod
    def from_json(cls, data: dict) -> ScopedCounter:
        obj = cls.__new__(cls)
        obj.common = CountTable.from_json(data["common"])
        obj.special = [CountTable.from_json(t) for t in data["special"]]
        return obj

    def dump_csv(self) -> str:
        lines = ["table,hash,count"]
        for name, t in [("common", self.common)] + [(f"special_{i}", t) for i, t in enumerate(self.special)]:
            for k, n in sorted(t.counts.items()):
                lines.append(f"{name},{k:016x},{n}")
        return "\n".join(lines) + "\n"
