"""Shared vocabulary: state vectors, 1-based index sets, projections, transitions."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np


class ISAError(Exception):
    """Base class for all errors raised by the package."""


class ConfigurationError(ISAError, ValueError):
    """Bad parameters: indices out of range, invalid hyperparameters, unknown names."""


class StructuralError(ISAError, ValueError):
    """Shape mismatches between vectors, unknown action ids."""


class EstimationError(ISAError, RuntimeError):
    """Not enough data to estimate a quantity."""


class UsageError(ISAError, RuntimeError):
    """API used out of order (e.g. stepping a finished episode)."""


class IndexSet:
    """Immutable, sorted set of 1-based state-dimension indices."""

    __slots__ = ("_idx",)

    def __init__(self, indices: Iterable[int] = ()):
        idx = sorted({int(k) for k in indices})
        if idx and idx[0] < 1:
            raise ConfigurationError(f"dimension indices are 1-based, got {idx[0]}")
        object.__setattr__(self, "_idx", tuple(idx))

    def __setattr__(self, name, value):
        raise AttributeError("IndexSet is immutable")

    @classmethod
    def full(cls, K: int) -> IndexSet:
        return cls(range(1, K + 1))

    @property
    def indices(self) -> tuple[int, ...]:
        return self._idx

    def zero_based(self) -> np.ndarray:
        return np.asarray(self._idx, dtype=np.intp) - 1

    def check(self, K: int) -> IndexSet:
        if self._idx and self._idx[-1] > K:
            raise ConfigurationError(f"index {self._idx[-1]} out of range 1..{K}")
        return self

    def __iter__(self) -> Iterator[int]:
        return iter(self._idx)

    def __len__(self) -> int:
        return len(self._idx)

    def __bool__(self) -> bool:
        return bool(self._idx)

    def __contains__(self, k) -> bool:
        return k in self._idx

    def __eq__(self, other) -> bool:
        if isinstance(other, IndexSet):
            return self._idx == other._idx
        if isinstance(other, (set, frozenset)):
            return set(self._idx) == other
        return NotImplemented

    def __hash__(self) -> int:
        return hash(self._idx)

    def __or__(self, other: IndexSet) -> IndexSet:
        return IndexSet(set(self._idx) | set(other))

    def __and__(self, other: IndexSet) -> IndexSet:
        return IndexSet(set(self._idx) & set(other))

    def __sub__(self, other: IndexSet) -> IndexSet:
        return IndexSet(set(self._idx) - set(other))

    def __le__(self, other: IndexSet) -> bool:
        return set(self._idx) <= set(other)

    def isdisjoint(self, other: IndexSet) -> bool:
        return set(self._idx).isdisjoint(other)

    def to_json(self) -> list[int]:
        return list(self._idx)

    def __repr__(self) -> str:
        return "IndexSet({" + ", ".join(map(str, self._idx)) + "})"


def as_state(values: Sequence[float] | np.ndarray) -> np.ndarray:
    """Validate and return a 1-D float64 state vector."""
    s = np.asarray(values, dtype=np.float64)
    if s.ndim != 1:
        raise StructuralError(f"state must be 1-D, got shape {s.shape}")
    if not np.all(np.isfinite(s)):
        raise StructuralError("state contains NaN or Inf")
    return s


def project(s: np.ndarray, D: IndexSet) -> np.ndarray:
    """Restrict ``s`` to the dimensions in ``D`` (ascending order)."""
    s = np.asarray(s, dtype=np.float64)
    D.check(s.shape[-1])
    return s[..., D.zero_based()]


def delta(s: np.ndarray, s_next: np.ndarray, k: int) -> float:
    """Change on dimension ``k`` (1-based) between two states."""
    s = np.asarray(s, dtype=np.float64)
    s_next = np.asarray(s_next, dtype=np.float64)
    if s.shape != s_next.shape:
        raise StructuralError(f"state shapes differ: {s.shape} vs {s_next.shape}")
    if not 1 <= k <= s.shape[0]:
        raise ConfigurationError(f"index {k} out of range 1..{s.shape[0]}")
    return float(s_next[k - 1] - s[k - 1])


def check_joint_action(actions: Sequence[int], action_counts: Sequence[int]) -> tuple[int, ...]:
    if len(actions) != len(action_counts):
        raise StructuralError(f"expected {len(action_counts)} actions, got {len(actions)}")
    out = []
    for i, (a, n) in enumerate(zip(actions, action_counts)):
        a = int(a)
        if not 0 <= a < n:
            raise StructuralError(f"agent {i}: action {a} outside 0..{n - 1}")
        out.append(a)
    return tuple(out)


@dataclass(frozen=True)
class Transition:
    s: np.ndarray
    a: tuple[int, ...]
    s_next: np.ndarray
    r: float
    done: bool
    obs: tuple[np.ndarray, ...] = field(default=(), repr=False)

    def __post_init__(self):
        if self.s.shape != self.s_next.shape:
            raise StructuralError("s and s_next must have equal length")
