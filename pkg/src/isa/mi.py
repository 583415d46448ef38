"""Plug-in mutual information between binned state changes and binarized actions.

The estimator conditions on the other agents' actions by fixing them for
a whole probe group (one *context*), computing the MI inside each group and
averaging across groups.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import ConfigurationError, EstimationError

DEFAULT_BINS = 16
DEFAULT_MIN_SAMPLES = 100


@dataclass(frozen=True)
class BinningSpec:
    """Equal-width binning. ``low``/``high`` of None means learn them from the data."""

    bin_count: int = DEFAULT_BINS
    low: float | None = None
    high: float | None = None

    def __post_init__(self):
        if self.bin_count < 1:
            raise ConfigurationError("bin_count must be >= 1")
        if self.low is not None and self.high is not None and self.low > self.high:
            raise ConfigurationError("binning range has min > max")


def bin_values(xs: Sequence[float] | np.ndarray, spec: BinningSpec = BinningSpec()) -> np.ndarray:
    xs = np.asarray(xs, dtype=np.float64)
    if xs.size == 0:
        raise EstimationError("cannot bin an empty sample")
    lo = float(xs.min()) if spec.low is None else spec.low
    hi = float(xs.max()) if spec.high is None else spec.high
    if hi <= lo:
        return np.zeros(xs.shape, dtype=np.intp)
    width = (hi - lo) / spec.bin_count
    ids = np.floor((xs - lo) / width).astype(np.intp)
    # the maximum lands exactly on the upper edge; fold it into the top bin
    return np.clip(ids, 0, spec.bin_count - 1)


@dataclass(frozen=True)
class JointHistogram:
    """Counts over (binned change, action indicator)."""

    counts: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.counts)
        if c.ndim != 2 or np.any(c < 0):
            raise ConfigurationError("histogram counts must be a non-negative matrix")

    @property
    def total(self) -> int:
        return int(np.sum(self.counts))

    @classmethod
    def from_samples(cls, bins: np.ndarray, indicator: np.ndarray, bin_count: int) -> JointHistogram:
        flat = np.bincount(bins * 2 + indicator.astype(np.intp), minlength=2 * bin_count)
        return cls(flat.reshape(bin_count, 2))


def mutual_information(h: JointHistogram | np.ndarray) -> float:
    """MI in bits of the empirical joint distribution, clamped at zero."""
    counts = np.asarray(h.counts if isinstance(h, JointHistogram) else h, dtype=np.float64)
    total = counts.sum()
    if total <= 0:
        raise EstimationError("histogram is empty")
    p = counts / total
    px = p.sum(axis=1, keepdims=True)
    py = p.sum(axis=0, keepdims=True)
    nz = p > 0
    outer = (px * py)[nz]
    mi = float(np.sum(p[nz] * np.log2(p[nz] / outer)))
    return max(mi, 0.0)


@dataclass
class ProbeGroup:
    """Records from one context (fixed other-agent actions) at one lag."""

    context: tuple[int, ...]
    lag: int
    actions: np.ndarray  # (n,) actions of the probed agent
    deltas: np.ndarray  # (n, K) state change s_{t+lag} - s_t

    def __len__(self) -> int:
        return len(self.actions)


@dataclass
class ProbeData:
    agent: int
    n_actions: int
    K: int
    groups: list[ProbeGroup]

    @property
    def lags(self) -> list[int]:
        return sorted({g.lag for g in self.groups})

    def by_lag(self, lag: int) -> list[ProbeGroup]:
        return [g for g in self.groups if g.lag == lag]

    @property
    def n_transitions(self) -> int:
        return sum(len(g) for g in self.by_lag(1))

    def pooled(self) -> ProbeData:
        """Same records with the context dropped: one group per lag."""
        merged = []
        for lag in self.lags:
            gs = self.by_lag(lag)
            merged.append(
                ProbeGroup(
                    context=(),
                    lag=lag,
                    actions=np.concatenate([g.actions for g in gs]),
                    deltas=np.concatenate([g.deltas for g in gs]),
                )
            )
        return ProbeData(self.agent, self.n_actions, self.K, merged)


def _group_mi(group: ProbeGroup, actions: Sequence[int], dims: Sequence[int], bin_count: int) -> np.ndarray:
    out = np.zeros((len(actions), len(dims)))
    for col, k in enumerate(dims):
        bins = bin_values(group.deltas[:, k - 1], BinningSpec(bin_count))
        for row, a in enumerate(actions):
            ind = group.actions == a
            out[row, col] = mutual_information(JointHistogram.from_samples(bins, ind, bin_count))
    return out


def conditional_mi(
    groups: Sequence[ProbeGroup],
    action: int,
    dim: int,
    spec: BinningSpec = BinningSpec(),
    min_samples: int = DEFAULT_MIN_SAMPLES,
    agent: int | None = None,
) -> float:
    """Average over context groups of I(change on ``dim``; [agent action == ``action``]).

    ``dim`` is 1-based. Groups smaller than ``min_samples`` are skipped.
    """
    vals = []
    for g in groups:
        if len(g) < min_samples:
            continue
        bins = bin_values(g.deltas[:, dim - 1], BinningSpec(spec.bin_count, spec.low, spec.high))
        vals.append(mutual_information(JointHistogram.from_samples(bins, g.actions == action, spec.bin_count)))
    if not vals:
        raise EstimationError(
            f"no context group with >= {min_samples} samples (agent={agent}, action={action}, dim={dim})"
        )
    return float(np.mean(vals))


@dataclass
class MIMatrix:
    """MI values in bits, rows = actions of one agent, columns = state dims."""

    agent: int
    values: np.ndarray
    action_labels: list[str] | None = None

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        A, K = self.values.shape
        labels = self.action_labels or [str(a) for a in range(A)]
        w.writerow(["action"] + [str(k) for k in range(1, K + 1)])
        for a in range(A):
            w.writerow([labels[a]] + [f"{v:.6f}" for v in self.values[a]])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, agent: int = 0) -> MIMatrix:
        rows = list(csv.reader(io.StringIO(text)))
        labels = [r[0] for r in rows[1:]]
        vals = np.array([[float(x) for x in r[1:]] for r in rows[1:]])
        return cls(agent, vals, labels)


def estimate_mi_matrix(
    probe: ProbeData,
    bin_count: int = DEFAULT_BINS,
    min_samples: int = DEFAULT_MIN_SAMPLES,
    action_labels: list[str] | None = None,
) -> MIMatrix:
    """Full |A_i| x K matrix; with several lags, the per-cell maximum over lags."""
    actions = list(range(probe.n_actions))
    dims = list(range(1, probe.K + 1))
    best = None
    for lag in probe.lags:
        groups = [g for g in probe.by_lag(lag) if len(g) >= min_samples]
        if not groups:
            continue
        mean = np.mean([_group_mi(g, actions, dims, bin_count) for g in groups], axis=0)
        best = mean if best is None else np.maximum(best, mean)
    if best is None:
        raise EstimationError(
            f"agent {probe.agent}: no context group with >= {min_samples} samples "
            f"for any action/dimension"
        )
    return MIMatrix(probe.agent, best, action_labels)


def collect_probe_transitions(
    env,
    agent: int,
    context_count: int = 8,
    per_context: int = 250,
    horizon: int = 1,
    rng: np.random.Generator | None = None,
) -> ProbeData:
    """Gather (action, lagged state change) records for one agent.

    For each sampled context the other agents repeat a fixed action while
    ``agent`` acts uniformly at random; episodes are reset until
    ``per_context`` steps are recorded. Record at step t and lag l exists only
    if step t + l is inside the same episode.
    """
    if context_count < 1 or per_context < 1 or horizon < 1:
        raise ConfigurationError("context_count, per_context and horizon must be >= 1")
    rng = np.random.default_rng() if rng is None else rng
    counts = list(env.action_counts)
    others = [j for j in range(env.n_agents) if j != agent]
    groups: list[ProbeGroup] = []
    for _ in range(context_count):
        ctx = tuple(int(rng.integers(counts[j])) for j in others)
        acts: dict[int, list[int]] = {lag: [] for lag in range(1, horizon + 1)}
        dels: dict[int, list[np.ndarray]] = {lag: [] for lag in range(1, horizon + 1)}
        recorded = 0
        while recorded < per_context:
            s, _ = env.reset(seed=int(rng.integers(2**31)))
            states = [s]
            mine = []
            done = False
            while not done and recorded + len(mine) < per_context:
                a_i = int(rng.integers(counts[agent]))
                joint = list(ctx)
                joint.insert(agent, a_i)
                res = env.step(joint)
                mine.append(a_i)
                states.append(res.state)
                done = res.done
            for t, a_i in enumerate(mine):
                for lag in range(1, horizon + 1):
                    if t + lag < len(states):
                        acts[lag].append(a_i)
                        dels[lag].append(states[t + lag] - states[t])
            recorded += len(mine)
        for lag in range(1, horizon + 1):
            groups.append(
                ProbeGroup(
                    context=ctx,
                    lag=lag,
                    actions=np.asarray(acts[lag], dtype=np.intp),
                    deltas=np.asarray(dels[lag], dtype=np.float64).reshape(-1, env.K),
                )
            )
    return ProbeData(agent=agent, n_actions=counts[agent], K=env.K, groups=groups)

