"""Per-agent stochastic policies with a value head."""

from __future__ import annotations

import hashlib

import numpy as np
import torch
from torch import nn


def _layer(n_in: int, n_out: int, gain: float) -> nn.Linear:
    layer = nn.Linear(n_in, n_out)
    nn.init.orthogonal_(layer.weight, gain)
    nn.init.zeros_(layer.bias)
    return layer


class MLPActorCritic(nn.Module):
    """Separate 64-64 tanh torsos for the policy logits and the value."""

    def __init__(self, in_dim: int, n_actions: int, hidden: int = 64):
        super().__init__()
        self.in_dim = in_dim
        self.n_actions = n_actions
        g = float(np.sqrt(2))
        self.pi = nn.Sequential(_layer(in_dim, hidden, g), nn.Tanh(),
                                _layer(hidden, hidden, g), nn.Tanh(),
                                _layer(hidden, n_actions, 0.01))
        self.v = nn.Sequential(_layer(in_dim, hidden, g), nn.Tanh(),
                               _layer(hidden, hidden, g), nn.Tanh(),
                               _layer(hidden, 1, 1.0))

    def forward(self, x: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        return self.pi(x), self.v(x).squeeze(-1)


class TabularActorCritic(nn.Module):
    """Softmax table over hashed inputs, for grids small enough to enumerate.

    Inputs are rounded to ``resolution`` and hashed into ``buckets`` rows.
    """

    def __init__(self, in_dim: int, n_actions: int, buckets: int = 8192, resolution: float = 1e-3):
        super().__init__()
        self.in_dim = in_dim
        self.n_actions = n_actions
        self.buckets = buckets
        self.resolution = resolution
        self.logits = nn.Parameter(torch.zeros(buckets, n_actions))
        self.values = nn.Parameter(torch.zeros(buckets))

    def rows(self, x: torch.Tensor) -> torch.Tensor:
        cells = np.round(x.detach().cpu().numpy().astype(np.float64) / self.resolution).astype("<i8")
        idx = [int.from_bytes(hashlib.blake2b(c.tobytes(), digest_size=8).digest(), "little") % self.buckets
               for c in cells.reshape(-1, self.in_dim)]
        return torch.as_tensor(idx, dtype=torch.long).reshape(x.shape[:-1])

    def forward(self, x: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        r = self.rows(x)
        return self.logits[r], self.values[r]


def make_policy(kind: str, in_dim: int, n_actions: int, hidden: int = 64) -> nn.Module:
    if kind == "mlp":
        return MLPActorCritic(in_dim, n_actions, hidden)
    if kind == "tabular":
        return TabularActorCritic(in_dim, n_actions)
    raise ValueError(f"unknown policy kind {kind!r}")


@torch.no_grad()
def action_probs(net: nn.Module, x: np.ndarray) -> np.ndarray:
    logits, _ = net(torch.as_tensor(np.asarray(x, dtype=np.float32)))
    return torch.softmax(logits, -1).numpy().astype(np.float64)


@torch.no_grad()
def act(net: nn.Module, x: np.ndarray, rng: np.random.Generator, greedy: bool = False):
    """Sample (or argmax) one action per input row.

    Returns actions, their log-probabilities and value estimates. Sampling
    draws from ``rng`` so a run's randomness lives in one numpy stream.
    """
    logits, v = net(torch.as_tensor(np.asarray(x, dtype=np.float32)))
    logp = torch.log_softmax(logits.double(), -1).numpy()
    if greedy:
        a = logp.argmax(-1)
    else:
        p = np.exp(logp)
        cdf = np.cumsum(p, -1)
        u = rng.random(len(p)) * cdf[:, -1]
        a = np.minimum((cdf < u[:, None]).sum(-1), p.shape[-1] - 1)
    return a, logp[np.arange(len(a)), a], v.numpy().astype(np.float64)
