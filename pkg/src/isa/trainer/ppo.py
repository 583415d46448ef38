"""Clipped-surrogate policy update with generalized advantage estimation."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from ..core import ISAError


class TrainingDiverged(ISAError, RuntimeError):
    """A loss became NaN or infinite; carries the offending batch statistics."""

    def __init__(self, msg: str, diagnostics: dict):
        super().__init__(msg)
        self.diagnostics = diagnostics


@dataclass
class PPOConfig:
    gamma: float = 0.99
    gae_lambda: float = 0.95
    clip: float = 0.2
    lr: float = 3e-4
    epochs: int = 4
    minibatches: int = 4
    ent_coef: float = 0.01
    vf_coef: float = 0.5
    max_grad_norm: float = 0.5
    normalize_advantages: bool = True
    anneal_lr: bool = True  # linear decay to zero over the step budget

    def __post_init__(self):
        if not 0 <= self.gamma < 1:
            raise ValueError("gamma must be in [0, 1)")
        if not 0 <= self.gae_lambda <= 1:
            raise ValueError("gae_lambda must be in [0, 1]")
        if not math.isfinite(self.lr) or not math.isfinite(self.clip):
            raise ValueError("lr and clip must be finite")
        if self.clip < 0 or self.lr <= 0 or self.epochs < 1 or self.minibatches < 1:
            raise ValueError("clip >= 0, lr > 0, epochs >= 1 and minibatches >= 1 required")


def gae(rewards: np.ndarray, values: np.ndarray, dones: np.ndarray, last_value: float,
        gamma: float, lam: float) -> tuple[np.ndarray, np.ndarray]:
    """Advantages and returns for one trajectory (dones[t] ends the episode after step t)."""
    T = len(rewards)
    adv = np.zeros(T)
    running = 0.0
    for t in reversed(range(T)):
        nonterminal = 1.0 - float(dones[t])
        next_v = last_value if t == T - 1 else values[t + 1]
        td = rewards[t] + gamma * next_v * nonterminal - values[t]
        running = td + gamma * lam * nonterminal * running
        adv[t] = running
    return adv, adv + values


@dataclass
class Batch:
    inputs: np.ndarray  # [n, in_dim]
    actions: np.ndarray  # [n]
    logp: np.ndarray  # behaviour log-probabilities
    advantages: np.ndarray
    returns: np.ndarray

    def __len__(self) -> int:
        return len(self.actions)


def clipped_surrogate(ratio: torch.Tensor, adv: torch.Tensor, clip: float) -> torch.Tensor:
    """min(r A, clip(r) A), written so that clip=0 gives a zero gradient everywhere."""
    hi = torch.where(ratio < 1 + clip, ratio, torch.full_like(ratio, 1 + clip))
    lo = torch.where(ratio > 1 - clip, ratio, torch.full_like(ratio, 1 - clip))
    return torch.where(adv >= 0, hi, lo) * adv


def update_policy(net: nn.Module, opt: torch.optim.Optimizer, batch: Batch, cfg: PPOConfig,
                  rng: np.random.Generator) -> dict:
    if len(batch) == 0:
        raise ValueError("empty batch")
    x = torch.as_tensor(batch.inputs, dtype=torch.float32)
    a = torch.as_tensor(batch.actions, dtype=torch.long)
    old_logp = torch.as_tensor(batch.logp, dtype=torch.float32)
    ret = torch.as_tensor(batch.returns, dtype=torch.float32)
    adv_np = batch.advantages.astype(np.float64)
    if cfg.normalize_advantages and len(adv_np) > 1:
        adv_np = (adv_np - adv_np.mean()) / (adv_np.std() + 1e-8)
    adv = torch.as_tensor(adv_np, dtype=torch.float32)

    n = len(batch)
    mb = max(1, math.ceil(n / cfg.minibatches))
    stats = {"policy_loss": 0.0, "value_loss": 0.0, "entropy": 0.0, "approx_kl": 0.0}
    updates = 0
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, mb):
            idx = torch.as_tensor(order[start:start + mb])
            logits, v = net(x[idx])
            logp_all = torch.log_softmax(logits, -1)
            logp = logp_all.gather(1, a[idx, None]).squeeze(1)
            ratio = torch.exp(logp - old_logp[idx])
            pg_loss = -clipped_surrogate(ratio, adv[idx], cfg.clip).mean()
            v_loss = 0.5 * ((v - ret[idx]) ** 2).mean()
            entropy = -(logp_all.exp() * logp_all).sum(-1).mean()
            loss = pg_loss + cfg.vf_coef * v_loss - cfg.ent_coef * entropy
            if not torch.isfinite(loss):
                raise TrainingDiverged("non-finite loss", {
                    "policy_loss": pg_loss.item(), "value_loss": v_loss.item(), "entropy": entropy.item(),
                    "adv_mean": float(adv_np.mean()), "adv_std": float(adv_np.std()),
                    "return_range": [float(batch.returns.min()), float(batch.returns.max())],
                })
            opt.zero_grad()
            loss.backward()
            if cfg.max_grad_norm:
                nn.utils.clip_grad_norm_(net.parameters(), cfg.max_grad_norm)
            opt.step()
            with torch.no_grad():
                stats["policy_loss"] += float(pg_loss)
                stats["value_loss"] += float(v_loss)
                stats["entropy"] += float(entropy)
                stats["approx_kl"] += float((old_logp[idx] - logp).mean())
            updates += 1
    return {k: v / updates for k, v in stats.items()}
