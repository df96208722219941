"""Ranger: rectified Adam inner steps with Lookahead slow weights."""

from __future__ import annotations

from dataclasses import dataclass, field

import torch


@dataclass
class OptimizerConfig:
    lookahead_k: int = 6
    lookahead_alpha: float = 0.5
    epsilon: float = 1e-5
    betas: tuple[float, float] = (0.95, 0.999)
    peak_lr: float = 1e-3
    warmup_steps: int = 4000
    # lr halves every 20k steps after warmup
    decay_rate: float = field(default=0.5 ** (1.0 / 20000.0))

    def __post_init__(self):
        if not 0.0 < self.lookahead_alpha <= 1.0:
            raise ValueError("lookahead_alpha must lie in (0, 1]")
        if self.warmup_steps < 1:
            raise ValueError("warmup_steps must be >= 1")
        if self.lookahead_k < 1:
            raise ValueError("lookahead_k must be >= 1")


def lr_at(step: int, cfg: OptimizerConfig) -> float:
    """Linear warmup to peak_lr, then exponential decay per step."""
    if step < 1:
        raise ValueError("steps are counted from 1")
    if step <= cfg.warmup_steps:
        return cfg.peak_lr * step / cfg.warmup_steps
    return cfg.peak_lr * cfg.decay_rate ** (step - cfg.warmup_steps)


class Ranger:
    """Lookahead wrapper around torch's rectified Adam.

    Every lookahead_k inner steps: slow += alpha * (fast - slow), then the
    fast weights restart from the updated slow weights.
    """

    def __init__(self, params, cfg: OptimizerConfig):
        self.cfg = cfg
        self.params = [p for p in params if p.requires_grad]
        if not self.params:
            raise ValueError("no trainable parameters")
        self.inner = torch.optim.RAdam(
            self.params, lr=cfg.peak_lr, betas=cfg.betas, eps=cfg.epsilon
        )
        self.slow = [p.detach().clone() for p in self.params]
        self.inner_steps = 0

    def zero_grad(self):
        self.inner.zero_grad()

    def set_lr(self, lr: float):
        for group in self.inner.param_groups:
            group["lr"] = lr

    def step(self):
        for p in self.params:
            if p.grad is not None and not torch.isfinite(p.grad).all():
                raise ValueError("non-finite gradient encountered")
        self.inner.step()
        self.inner_steps += 1
        if self.inner_steps % self.cfg.lookahead_k == 0:
            with torch.no_grad():
                for slow, fast in zip(self.slow, self.params):
                    slow += self.cfg.lookahead_alpha * (fast - slow)
                    fast.copy_(slow)

    def state_dict(self) -> dict:
        return {
            "inner": self.inner.state_dict(),
            "slow": [s.clone() for s in self.slow],
            "inner_steps": self.inner_steps,
        }

    def load_state_dict(self, state: dict):
        self.inner.load_state_dict(state["inner"])
        self.slow = [s.clone() for s in state["slow"]]
        self.inner_steps = state["inner_steps"]
