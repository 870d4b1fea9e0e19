"""Adam with decoupled weight decay, learning-rate schedules, grad clipping."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import Tensor


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.98
    epsilon: float = 1e-6
    weight_decay: float = 0.0


def adam_state_for(param: Tensor, beta1=0.9, beta2=0.98, epsilon=1e-6, weight_decay=0.0) -> AdamState:
    return AdamState(
        m=np.zeros_like(param.data),
        v=np.zeros_like(param.data),
        beta1=beta1,
        beta2=beta2,
        epsilon=epsilon,
        weight_decay=weight_decay,
    )


def adam_step(param: Tensor, grad, state: AdamState, lr: float) -> None:
    """One bias-corrected Adam update, in place.

    Weight decay is decoupled: ``param -= lr * wd * param`` happens before
    the Adam delta and does not enter the moment buffers.
    """
    g = grad.data if isinstance(grad, Tensor) else np.asarray(grad, dtype=np.float64)
    if g.shape != param.data.shape:
        raise ValueError(f"adam_step shape mismatch: param {param.data.shape} vs grad {g.shape}")
    if lr < 0:
        raise ValueError("adam_step needs lr >= 0")
    state.step += 1
    t = state.step
    if state.weight_decay != 0.0:
        param.data -= lr * state.weight_decay * param.data
    state.m *= state.beta1
    state.m += (1.0 - state.beta1) * g
    state.v *= state.beta2
    state.v += (1.0 - state.beta2) * (g * g)
    m_hat = state.m / (1.0 - state.beta1**t)
    v_hat = state.v / (1.0 - state.beta2**t)
    param.data -= lr * m_hat / (np.sqrt(v_hat) + state.epsilon)


@dataclass
class LrSchedule:
    """``inverse_sqrt`` or ``poly_decay`` with linear warmup.

    inverse_sqrt: peak * step / warmup while step <= warmup, then
    peak * sqrt(warmup / step). poly_decay: linear warmup to peak, then
    decay to ``end_lr`` at ``total_steps`` with exponent ``power``.
    """

    kind: str
    peak_lr: float
    warmup_steps: int
    total_steps: int = 0
    end_lr: float = 0.0
    power: float = 1.0

    def __post_init__(self):
        if self.kind not in ("inverse_sqrt", "poly_decay"):
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if self.warmup_steps < 1:
            raise ValueError("warmup_steps must be >= 1")
        if self.kind == "poly_decay" and self.total_steps <= self.warmup_steps:
            raise ValueError("poly_decay needs total_steps > warmup_steps")


def lr_at(schedule: LrSchedule, step: int) -> float:
    if step <= 0:
        raise ValueError("lr_at needs step >= 1")
    s = schedule
    if step <= s.warmup_steps:
        return s.peak_lr * step / s.warmup_steps
    if s.kind == "inverse_sqrt":
        return s.peak_lr * (s.warmup_steps / step) ** 0.5
    if step >= s.total_steps:
        return s.end_lr
    frac = (step - s.warmup_steps) / (s.total_steps - s.warmup_steps)
    return s.end_lr + (s.peak_lr - s.end_lr) * (1.0 - frac) ** s.power


def clip_global_norm(grads: dict[str, np.ndarray], max_norm: float) -> float:
    """Scale all gradients in place so the global L2 norm is <= max_norm."""
    total = 0.0
    for g in grads.values():
        total += float((g * g).sum())
    norm = total**0.5
    if max_norm > 0 and norm > max_norm:
        scale = max_norm / norm
        for g in grads.values():
            g *= scale
    return norm


@dataclass
class Adam:
    """Per-parameter Adam states over a named parameter dict."""

    params: dict[str, Tensor]
    beta1: float = 0.9
    beta2: float = 0.98
    epsilon: float = 1e-6
    weight_decay: float = 0.0
    states: dict[str, AdamState] = field(default_factory=dict)

    def __post_init__(self):
        for name, p in self.params.items():
            self.states[name] = adam_state_for(
                p, self.beta1, self.beta2, self.epsilon, self.weight_decay
            )

    def step(self, grads: dict[str, np.ndarray], lr: float, names=None) -> None:
        """Apply updates for ``names`` (default: every name in grads)."""
        for name in names if names is not None else grads.keys():
            adam_step(self.params[name], grads[name], self.states[name], lr)
