"""AdamW with decoupled weight decay and a warmup-free cosine schedule."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from vctext.errors import RangeError, ShapeError
from vctext.numerics.tensor import Tensor


def cosine_lr(step: int, total_steps: int, lr_max: float, lr_min: float) -> float:
    """lr_min + 0.5 (lr_max - lr_min) (1 + cos(pi step / total_steps))."""
    if total_steps < 1:
        raise RangeError(f"total_steps must be positive, got {total_steps}")
    if not 0 <= step <= total_steps:
        raise RangeError(f"step {step} outside [0, {total_steps}]")
    return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + math.cos(math.pi * step / total_steps))


@dataclass
class OptimizerState:
    """Per-parameter Adam moments plus the schedule the step reads from."""

    first_moment: dict[str, np.ndarray]
    second_moment: dict[str, np.ndarray]
    lr_max: float
    lr_min: float
    total_steps: int
    step_count: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.01
    no_decay: frozenset = field(default_factory=frozenset)


def init_optimizer(params: dict[str, Tensor], lr_max: float, lr_min: float,
                   total_steps: int, *, beta1: float = 0.9, beta2: float = 0.999,
                   eps: float = 1e-8, weight_decay: float = 0.01,
                   no_decay: frozenset = frozenset()) -> OptimizerState:
    if not (lr_max >= lr_min > 0):
        raise RangeError("require lr_max >= lr_min > 0")
    zeros = {name: np.zeros_like(p.data) for name, p in params.items()}
    return OptimizerState(
        first_moment=zeros,
        second_moment={name: z.copy() for name, z in zeros.items()},
        lr_max=lr_max, lr_min=lr_min, total_steps=total_steps,
        beta1=beta1, beta2=beta2, eps=eps, weight_decay=weight_decay,
        no_decay=no_decay,
    )


def adam_step(params: dict[str, Tensor], grads: dict[str, np.ndarray],
              state: OptimizerState) -> tuple[dict[str, Tensor], OptimizerState]:
    """One AdamW update in place; learning rate comes from the cosine schedule.

    Weight decay is decoupled (applied directly to the parameter, not the
    gradient). Bias correction uses t = step_count + 1.
    """
    if state.step_count >= state.total_steps:
        raise RangeError(f"step_count {state.step_count} has reached total_steps")
    lr = cosine_lr(state.step_count, state.total_steps, state.lr_max, state.lr_min)
    t = state.step_count + 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            continue
        g = np.asarray(g, dtype=np.float64)
        if g.shape != p.data.shape:
            raise ShapeError(f"gradient shape {g.shape} != parameter shape "
                             f"{p.data.shape} for '{name}'")
        m = state.first_moment[name]
        v = state.second_moment[name]
        if m.shape != p.data.shape:
            raise ShapeError(f"moment shape {m.shape} != parameter shape for '{name}'")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        if state.weight_decay != 0.0 and name not in state.no_decay:
            p.data -= lr * state.weight_decay * p.data
        p.data -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    state.step_count += 1
    return params, state
