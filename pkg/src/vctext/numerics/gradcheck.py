"""Finite-difference gradient verification.

`grad_check` is the per-coordinate reference oracle from the op contract.
`check_param_gradients` applies the same central-difference formula to a
whole parameter dictionary, probing every coordinate of one tensor in a
single batched forward (the model broadcasts over leading axes), which is
what makes exhaustive checks over many configurations affordable.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from vctext.numerics.tensor import Tensor, no_grad


def grad_check(f: Callable[[Tensor], Tensor], x: Tensor, h: float = 1e-5) -> float:
    """max_i |analytic_i - central_i| / max(1, |central_i|) over coordinates of x."""
    probe = Tensor(x.data.copy(), requires_grad=True)
    out = f(probe)
    out.backward()
    analytic = probe.grad if probe.grad is not None else np.zeros_like(probe.data)

    flat = x.data.reshape(-1).copy()
    central = np.empty_like(flat)
    with no_grad():
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            hi = f(Tensor(flat.reshape(x.data.shape))).item()
            flat[i] = orig - h
            lo = f(Tensor(flat.reshape(x.data.shape))).item()
            flat[i] = orig
            central[i] = (hi - lo) / (2.0 * h)
    err = np.abs(analytic.reshape(-1) - central)
    return float((err / np.maximum(1.0, np.abs(central))).max())


# Singleton padding that keeps the probe axis strictly left of every
# activation axis under numpy's right-aligned broadcasting.
_PROBE_PAD = 6


def _fd_param(loss_fn: Callable[[dict[str, Tensor]], Tensor],
              params: dict[str, Tensor], name: str, h: float) -> np.ndarray:
    """Central differences for every coordinate of params[name], batched."""
    base = params[name].data
    p = base.size
    eye = np.eye(p) * h
    flat = base.reshape(1, -1)
    stack = np.concatenate([flat + eye, flat - eye], axis=0)
    batched = dict(params)
    batched[name] = Tensor(stack.reshape((2 * p,) + (1,) * _PROBE_PAD + base.shape))
    with no_grad():
        out = loss_fn(batched).data
    if out.size == 1:
        return np.zeros_like(base)  # parameter has no path to the loss
    losses = out.reshape(-1)
    if losses.size != 2 * p:
        raise ValueError("loss_fn did not preserve the probe batch axis")
    return ((losses[:p] - losses[p:]) / (2.0 * h)).reshape(base.shape)


def check_param_gradients(loss_fn: Callable[[dict[str, Tensor]], Tensor],
                          params: dict[str, Tensor], h: float = 1e-5,
                          names: list[str] | None = None) -> float:
    """Max relative error between backprop and central differences.

    Checks every coordinate of every listed parameter tensor against the
    same oracle as grad_check; relative error uses max(1, |central|).
    """
    live = {k: Tensor(v.data.copy(), requires_grad=True) for k, v in params.items()}
    loss = loss_fn(live)
    loss.backward()

    worst = 0.0
    for name in (names if names is not None else list(params)):
        analytic = live[name].grad
        if analytic is None:
            analytic = np.zeros_like(live[name].data)
        central = _fd_param(loss_fn, params, name, h)
        err = np.abs(analytic - central) / np.maximum(1.0, np.abs(central))
        worst = max(worst, float(err.max()))
    return worst
