"""Adam optimizer, plain and lazy.

The lazy variant leaves parameter rows whose gradient rows are entirely
zero untouched: values, both moments and the per-row step counters used
for bias correction all stay bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import Tensor


@dataclass(frozen=True)
class AdamConfig:
    beta1: float = 0.9
    beta2: float = 0.98
    eps: float = 1e-8
    lazy: bool = False

    def __post_init__(self):
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValueError("betas must lie in [0, 1)")


class AdamState:
    """Per-parameter first/second moments and step counters.

    In lazy mode the counter is a per-row array; in plain mode a scalar.
    """

    def __init__(self):
        self.moments: dict[str, tuple[np.ndarray, np.ndarray]] = {}
        self.steps: dict[str, np.ndarray | int] = {}

    def ensure(self, name: str, value: np.ndarray, lazy: bool) -> None:
        if name in self.moments:
            return
        self.moments[name] = (
            np.zeros_like(value, dtype=np.float64),
            np.zeros_like(value, dtype=np.float64),
        )
        self.steps[name] = np.zeros(value.shape[0], dtype=np.int64) if lazy and value.ndim > 0 else 0


def adam_step(
    params: dict[str, Tensor],
    grads: dict[str, np.ndarray],
    state: AdamState,
    config: AdamConfig,
    lr: float,
) -> None:
    """Apply one bias-corrected Adam update in place.

    Raises on non-finite gradients, naming the offending parameter.
    """
    for name in sorted(params):
        grad = grads.get(name)
        if grad is None:
            continue
        grad = np.asarray(grad, dtype=np.float64)
        if not np.isfinite(grad).all():
            raise FloatingPointError(f"non-finite gradient for parameter {name!r}")
        param = params[name]
        state.ensure(name, param.data, config.lazy)
        m, v = state.moments[name]

        if config.lazy and param.data.ndim > 0:
            rows = np.nonzero(grad.reshape(grad.shape[0], -1).any(axis=1))[0]
            if rows.size == 0:
                continue
            t_rows = state.steps[name]
            t_rows[rows] += 1
            g = grad[rows]
            m[rows] = config.beta1 * m[rows] + (1 - config.beta1) * g
            v[rows] = config.beta2 * v[rows] + (1 - config.beta2) * g**2
            t = t_rows[rows].reshape((-1,) + (1,) * (grad.ndim - 1))
            m_hat = m[rows] / (1 - config.beta1**t)
            v_hat = v[rows] / (1 - config.beta2**t)
            update = (lr * m_hat / (np.sqrt(v_hat) + config.eps)).astype(param.data.dtype)
            param.data[rows] -= update
        else:
            t = state.steps[name] + 1
            state.steps[name] = t
            m *= config.beta1
            m += (1 - config.beta1) * grad
            v *= config.beta2
            v += (1 - config.beta2) * grad**2
            m_hat = m / (1 - config.beta1**t)
            v_hat = v / (1 - config.beta2**t)
            update = (lr * m_hat / (np.sqrt(v_hat) + config.eps)).astype(param.data.dtype)
            param.data -= update


def collect_grads(params: dict[str, Tensor]) -> dict[str, np.ndarray]:
    """Gradients accumulated on ``params`` (zeros where none were set)."""
    return {
        name: (p.grad if p.grad is not None else np.zeros_like(p.data))
        for name, p in params.items()
    }


def zero_grads(params: dict[str, Tensor]) -> None:
    for p in params.values():
        p.zero_grad()
