"""Adam optimizer and a finite-difference gradient checker."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import Tape, Tensor


class Adam:
    """Adam with bias-corrected moments, applied in place to the params.

    Moment accumulators match their parameter shapes and the step counter
    starts at zero.
    """

    def __init__(self, params: Sequence[Tensor], lr: float = 0.01,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self, grads: Sequence[np.ndarray]) -> None:
        if len(grads) != len(self.params):
            raise ValueError("one gradient per parameter required")
        self.step_count += 1
        t = self.step_count
        for i, (p, g) in enumerate(zip(self.params, grads)):
            if g.shape != p.data.shape:
                raise ValueError(
                    f"gradient shape {g.shape} does not match parameter {p.data.shape}"
                )
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * (g * g)
            m_hat = self.m[i] / (1.0 - self.beta1**t)
            v_hat = self.v[i] / (1.0 - self.beta2**t)
            p.data -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def grad_check(loss_fn: Callable[[], Tensor], params: Sequence[Tensor],
               eps: float = 1e-5) -> float:
    """Worst relative error between analytic and central-difference gradients.

    ``loss_fn`` rebuilds the scalar loss from the current parameter values
    and must be deterministic (fix any noise before calling). The relative
    error uses an ``|analytic| + |numeric| + 1e-8`` denominator guard.
    """
    if not 1e-6 <= eps <= 1e-4:
        raise ValueError("eps should be within [1e-6, 1e-4]")
    if abs(float(loss_fn().item()) - float(loss_fn().item())) != 0.0:
        raise ValueError("loss_fn is not deterministic under repeated calls")

    with Tape() as tape:
        loss = loss_fn()
    analytic = tape.gradients(loss, params)

    worst = 0.0
    for p, ana in zip(params, analytic):
        flat = p.data.reshape(-1)
        ana_flat = ana.reshape(-1)
        for i in range(flat.size):
            saved = flat[i]
            flat[i] = saved + eps
            up = loss_fn().item()
            flat[i] = saved - eps
            down = loss_fn().item()
            flat[i] = saved
            numeric = (up - down) / (2.0 * eps)
            rel = abs(ana_flat[i] - numeric) / (abs(ana_flat[i]) + abs(numeric) + 1e-8)
            worst = max(worst, rel)
    return worst
