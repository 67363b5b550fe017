"""Adam optimizer over explicit parameter lists."""

from __future__ import annotations

import logging

import numpy as np

logger = logging.getLogger(__name__)


class Adam:
    """Standard Adam with bias correction; deterministic given the inputs.

    A step whose gradients contain non-finite values is skipped entirely
    (parameters and moments untouched) and flagged in the log.
    """

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p.value) for p in self.params]
        self.v = [np.zeros_like(p.value) for p in self.params]
        self.t = 0

    def step(self) -> bool:
        """Apply one update from the accumulated gradients.

        Returns False if the step was skipped due to non-finite gradients.
        """
        if not all(np.isfinite(p.grad).all() for p in self.params):
            logger.warning("non-finite gradient at step %d; update skipped", self.t + 1)
            self.t += 1
            return False
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, m, v in zip(self.params, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * p.grad
            v *= self.beta2
            v += (1.0 - self.beta2) * p.grad * p.grad
            p.value -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
        return True

    def zero_grad(self):
        for p in self.params:
            p.grad[...] = 0.0
