"""
Optimization utilities: global-norm gradient clipping and an Adam optimizer
over named float64 arrays.
"""

import logging
from typing import Dict, Mapping, Tuple

import numpy as np

logger = logging.getLogger(__name__)


def global_norm(grads: Mapping[str, np.ndarray]) -> float:
    """L2 norm of all gradients taken together."""
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))


def clip_by_global_norm(grads: Mapping[str, np.ndarray], max_norm: float) -> Tuple[Dict[str, np.ndarray], float]:
    """
    Rescale gradients so their global norm does not exceed ``max_norm``.

    Returns:
        Tuple of the (possibly rescaled) gradients and the norm before clipping
    """
    norm = global_norm(grads)
    if norm > max_norm and norm > 0:
        factor = max_norm / norm
        return {name: g * factor for name, g in grads.items()}, norm
    return {name: np.array(g, dtype=np.float64) for name, g in grads.items()}, norm


class Adam:
    """
    Adam with bias-corrected first and second moments.

    Parameters are updated in place in sorted name order, so updates are
    independent of dictionary insertion order.
    """

    def __init__(self,
                 params: Dict[str, np.ndarray],
                 learning_rate: float = 1e-3,
                 beta1: float = 0.9,
                 beta2: float = 0.999,
                 eps: float = 1e-8,
                 clip_norm: float = 5.0):
        self.params = params
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.clip_norm = clip_norm
        self.step_count = 0
        self.m = {name: np.zeros_like(value) for name, value in params.items()}
        self.v = {name: np.zeros_like(value) for name, value in params.items()}

    def step(self, grads: Mapping[str, np.ndarray]) -> float:
        """
        Apply one update.

        Args:
            grads: Gradient per parameter name; missing names count as zero

        Returns:
            float: Global gradient norm before clipping
        """
        full = {name: grads[name] if name in grads else np.zeros_like(value)
                for name, value in self.params.items()}
        clipped, norm = clip_by_global_norm(full, self.clip_norm)
        self.step_count += 1
        t = self.step_count
        correction1 = 1.0 - self.beta1 ** t
        correction2 = 1.0 - self.beta2 ** t
        for name in sorted(self.params):
            g = clipped[name]
            self.m[name] = self.beta1 * self.m[name] + (1.0 - self.beta1) * g
            self.v[name] = self.beta2 * self.v[name] + (1.0 - self.beta2) * g * g
            m_hat = self.m[name] / correction1
            v_hat = self.v[name] / correction2
            self.params[name] -= self.learning_rate * m_hat / (np.sqrt(v_hat) + self.eps)
        logger.debug(f"Adam step {t}: gradient norm {norm:.4f}")
        return norm
