"""Dense float64 math, a seedable random source and the Adam optimizer.

Everything on the training path is float64 so that finite-difference
gradient checks are clean.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ShapeError


def as_matrix(values) -> np.ndarray:
    """Coerce to a finite 2-D float64 array."""
    a = np.asarray(values, dtype=np.float64)
    if a.ndim != 2:
        raise ShapeError(f"expected a 2-D array, got ndim={a.ndim}")
    if not np.isfinite(a).all():
        raise DomainError("matrix contains non-finite entries")
    return a


def matmul(a, b) -> np.ndarray:
    """Matrix product with an explicit shape check."""
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


class RandomSource:
    """Seedable deterministic RNG (numpy PCG64 under the hood).

    The same seed yields the same draw sequence within one build of this
    package. Bit-equality across numpy versions is not promised.
    """

    def __init__(self, seed: int):
        if seed < 0:
            raise DomainError(f"seed must be non-negative, got {seed}")
        self.seed = int(seed)
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def gaussian(self, mean: float, std: float, n: int) -> np.ndarray:
        """n draws from N(mean, std^2); std == 0 returns the constant mean."""
        if std < 0:
            raise DomainError(f"std must be >= 0, got {std}")
        if n < 0:
            raise DomainError(f"n must be >= 0, got {n}")
        if std == 0:
            return np.full(n, float(mean))
        return self._gen.normal(mean, std, size=n)

    def uniform(self, low: float, high: float, size) -> np.ndarray:
        return self._gen.uniform(low, high, size=size)

    def integers(self, low: int, high: int, size=None):
        return self._gen.integers(low, high, size=size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)


def gaussian_sample(rng: RandomSource, mean: float, std: float, n: int) -> np.ndarray:
    return rng.gaussian(mean, std, n)


@dataclass
class AdamState:
    """Adam moment buffers for one flat parameter vector."""

    lr: float = 5e-6
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: np.ndarray = field(default=None)  # type: ignore[assignment]
    v: np.ndarray = field(default=None)  # type: ignore[assignment]

    @classmethod
    def init(cls, n_params: int, lr: float = 5e-6, beta1: float = 0.9,
             beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        return cls(lr=lr, beta1=beta1, beta2=beta2, eps=eps, step=0,
                   m=np.zeros(n_params), v=np.zeros(n_params))


def adam_step(state: AdamState, params: np.ndarray,
              grads: np.ndarray) -> tuple[np.ndarray, AdamState]:
    """One bias-corrected Adam update. Returns new params and new state."""
    params = np.asarray(params, dtype=np.float64)
    grads = np.asarray(grads, dtype=np.float64)
    if params.shape != grads.shape or params.shape != state.m.shape:
        raise ShapeError(
            f"params {params.shape}, grads {grads.shape} and moments "
            f"{state.m.shape} must all match")
    t = state.step + 1
    m = state.beta1 * state.m + (1 - state.beta1) * grads
    v = state.beta2 * state.v + (1 - state.beta2) * grads ** 2
    m_hat = m / (1 - state.beta1 ** t)
    v_hat = v / (1 - state.beta2 ** t)
    new_params = params - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    new_state = AdamState(lr=state.lr, beta1=state.beta1, beta2=state.beta2,
                          eps=state.eps, step=t, m=m, v=v)
    return new_params, new_state
