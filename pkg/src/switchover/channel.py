"""Gilbert-Elliot ON/OFF connectivity model."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ChannelParams:
    """Per-slot transition probabilities of a two-state Markov channel.

    p01 is the OFF->ON probability and p10 the ON->OFF probability.
    """

    p01: float
    p10: float

    def __post_init__(self) -> None:
        for name in ("p01", "p10"):
            v = float(getattr(self, name))
            object.__setattr__(self, name, v)
            if not (0.0 < v <= 1.0):
                raise ValueError(f"{name} must lie in (0, 1], got {v}")

    @classmethod
    def symmetric(cls, eps: float) -> "ChannelParams":
        if not (0.0 < eps <= 0.5):
            raise ValueError(f"epsilon must lie in (0, 0.5], got {eps}")
        return cls(eps, eps)

    @property
    def memory(self) -> float:
        """Second eigenvalue 1 - p01 - p10 of the transition matrix."""
        return 1.0 - self.p01 - self.p10

    @property
    def positively_correlated(self) -> bool:
        return self.p01 + self.p10 < 1.0

    @property
    def is_iid(self) -> bool:
        return abs(self.p01 + self.p10 - 1.0) <= 1e-15

    @property
    def is_symmetric(self) -> bool:
        return self.p01 == self.p10

    def matrix(self) -> np.ndarray:
        """2x2 transition matrix indexed [from][to] with 0=OFF, 1=ON."""
        return np.array([[1.0 - self.p01, self.p01], [self.p10, 1.0 - self.p10]])


def steady_state_on(params: ChannelParams) -> float:
    return params.p01 / (params.p01 + params.p10)


def predict_on(params: ChannelParams, current: int, k: int) -> float:
    """P(C(t+k) = 1 | C(t) = current)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    pi1 = steady_state_on(params)
    return pi1 + (current - pi1) * params.memory**k


def predict_on_sum(params: ChannelParams, current: int, k: int) -> float:
    """Sum of predict_on over horizons 1..k."""
    return sum(predict_on(params, current, tau) for tau in range(1, k + 1))


def sample_step(params: ChannelParams, current: int, rng: np.random.Generator) -> int:
    """Advance one slot using exactly one uniform draw."""
    p_on = (1.0 - params.p10) if current else params.p01
    return int(rng.random() < p_on)


def sample_paths(params: ChannelParams, n: int, horizon: int, rng: np.random.Generator,
                 initial=None) -> np.ndarray:
    """Channel trajectories of shape (horizon, n) as uint8.

    Built from alternating geometric sojourn times, which is distributionally
    identical to slot-by-slot sampling and much faster. Starts from `initial`
    or from the stationary distribution.
    """
    out = np.empty((horizon, n), dtype=np.uint8)
    if initial is None:
        start = (rng.random(n) < steady_state_on(params)).astype(np.uint8)
    else:
        start = np.asarray(initial, dtype=np.uint8)
    mean_cycle = 1.0 / params.p10 + 1.0 / params.p01
    for i in range(n):
        state = int(start[i])
        pos = 0
        while pos < horizon:
            pairs = int(horizon / mean_cycle) + 16
            on = rng.geometric(params.p10, pairs)
            off = rng.geometric(params.p01, pairs)
            first, second = (on, off) if state else (off, on)
            lengths = np.empty(2 * pairs, dtype=np.int64)
            lengths[0::2] = first
            lengths[1::2] = second
            values = np.empty(2 * pairs, dtype=np.uint8)
            values[0::2] = state
            values[1::2] = 1 - state
            run = np.repeat(values, lengths)[: horizon - pos]
            out[pos:pos + len(run), i] = run
            pos += len(run)
            state = 1 - int(values[-1])
    return out
