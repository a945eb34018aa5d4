"""Saturated-system MDP: states, kernel, rewards and the state-action polytope.

A state is (m, c): server position m in 1..N and one connectivity bit per
queue. States are indexed (m-1)*2^N + pattern, where the pattern reads the
OFF flags with c_1 as the most significant bit, so for N=2 the order is
(1,1,1), (1,1,0), (1,0,1), (1,0,0), (2,1,1), ..., (2,0,0). An action is the
target queue for the next slot, so staying means target == m. Variables of the polytope are ordered x[s * N + (target - 1)].
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .channel import ChannelParams

MAX_QUEUES = 6

PolicyTable = tuple  # target queue (1-based) per state index


@dataclass(frozen=True)
class SaturatedState:
    m: int
    c: tuple

    @property
    def n(self) -> int:
        return len(self.c)

    def encode(self) -> int:
        bits = 0
        for b in self.c:
            bits = (bits << 1) | (1 - int(b))
        return (self.m - 1) * (1 << self.n) + bits

    @classmethod
    def decode(cls, index: int, n: int) -> "SaturatedState":
        m, bits = divmod(index, 1 << n)
        c = tuple(1 - ((bits >> (n - 1 - i)) & 1) for i in range(n))
        return cls(m + 1, c)

    def label(self) -> str:
        return f"({self.m},{','.join(str(b) for b in self.c)})"


def _check_n(n: int) -> None:
    if not (1 <= n <= MAX_QUEUES):
        raise ValueError(f"queue count must be in 1..{MAX_QUEUES}, got {n}")


def n_states(n: int) -> int:
    return n * (1 << n)


def enumerate_states(n: int) -> list:
    _check_n(n)
    return [SaturatedState.decode(i, n) for i in range(n_states(n))]


def transition_prob(params: ChannelParams, s: SaturatedState, target: int,
                    s_next: SaturatedState) -> float:
    if s_next.m != target:
        return 0.0
    P = params.matrix()
    prob = 1.0
    for a, b in zip(s.c, s_next.c):
        prob *= P[a, b]
    return float(prob)


def reward(s: SaturatedState, target: int, i: int) -> int:
    return int(s.m == i and s.c[i - 1] == 1 and target == i)


def channel_kernel(params: ChannelParams, n: int) -> np.ndarray:
    """Joint one-step kernel over the 2^n channel patterns in state-index order."""
    flipped = params.matrix()[::-1, ::-1]  # index 0 = ON
    K = np.ones((1, 1))
    for _ in range(n):
        K = np.kron(K, flipped)
    return K


@lru_cache(maxsize=None)
def reward_matrix(n: int) -> np.ndarray:
    """R[i, v] = reward of variable v for queue i+1 (read-only, cached)."""
    _check_n(n)
    S = n_states(n)
    R = np.zeros((n, S * n))
    for s in range(S):
        st = SaturatedState.decode(s, n)
        if st.c[st.m - 1] == 1:
            R[st.m - 1, s * n + st.m - 1] = 1.0
    R.setflags(write=False)
    return R


@dataclass(frozen=True)
class Polytope:
    """Equality system A x = b, x >= 0, describing the state-action polytope."""

    params: ChannelParams
    n: int
    A: np.ndarray
    b: np.ndarray
    redundant_row: int
    rewards: np.ndarray

    @property
    def n_vars(self) -> int:
        return self.A.shape[1]

    def objective(self, alpha) -> np.ndarray:
        return np.asarray(alpha, dtype=float) @ self.rewards

    def equalities(self, drop_redundant: bool = False):
        if not drop_redundant:
            return self.A, self.b
        keep = np.arange(self.A.shape[0]) != self.redundant_row
        return self.A[keep], self.b[keep]


@lru_cache(maxsize=64)
def build_polytope(params: ChannelParams, n: int) -> Polytope:
    _check_n(n)
    S = n_states(n)
    C = 1 << n
    K = channel_kernel(params, n)
    A = np.zeros((S + 1, S * n))
    for s in range(S):
        c = s % C
        for a in range(n):
            v = s * n + a
            A[s, v] += 1.0
            # inflow into every state at position a+1
            A[a * C:(a + 1) * C, v] -= K[c]
    A[S, :] = 1.0
    b = np.zeros(S + 1)
    b[S] = 1.0
    A.setflags(write=False)
    b.setflags(write=False)
    return Polytope(params, n, A, b, S - 1, reward_matrix(n))


def balance_residual(poly: Polytope, x) -> float:
    x = np.asarray(x, dtype=float)
    return float(np.max(np.abs(poly.A @ x - poly.b)))


def rates_from_x(x, n: int) -> np.ndarray:
    return reward_matrix(n) @ np.clip(np.asarray(x, dtype=float), 0.0, None)


def state_mass(x, n: int) -> np.ndarray:
    return np.clip(np.asarray(x, dtype=float), 0.0, None).reshape(-1, n).sum(axis=1)


def policy_from_x(x, n: int, tol: float = 1e-9) -> np.ndarray:
    """Randomized stationary policy as an (S, n) matrix of action probabilities.

    Recurrent states use x(s,a)/sum_a x(s,a). A transient state stays if its
    queue carries recurrent mass; otherwise it moves to the queue with the
    largest recurrent mass, so the induced chain keeps a single recurrent class.
    """
    X = np.clip(np.asarray(x, dtype=float), 0.0, None).reshape(-1, n)
    S = X.shape[0]
    C = S // n
    mass = X.sum(axis=1)
    queue_mass = mass.reshape(n, C).sum(axis=1)
    fallback = int(np.argmax(queue_mass))
    probs = np.zeros_like(X)
    for s in range(S):
        if mass[s] > tol:
            probs[s] = X[s] / mass[s]
        else:
            m = s // C
            probs[s, m if queue_mass[m] > tol else fallback] = 1.0
    return probs


def deterministic_table(x, n: int) -> PolicyTable:
    """Most likely target per state (exact for vertices)."""
    return tuple(int(a) + 1 for a in np.argmax(policy_from_x(x, n), axis=1))


def all_stay_table(n: int) -> PolicyTable:
    C = 1 << n
    return tuple(s // C + 1 for s in range(n_states(n)))


def policy_kernel(params: ChannelParams, n: int, table: PolicyTable) -> np.ndarray:
    """State transition matrix of the chain induced by a deterministic table."""
    S = n_states(n)
    C = 1 << n
    K = channel_kernel(params, n)
    P = np.zeros((S, S))
    for s in range(S):
        a = table[s] - 1
        P[s, a * C:(a + 1) * C] = K[s % C]
    return P


def occupancy_from_table(params: ChannelParams, n: int, table: PolicyTable) -> np.ndarray:
    """State-action frequencies of a unichain deterministic table via a linear solve."""
    P = policy_kernel(params, n, table)
    S = P.shape[0]
    M = np.vstack([P.T - np.eye(S), np.ones((1, S))])
    rhs = np.zeros(S + 1)
    rhs[-1] = 1.0
    pi, _, rank, _ = np.linalg.lstsq(M, rhs, rcond=None)
    if rank < S:
        raise ValueError("table induces more than one recurrent class")
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()
    x = np.zeros(S * n)
    for s in range(S):
        x[s * n + table[s] - 1] = pi[s]
    return x


def table_rates(params: ChannelParams, n: int, table: PolicyTable) -> np.ndarray:
    return rates_from_x(occupancy_from_table(params, n, table), n)


def mirror_table(table: PolicyTable) -> PolicyTable:
    """Swap the two queue labels of an N=2 table."""
    out = [0] * 8
    for s in range(8):
        st = SaturatedState.decode(s, 2)
        mirrored = SaturatedState(3 - st.m, (st.c[1], st.c[0])).encode()
        out[mirrored] = 3 - table[s]
    return tuple(out)
