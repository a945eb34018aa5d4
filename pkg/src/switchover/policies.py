"""Scheduling policies and their two-queue lookup tables.

Every controller answers one question per slot: which queue should the server
occupy next slot. Staying at a queue with an ON channel serves one packet;
moving costs the slot.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .channel import ChannelParams, predict_on_sum, steady_state_on
from .lp import LinearProgram, solve_max
from .mdp import (
    SaturatedState,
    all_stay_table,
    build_polytope,
    deterministic_table,
    mirror_table,
    rates_from_x,
    table_rates,
)
from .region import BRANCH_TOL, closed_form_corners

KINDS = ("fbdc_lp", "fbdc_table", "myopic", "greedy_myopic", "max_weight", "gated", "exhaustive")
ALIASES = {"olm": ("myopic", 1), "gm": ("greedy_myopic", 1), "mw": ("max_weight", 1)}

# state order (1,1,1) (1,1,0) (1,0,1) (1,0,0) (2,1,1) (2,1,0) (2,0,1) (2,0,0); S = stay, W = switch
STATE_LABELS_2 = tuple(SaturatedState.decode(s, 2).label() for s in range(8))


def table_from_marks(marks: str) -> tuple:
    return tuple((s // 4 + 1) if ch == "S" else (2 - s // 4) for s, ch in enumerate(marks))


def marks_from_table(table) -> str:
    return "".join("S" if t == s // 4 + 1 else "W" for s, t in enumerate(table))


_SIX = {
    "b0": "WWWWSSSS",
    "b1": "WSWWSWSS",
    "b2": "SSWWSWSS",
}
SIX_CORNER_TABLES = {k: table_from_marks(v) for k, v in _SIX.items()}
SIX_CORNER_TABLES["b3"] = mirror_table(SIX_CORNER_TABLES["b2"])
SIX_CORNER_TABLES["b4"] = mirror_table(SIX_CORNER_TABLES["b1"])
SIX_CORNER_TABLES["b5"] = mirror_table(SIX_CORNER_TABLES["b0"])

FOUR_CORNER_TABLES = {
    "b0": SIX_CORNER_TABLES["b0"],
    "b1": SIX_CORNER_TABLES["b2"],
    "b2": SIX_CORNER_TABLES["b3"],
    "b3": SIX_CORNER_TABLES["b5"],
}


@dataclass(frozen=True)
class PolicySpec:
    kind: str
    k: int = 1

    def __post_init__(self) -> None:
        if self.kind in ALIASES:
            kind, k = ALIASES[self.kind]
            object.__setattr__(self, "kind", kind)
            if kind != "myopic":
                object.__setattr__(self, "k", k)
        if self.kind not in KINDS:
            raise ValueError(f"unknown policy kind {self.kind!r}")
        if self.k < 1:
            raise ValueError("lookahead k must be >= 1")


def queue_ratio(Q) -> float:
    """Q2/Q1 with Q1 = 0 mapped to +inf."""
    q1, q2 = float(Q[0]), float(Q[1])
    return math.inf if q1 == 0 else q2 / q1


def six_corner_case(params: ChannelParams) -> bool:
    return params.p01 < (1 - params.p10) ** 2 / (2 - params.p10) - BRANCH_TOL


def fbdc_thresholds(params: ChannelParams) -> tuple:
    """(lower interval ends, corner ids) on Q2/Q1 for the FBDC lookup."""
    p01, p10 = params.p01, params.p10
    if six_corner_case(params):
        t1 = p01 / ((1 - p01) * (1 - p10))
        t2 = (1 - p10) / (1 + p10 - p10**2)
        return (0.0, t1, t2, 1.0, 1 / t2, 1 / t1), ("b5", "b4", "b3", "b2", "b1", "b0")
    h3 = (1 - p10) * (p10 + (p10 + p01) * (1 - p10))
    if params.is_iid:
        return (0.0, 1.0), ("b1", "b0")
    return (0.0, p01 / h3, 1.0, h3 / p01), ("b3", "b2", "b1", "b0")


def _interval_index(lows, ratio: float) -> int:
    idx = 0
    for i, lo in enumerate(lows):
        if ratio >= lo:
            idx = i
    return idx


def corner_tables(params: ChannelParams) -> dict:
    if params.is_iid:
        return {"b0": SIX_CORNER_TABLES["b0"], "b1": SIX_CORNER_TABLES["b5"]}
    return SIX_CORNER_TABLES if six_corner_case(params) else FOUR_CORNER_TABLES


def fbdc_table_lookup(params: ChannelParams, ratio: float) -> tuple:
    lows, ids = fbdc_thresholds(params)
    cid = ids[_interval_index(lows, ratio)]
    return cid, corner_tables(params)[cid]


def corner_id(params: ChannelParams, rates, tol: float = 1e-7):
    """Name of the closed-form corner equal to `rates`, or None."""
    for i, c in enumerate(closed_form_corners(params)):
        if max(abs(a - b) for a, b in zip(c, rates)) <= tol:
            return f"b{i}"
    return None


def fbdc_solve(params: ChannelParams, n: int, Q):
    """LP vertex maximising sum_i Q_i r_i; returns (table, rates)."""
    Q = np.asarray(Q, dtype=float)
    if not np.any(Q > 0):
        # staying put from m(0) = 1 serves queue 1 whenever it is ON
        rates = np.zeros(n)
        rates[0] = steady_state_on(params)
        return all_stay_table(n), rates
    poly = build_polytope(params, n)
    c = poly.objective(Q / Q.max())
    A, b = poly.equalities(drop_redundant=True)
    sol = solve_max(LinearProgram(c, A, b))
    if sol.status != "optimal":
        raise RuntimeError(f"FBDC LP returned {sol.status}")
    # Ties between optimal vertices go to the last queue, so an exact
    # threshold ratio picks the interval above it. Pinning the objective to
    # its optimum keeps the second solve on the optimal face.
    A2 = np.vstack([A, c])
    tie = solve_max(LinearProgram(poly.rewards[-1], A2, np.append(b, sol.objective_value)))
    x = tie.x if tie.status == "optimal" else sol.x
    return deterministic_table(x, n), rates_from_x(x, n)


def fbdc_plan(params: ChannelParams, n: int, Q) -> tuple:
    return fbdc_solve(params, n, Q)[0]


def myopic_weights(params: ChannelParams, frame_Q, s: SaturatedState, k: int = 1) -> np.ndarray:
    if k < 1:
        raise ValueError("k must be >= 1")
    W = np.empty(len(frame_Q))
    for i, (q, c) in enumerate(zip(frame_Q, s.c)):
        w = predict_on_sum(params, c, k)
        if i == s.m - 1:
            w += c
        W[i] = q * w
    return W


def myopic_decide(weights, m: int) -> int:
    own = weights[m - 1]
    best, target = -math.inf, m
    for i, w in enumerate(weights, start=1):
        if i != m and w > best:
            best, target = w, i
    return m if own >= best else target


def _olm_breakpoints(params: ChannelParams, k: int) -> list:
    pred = (predict_on_sum(params, 0, k), predict_on_sum(params, 1, k))
    out = set()
    for s in range(8):
        st = SaturatedState.decode(s, 2)
        own_c = st.c[st.m - 1]
        oth_c = st.c[2 - st.m]
        own = own_c + pred[own_c]
        oth = pred[oth_c]
        if own <= 0 or oth <= 0:
            continue
        out.add(own / oth if st.m == 1 else oth / own)
    return sorted(out)


def olm_table(params: ChannelParams, ratio: float, k: int = 1) -> tuple:
    """Per-state actions of the k-lookahead rule with frame queues (1, ratio)."""
    Q = (0.0, 1.0) if math.isinf(ratio) else (1.0, ratio)
    return tuple(
        myopic_decide(myopic_weights(params, Q, SaturatedState.decode(s, 2), k), SaturatedState.decode(s, 2).m)
        for s in range(8)
    )


@dataclass(frozen=True)
class OlmInterval:
    low: float
    high: float
    table: tuple
    rates: tuple
    corner: object


@lru_cache(maxsize=256)
def olm_intervals(params: ChannelParams, k: int = 1) -> tuple:
    """Ratio intervals [low, high) on which the k-lookahead rule induces fixed rates.

    Breakpoints come from the per-state weight comparisons; adjacent intervals
    whose tables give identical rates (they differ only on transient states)
    are merged.
    """
    bps = _olm_breakpoints(params, k)
    edges = [0.0] + bps + [math.inf]
    raw = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        if hi <= lo:
            continue
        if lo == 0.0:
            probe = hi / 2
        elif math.isinf(hi):
            probe = lo * 2
        else:
            probe = math.sqrt(lo * hi)
        table = olm_table(params, probe, k)
        rates = tuple(float(v) for v in table_rates(params, 2, table))
        raw.append([lo, hi, table, rates])
    merged = [raw[0]]
    for item in raw[1:]:
        if max(abs(a - b) for a, b in zip(item[3], merged[-1][3])) <= 1e-12:
            merged[-1][1] = item[1]
        else:
            merged.append(item)
    return tuple(OlmInterval(lo, hi, t, r, corner_id(params, r)) for lo, hi, t, r in merged)


def olm_thresholds(params: ChannelParams, k: int = 1) -> tuple:
    return tuple(iv.low for iv in olm_intervals(params, k))


def olm_table_lookup(params: ChannelParams, ratio: float, k: int = 1):
    """Corner the k-lookahead rule drives the saturated system to at ratio Q2/Q1."""
    ivs = olm_intervals(params, k)
    return ivs[_interval_index([iv.low for iv in ivs], ratio)].corner


def greedy_myopic_decide(s: SaturatedState) -> int:
    n = s.n
    if s.c[s.m - 1] == 1:
        return s.m
    for step in range(1, n):
        j = (s.m - 1 + step) % n + 1
        if s.c[j - 1] == 1:
            return j
    return s.m


def max_weight_decide(Q, C, m: int) -> int:
    w = [q * c for q, c in zip(Q, C)]
    best = max(w)
    if w[m - 1] == best:
        return m
    return w.index(best) + 1


# per-slot controllers used by the simulator ---------------------------------

class Controller:
    """decide(s, m, c, q) -> target; on_frame(Q) refreshes frame weights."""

    def on_frame(self, Q) -> None:
        pass

    def decide(self, s: int, m: int, c, q) -> int:
        raise NotImplementedError


class TableController(Controller):
    def __init__(self, table) -> None:
        self.table = tuple(table)

    def decide(self, s, m, c, q):
        return self.table[s]


class FbdcTableController(Controller):
    def __init__(self, params: ChannelParams) -> None:
        self.params = params
        self.table = all_stay_table(2)
        self.corner = None

    def on_frame(self, Q) -> None:
        if Q[0] == 0 and Q[1] == 0:
            self.table, self.corner = all_stay_table(2), None
        else:
            self.corner, self.table = fbdc_table_lookup(self.params, queue_ratio(Q))

    def decide(self, s, m, c, q):
        return self.table[s]


class FbdcLpController(Controller):
    def __init__(self, params: ChannelParams, n: int) -> None:
        self.params, self.n = params, n
        self.table = all_stay_table(n)
        self.cache: dict = {}

    def on_frame(self, Q) -> None:
        ints = [int(v) for v in Q]
        g = math.gcd(*ints) if any(ints) else 1
        key = tuple(v // g for v in ints)
        if key not in self.cache:
            self.cache[key] = fbdc_plan(self.params, self.n, key)
        self.table = self.cache[key]

    def decide(self, s, m, c, q):
        return self.table[s]


class MyopicController(Controller):
    def __init__(self, params: ChannelParams, n: int, k: int) -> None:
        self.pred = (predict_on_sum(params, 0, k), predict_on_sum(params, 1, k))
        self.Q = [0] * n
        self.n = n

    def on_frame(self, Q) -> None:
        self.Q = list(Q)

    def decide(self, s, m, c, q):
        Q, pred = self.Q, self.pred
        own = Q[m - 1] * (c[m - 1] + pred[c[m - 1]])
        best, target = -math.inf, m
        for i in range(self.n):
            if i != m - 1:
                w = Q[i] * pred[c[i]]
                if w > best:
                    best, target = w, i + 1
        return m if own >= best else target


class GreedyMyopicController(Controller):
    def __init__(self, n: int) -> None:
        self.n = n

    def decide(self, s, m, c, q):
        if c[m - 1]:
            return m
        n = self.n
        for step in range(1, n):
            j = (m - 1 + step) % n
            if c[j]:
                return j + 1
        return m


class MaxWeightController(Controller):
    def decide(self, s, m, c, q):
        return max_weight_decide(q, c, m)


class GatedController(Controller):
    """Gated or exhaustive cyclic service; idles on OFF slots during a visit."""

    def __init__(self, n: int, exhaustive: bool = False) -> None:
        self.n = n
        self.exhaustive = exhaustive
        self.gate = None

    def decide(self, s, m, c, q):
        nxt = m % self.n + 1
        if self.exhaustive:
            return m if q[m - 1] > 0 else nxt
        if self.gate is None:
            self.gate = q[m - 1]
        if self.gate == 0:
            self.gate = None
            return nxt
        if c[m - 1]:
            self.gate -= 1
        return m


def gated_decide(gate_remaining: int, m: int, n: int) -> int:
    """Stateless form of the gated rule: leave once the gate is exhausted."""
    return m % n + 1 if gate_remaining <= 0 else m


def make_controller(spec: PolicySpec, params: ChannelParams, n: int) -> Controller:
    if spec.kind == "fbdc_table":
        if n != 2:
            raise ValueError("fbdc_table requires two queues")
        return FbdcTableController(params)
    if spec.kind == "fbdc_lp":
        return FbdcLpController(params, n)
    if spec.kind == "myopic":
        return MyopicController(params, n, spec.k)
    if spec.kind == "greedy_myopic":
        return GreedyMyopicController(n)
    if spec.kind == "max_weight":
        return MaxWeightController()
    if spec.kind in ("gated", "exhaustive"):
        return GatedController(n, exhaustive=spec.kind == "exhaustive")
    raise ValueError(spec.kind)


def fbdc_table_rows(params: ChannelParams) -> list:
    lows, ids = fbdc_thresholds(params)
    tables = corner_tables(params)
    highs = list(lows[1:]) + [math.inf]
    return [(lo, hi, cid, tables[cid]) for lo, hi, cid in zip(lows, highs, ids)]


def olm_table_rows(params: ChannelParams, k: int = 1) -> list:
    return [(iv.low, iv.high, iv.corner or "-", iv.table) for iv in olm_intervals(params, k)]

