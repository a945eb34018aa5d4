"""Brute-force checks that do not go through the LP.

Stationary-deterministic policies are enumerated exhaustively, each one is
evaluated by iterating its own Markov chain, and the resulting rate points are
hulled directly. The weighted-rate ratio analysis between the myopic and the
LP-based lookups also lives here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelParams
from .policies import fbdc_thresholds, olm_intervals
from .region import EPS_CRITICAL, closed_form_corners


def _one_step(params: ChannelParams, a: int, b: int) -> float:
    if a == 1:
        return 1.0 - params.p10 if b == 1 else params.p10
    return params.p01 if b == 1 else 1.0 - params.p01


def _states(n: int) -> list:
    out = []
    for m in range(1, n + 1):
        for pattern in range(1 << n):
            out.append((m, tuple(1 - ((pattern >> (n - 1 - i)) & 1) for i in range(n))))
    return out


def policy_chain(params: ChannelParams, table, n: int):
    """Transition matrix and per-state reward vectors built state by state."""
    states = _states(n)
    index = {s: i for i, s in enumerate(states)}
    S = len(states)
    P = np.zeros((S, S))
    R = np.zeros((S, n))
    for i, (m, c) in enumerate(states):
        a = table[i]
        if a == m and c[m - 1] == 1:
            R[i, m - 1] = 1.0
        for c2 in {s[1] for s in states}:
            prob = 1.0
            for x, y in zip(c, c2):
                prob *= _one_step(params, x, y)
            P[i, index[(a, c2)]] += prob
    return P, R


def initial_distribution(params: ChannelParams, n: int, m0: int = 1) -> np.ndarray:
    pi1 = params.p01 / (params.p01 + params.p10)
    mu = np.zeros(len(_states(n)))
    for i, (m, c) in enumerate(_states(n)):
        if m == m0:
            mu[i] = math.prod(pi1 if b else 1.0 - pi1 for b in c)
    return mu


def cesaro_occupancy(P: np.ndarray, mu: np.ndarray, max_squarings: int = 64) -> np.ndarray:
    """Long-run average state occupancy started from mu.

    Uses the lazy chain (I + P)/2, which is aperiodic and has the same
    time-average limit, and squares it until the limit matrix settles.
    """
    L = 0.5 * (np.eye(P.shape[0]) + P)
    for _ in range(max_squarings):
        L2 = L @ L
        L2 /= L2.sum(axis=1, keepdims=True)  # keep rounding from compounding
        if np.max(np.abs(L2 - L)) < 1e-12:
            return mu @ L2
        L = L2
    raise ArithmeticError("occupancy did not converge")


def stationary_rates(params: ChannelParams, table, n: int = 2, m0: int = 1) -> np.ndarray:
    if n > 3:
        raise ValueError("exhaustive evaluation supports N <= 3")
    P, R = policy_chain(params, table, n)
    return cesaro_occupancy(P, initial_distribution(params, n, m0)) @ R


def direct_stationary_rates(params: ChannelParams, table, n: int = 2) -> np.ndarray:
    """Unichain-only rates by solving pi P = pi with normalisation."""
    P, R = policy_chain(params, table, n)
    S = P.shape[0]
    M = np.vstack([P.T - np.eye(S), np.ones((1, S))])
    rhs = np.zeros(S + 1)
    rhs[-1] = 1.0
    pi = np.linalg.lstsq(M, rhs, rcond=None)[0]
    return pi @ R


def table_from_index(index: int, n: int = 2) -> tuple:
    S = len(_states(n))
    out = []
    for _ in range(S):
        index, d = divmod(index, n)
        out.append(d + 1)
    return tuple(out)


def policy_count(n: int = 2) -> int:
    return n ** len(_states(n))


def all_policy_rates(params: ChannelParams, n: int = 2) -> np.ndarray:
    pts = [stationary_rates(params, table_from_index(i, n), n) for i in range(policy_count(n))]
    stay = tuple(m for m, _ in _states(n))
    pts += [stationary_rates(params, stay, n, m0) for m0 in range(1, n + 1)]
    return np.array(pts)


def monotone_chain_upper(points, tol: float = 1e-12) -> list:
    """Upper hull of points (sorted by x), collinear points dropped."""
    pts = sorted({(float(x), float(y)) for x, y in points})
    hull: list = []
    for p in pts:
        while len(hull) >= 2:
            (ox, oy), (ax, ay) = hull[-2], hull[-1]
            if (ax - ox) * (p[1] - oy) - (ay - oy) * (p[0] - ox) >= -tol:
                hull.pop()
            else:
                break
        hull.append(p)
    return hull


def enumerate_hull(params: ChannelParams, tol: float = 1e-12) -> list:
    """Pareto corners of the hull of all 2-queue deterministic policies."""
    pts = all_policy_rates(params, 2)
    closure = list(map(tuple, pts))
    closure += [(0.0, y) for _, y in pts] + [(x, 0.0) for x, _ in pts]
    upper = monotone_chain_upper(closure, tol)
    top = max(range(len(upper)), key=lambda i: (upper[i][1], -upper[i][0]))
    chain = [upper[top]]
    for p in upper[top + 1:]:
        if p[1] < chain[-1][1] - tol:
            chain.append(p)
    return chain


def lp_max_by_enumeration(params: ChannelParams, alpha) -> float:
    return float(np.max(all_policy_rates(params, 2) @ np.asarray(alpha, dtype=float)))


# weighted departure-rate ratio --------------------------------------------------

def eps_t() -> float:
    """Root in (0, eps_c) of (2 - e)/(1 - e) = (1 - e)^2/e.

    Cleared of denominators: (1 - e)^3 - e(2 - e) = -e^3 + 4e^2 - 5e + 1 = 0.
    """
    roots = np.roots([-1.0, 4.0, -5.0, 1.0])
    real = [r.real for r in roots if abs(r.imag) < 1e-12 and 0 < r.real < EPS_CRITICAL]
    return float(real[0])


@dataclass
class PsiReport:
    params: ChannelParams
    k: int
    intervals: list = field(default_factory=list)  # (low, high, olm corner, fbdc corner, min psi, witness)
    global_min: float = 1.0
    witness: float = float("nan")


def _corner_rates(params: ChannelParams) -> dict:
    return {f"b{i}": np.array(c) for i, c in enumerate(closed_form_corners(params))}


def psi_scan(params: ChannelParams, k: int = 1, samples: int = 10_000) -> PsiReport:
    """Minimum of (Q.r_olm)/(Q.r_fbdc) over ratios where the two lookups disagree.

    Ratios are Q2/Q1 with Q = (1, ratio). Each disagreement interval is
    sampled log-uniformly plus both endpoints nudged inward by 1e-9.
    """
    lows, ids = fbdc_thresholds(params)
    corners = _corner_rates(params)
    ivs = olm_intervals(params, k)
    edges = sorted(set(list(lows) + [iv.low for iv in ivs]))
    edges = edges + [math.inf]
    report = PsiReport(params, k)
    for lo, hi in zip(edges[:-1], edges[1:]):
        probe = hi / 2 if lo == 0 else (lo * 2 if math.isinf(hi) else math.sqrt(lo * hi))
        olm = next(iv for iv in reversed(ivs) if probe >= iv.low)
        fb = ids[max(i for i, v in enumerate(lows) if probe >= v)]
        r_hat = np.array(olm.rates)
        r_star = corners[fb]
        if np.max(np.abs(r_hat - r_star)) <= 1e-12:
            continue
        a = lo if lo > 0 else 1e-6 * hi
        b = hi if not math.isinf(hi) else 1e6 * max(lo, 1.0)
        rho = np.concatenate([np.geomspace(a, b, samples), [lo + 1e-9, hi - 1e-9] if not math.isinf(hi) else [lo + 1e-9]])
        rho = rho[(rho >= lo) & (rho < hi) & (rho > 0)]
        psi = (r_hat[0] + rho * r_hat[1]) / (r_star[0] + rho * r_star[1])
        j = int(np.argmin(psi))
        report.intervals.append((lo, hi, olm.corner, fb, float(psi[j]), float(rho[j])))
        if psi[j] < report.global_min:
            report.global_min, report.witness = float(psi[j]), float(rho[j])
    return report


def psi_grid_min(k: int = 1, grid=None, samples: int = 10_000) -> tuple:
    """(global min, eps, witness ratio) over the symmetric eps grid 0.01..0.49."""
    grid = np.round(np.arange(0.01, 0.495, 0.01), 2) if grid is None else grid
    best = (math.inf, None, None)
    for e in grid:
        rep = psi_scan(ChannelParams.symmetric(float(e)), k, samples)
        if rep.global_min < best[0]:
            best = (rep.global_min, float(e), rep.witness)
    return best


def psi_regime(e: float) -> str:
    if e >= EPS_CRITICAL:
        return "high"
    return "low" if e < eps_t() else "mid"


def psi_region_minima(k: int = 1, eps_per_regime: int = 400, samples: int = 400) -> dict:
    """Infimum of psi per (regime, olm corner, fbdc corner) over ratios >= 1.

    Regimes split eps at eps_t and eps_c; each regime is scanned on a grid that
    includes points within 1e-9 of its ends so limits at the ends are captured.
    """
    et = eps_t()
    spans = {"low": (1e-3, et), "mid": (et, EPS_CRITICAL), "high": (EPS_CRITICAL, 0.5)}
    out: dict = {}
    for regime, (a, b) in spans.items():
        grid = np.concatenate([np.linspace(a, b, eps_per_regime), [a + 1e-9, b - 1e-9]])
        for e in grid:
            if not (a < e < b):
                continue
            rep = psi_scan(ChannelParams.symmetric(float(e)), k, samples)
            for lo, hi, oc, fc, val, _ in rep.intervals:
                if lo < 1.0:
                    continue
                key = (regime, oc, fc)
                out[key] = min(out.get(key, math.inf), val)
    return out
