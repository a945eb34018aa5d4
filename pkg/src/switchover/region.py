"""Rate regions of the saturated system.

Two independent routes are provided for two queues: an LP sweep over weight
directions and closed-form facet lists. General N uses the LP sweep, the
sum-rate bound and the per-queue outer bound.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelParams, steady_state_on
from .lp import LinearProgram, solve_max
from .mdp import build_polytope, rates_from_x

EPS_CRITICAL = 1.0 - math.sqrt(2.0) / 2.0
BRANCH_TOL = 1e-12
TOL = 1e-9


@dataclass(frozen=True)
class RateRegion:
    """Convex, downward-closed rate set.

    corners lists the vertices other than the origin (for two queues: the
    Pareto corners ordered by increasing r1). facets are (a, b) pairs meaning
    a . r <= b; nonnegativity is implicit.
    """

    n: int
    corners: tuple
    facets: tuple
    kind: str
    params: object = None
    meta: dict = field(default_factory=dict, compare=False)

    def corner_array(self) -> np.ndarray:
        return np.array(self.corners, dtype=float).reshape(-1, self.n)

    def polygon(self) -> np.ndarray:
        """Corners plus the origin, ordered around the boundary (two queues)."""
        pts = self.corner_array()
        return np.vstack([np.zeros((1, self.n)), pts])


def _norm_facet(a, b):
    a = np.asarray(a, dtype=float)
    s = np.max(np.abs(a))
    return tuple(float(v) for v in a / s), float(b / s)


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def pareto_hull(points, tol: float = 1e-12) -> list:
    """Upper-right boundary of the downward closure of 2-D points.

    Monotone-chain upper hull from the top-left extreme to the bottom-right
    extreme with collinear points removed.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    top = pts[:, 1].max()
    right = pts[:, 0].max()
    cand = [tuple(p) for p in pts]
    cand += [(0.0, top), (right, 0.0)]
    cand = sorted(set(cand), key=lambda p: (p[0], -p[1]))
    hull: list = []
    for p in cand:
        while len(hull) >= 2 and _cross(hull[-2], hull[-1], p) >= -tol:
            hull.pop()
        hull.append(p)
    # keep the descending staircase from the highest to the rightmost point
    start = max(range(len(hull)), key=lambda i: (hull[i][1], -hull[i][0]))
    chain = hull[start:]
    out = [chain[0]]
    for p in chain[1:]:
        if p[1] < out[-1][1] - tol or p[0] > out[-1][0] + tol:
            out.append(p)
    return out


def _dedupe_points(points, tol: float) -> list:
    kept: list = []
    for p in points:
        if all(np.max(np.abs(np.asarray(p) - np.asarray(k))) > tol for k in kept):
            kept.append(tuple(float(v) for v in p))
    return kept


def _facets_from_chain(chain) -> tuple:
    facets = []
    for p, q in zip(chain[:-1], chain[1:]):
        a = (p[1] - q[1], q[0] - p[0])
        b = a[0] * p[0] + a[1] * p[1]
        facets.append(_norm_facet(a, b))
    return tuple(facets)


def solve_weighted(params: ChannelParams, n: int, alpha) -> tuple:
    poly = build_polytope(params, n)
    sol = solve_max(LinearProgram(poly.objective(alpha), *poly.equalities(drop_redundant=True)))
    if sol.status != "optimal":
        raise RuntimeError(f"polytope LP returned {sol.status}")
    return sol, rates_from_x(sol.x, n)


def _simplex_lattice(n: int, divisions: int):
    for combo in itertools.combinations(range(divisions + n - 1), n - 1):
        parts, prev = [], -1
        for c in combo:
            parts.append(c - prev - 1)
            prev = c
        parts.append(divisions + n - 2 - prev)
        yield np.array(parts, dtype=float) / divisions


def corners_via_sweep(params: ChannelParams, n: int = 2, weight_count: int = 721) -> RateRegion:
    """Corner enumeration by maximising weighted rates over a grid of weights.

    For two queues the grid is weight_count angles in [0, pi/2], followed by a
    refinement that probes the normal of every segment between consecutive
    corners so no corner between grid angles is missed. For n >= 3 the grid
    is a simplex lattice with weight_count divisions and no facets are built.
    """
    if weight_count < 2 * n + 1:
        raise ValueError("weight_count must be at least 2N+1")
    if n != 2:
        pts = [solve_weighted(params, n, a)[1] for a in _simplex_lattice(n, weight_count)]
        pts = [p for p in pts if p.max() > TOL]
        return RateRegion(n, tuple(_dedupe_points(pts, 1e-10)), (), "sweep", params)

    pts = []
    for th in np.linspace(0.0, math.pi / 2, weight_count):
        alpha = np.array([math.cos(th), math.sin(th)])
        pts.append(solve_weighted(params, 2, alpha / alpha.sum())[1])
    chain = pareto_hull(pts)

    def refine(p, q, depth=0):
        normal = np.array([p[1] - q[1], q[0] - p[0]])
        if depth > 30 or normal.min() <= 0:
            return []
        _, r = solve_weighted(params, 2, normal / normal.sum())
        if normal @ r > normal @ np.asarray(p) + 1e-11:
            r = tuple(float(v) for v in r)
            return refine(p, r, depth + 1) + [r] + refine(r, q, depth + 1)
        return []

    full = [chain[0]]
    for p, q in zip(chain[:-1], chain[1:]):
        full += refine(p, q) + [q]
    chain = pareto_hull(full)
    facets = _facets_from_chain(chain)
    return RateRegion(2, tuple(chain), facets, "sweep", params)


def _two_queue_facets(params: ChannelParams) -> tuple:
    p01, p10 = params.p01, params.p10
    s = p01 + p10
    pi1 = p01 / s
    total = 1.0 - p10**2 / s**2 - p10 * p01 / s
    if params.is_symmetric:
        e = p01
        total_sym = 0.75 - e / 2.0
        if e < EPS_CRITICAL - BRANCH_TOL:
            g = (1 - e) ** 2
            h = 1 + e - e * e
            return False, (
                ((e, g), g / 2),
                ((1 - e, h), total_sym),
                ((1.0, 1.0), total_sym),
                ((h, 1 - e), total_sym),
                ((g, e), g / 2),
            )
        k = (1 - e) * (3 - 2 * e)
        return True, (
            ((1.0, k), k / 2),
            ((1.0, 1.0), total_sym),
            ((k, 1.0), k / 2),
        )
    h1 = (1 - p01) * (1 - p10)
    h2 = 1 + p10 - p10**2
    h3 = (1 - p10) * (p10 + (p10 + p01) * (1 - p10))
    if p01 < (1 - p10) ** 2 / (2 - p10) - BRANCH_TOL:
        return False, (
            ((p01, h1), h1 * pi1),
            ((1 - p10, h2), total),
            ((1.0, 1.0), total),
            ((h2, 1 - p10), total),
            ((h1, p01), h1 * pi1),
        )
    return True, (
        ((p01, h3), h3 * pi1),
        ((1.0, 1.0), total),
        ((h3, p01), h3 * pi1),
    )


def closed_form_corners(params: ChannelParams) -> list:
    """Pareto corners by explicit formulas, ordered by increasing r1."""
    p01, p10 = params.p01, params.p10
    s = p01 + p10
    pi1 = p01 / s
    if params.is_symmetric:
        e = p01
        b2 = ((1 - e) * (3 - 2 * e) / (4 * (2 - e)), (3 - 2 * e) / (4 * (2 - e)))
        if e < EPS_CRITICAL - BRANCH_TOL:
            b1 = ((1 - e) ** 2 / 4, (2 - e) / 4)
            mids = [b1, b2, b2[::-1], b1[::-1]]
        else:
            mids = [b2, b2[::-1]]
        if e >= 0.5 - BRANCH_TOL:
            mids = []
        return [(0.0, 0.5)] + mids + [(0.5, 0.0)]
    g = (p01 * p10 + p01 * (1 - p10) * s) / s**2
    inner = ((1 - p10) / (2 - p10) * g, g / (2 - p10))
    mids = [inner, inner[::-1]]
    if p01 < (1 - p10) ** 2 / (2 - p10) - BRANCH_TOL:
        extra = ((1 - p10) * (1 - p01) * p01 * p10 / s**2, p01 * (p10 - p10 * p01 + p01) / s**2)
        mids = [extra, inner, inner[::-1], extra[::-1]]
    if params.is_iid:
        mids = []
    return [(0.0, pi1)] + mids + [(pi1, 0.0)]


def closed_form_two_queue(params: ChannelParams, n: int = 2) -> RateRegion:
    """Closed-form two-queue region: explicit facets, corners from facet intersections."""
    if n != 2:
        raise ValueError("closed form exists for two queues only")
    high_branch, facets = _two_queue_facets(params)
    pi1 = steady_state_on(params)
    # consecutive facets meet at the interior corners; the axes close the chain
    pts = [(0.0, facets[0][1] / facets[0][0][1])]
    for (a1, b1), (a2, b2) in zip(facets[:-1], facets[1:]):
        M = np.array([a1, a2], dtype=float)
        if abs(np.linalg.det(M)) < 1e-14:
            continue
        pts.append(tuple(np.linalg.solve(M, [b1, b2])))
    pts.append((facets[-1][1] / facets[-1][0][0], 0.0))
    chain = pareto_hull(pts)
    assert abs(chain[0][1] - pi1) < 1e-12
    unique = []
    for a, b in facets:
        f = (tuple(map(float, a)), float(b))
        if f not in unique:
            unique.append(f)
    return RateRegion(
        2,
        tuple(tuple(float(v) for v in p) for p in chain),
        tuple(unique),
        "closed_form",
        params,
        {"four_corner_branch": high_branch},
    )


def iid_region(p) -> RateRegion:
    p = [float(v) for v in p]
    if any(not (0.0 < v <= 1.0) for v in p):
        raise ValueError("ON probabilities must lie in (0, 1]")
    n = len(p)
    corners = tuple(tuple(p[i] if j == i else 0.0 for j in range(n)) for i in range(n))
    return RateRegion(n, corners, ((tuple(1.0 / v for v in p), 1.0),), "iid", tuple(p))


def load(lam, p) -> float:
    return float(sum(l / q for l, q in zip(lam, p)))


def sum_rate_upper_bound(params: ChannelParams, n: int) -> float:
    """Sum of saturated departure rates over N queues.

    A bound for positively correlated or i.i.d. channels (p01 + p10 <= 1).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    c0 = (params.p10 / (params.p10 + params.p01)) ** n
    return 1.0 - c0 - (params.p10 * (1.0 - c0) - params.p01 * c0)


def _vertices(A: np.ndarray, b: np.ndarray) -> list:
    """Vertices of {r : A r <= b} by brute force over active sets (small N)."""
    n = A.shape[1]
    out = []
    for rows in itertools.combinations(range(A.shape[0]), n):
        M = A[list(rows)]
        if abs(np.linalg.det(M)) < 1e-12:
            continue
        r = np.linalg.solve(M, b[list(rows)])
        if np.all(A @ r <= b + 1e-12):
            out.append(r)
    return _dedupe_points(out, 1e-12)


def outer_bound(params: ChannelParams, n: int) -> RateRegion:
    pi1 = steady_state_on(params)
    total = sum_rate_upper_bound(params, n)
    facets = [(tuple([1.0] * n), total)]
    facets += [(tuple(1.0 if j == i else 0.0 for j in range(n)), pi1) for i in range(n)]
    A = np.array([a for a, _ in facets] + [[-1.0 if j == i else 0.0 for j in range(n)] for i in range(n)])
    b = np.array([v for _, v in facets] + [0.0] * n)
    verts = [tuple(float(x) + 0.0 for x in v) for v in _vertices(A, b) if max(v) > 1e-12]  # + 0.0 drops -0.0
    verts.sort(key=lambda v: tuple(v))
    return RateRegion(n, tuple(verts), tuple(facets), "outer", params)


def _lp_membership(params: ChannelParams, n: int, lam) -> float:
    """Largest xi with lam + xi*1 achievable, by LP over the polytope."""
    poly = build_polytope(params, n)
    eq_A, eq_b = poly.equalities(drop_redundant=True)
    nv = poly.n_vars
    S = eq_A.shape[0]
    # variables: x, slacks s_i, xi_plus, xi_minus
    A = np.zeros((S + n, nv + n + 2))
    A[:S, :nv] = eq_A
    A[S:, :nv] = poly.rewards
    A[S:, nv:nv + n] = -np.eye(n)
    A[S:, nv + n] = -1.0
    A[S:, nv + n + 1] = 1.0
    b = np.concatenate([eq_b, np.asarray(lam, dtype=float)])
    c = np.zeros(nv + n + 2)
    c[nv + n] = 1.0
    c[nv + n + 1] = -1.0
    sol = solve_max(LinearProgram(c, A, b))
    if sol.status != "optimal":
        raise RuntimeError(f"membership LP returned {sol.status}")
    return sol.objective_value


def distance_to_boundary(region: RateRegion, lam) -> float:
    """Largest xi such that lam + xi*1 stays in the region (negative if outside)."""
    lam = np.asarray(lam, dtype=float)
    if region.kind == "sweep" and region.n != 2:
        return _lp_membership(region.params, region.n, lam)
    xi = math.inf
    for a, b in region.facets:
        a = np.asarray(a)
        slack = b - a @ lam
        xi = min(xi, slack / a.sum())
    if np.any(lam < 0):
        xi = min(xi, float(lam.min()))
    return float(xi)


def contains(region: RateRegion, lam, delta: float = 0.0) -> bool:
    lam = np.asarray(lam, dtype=float) + delta
    if np.any(lam < -TOL):
        return False
    if region.kind == "sweep" and region.n != 2:
        if not contains(outer_bound(region.params, region.n), lam):
            return False
        return _lp_membership(region.params, region.n, lam) >= -TOL
    return all(np.asarray(a) @ lam <= b + TOL for a, b in region.facets)


def delay_upper_bound(T: float, a_max: float, xi: float) -> float:
    if xi <= 0:
        raise ValueError("xi must be positive: arrival vector is on or outside the boundary")
    if T < 1:
        raise ValueError("frame length must be >= 1")
    return (1.0 + a_max**2 + a_max * xi) * T / xi
