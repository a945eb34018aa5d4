"""Dense two-phase primal simplex with Bland's rule.

Solves max c.x subject to A x = b, x >= 0 and always returns a basic
feasible solution when one is optimal.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

PIVOT_TOL = 1e-9
FEAS_TOL = 1e-9
REFACTOR_EVERY = 20


@dataclass(frozen=True)
class LinearProgram:
    objective: np.ndarray
    eq_matrix: np.ndarray
    eq_rhs: np.ndarray

    def __post_init__(self) -> None:
        A = np.atleast_2d(np.asarray(self.eq_matrix, dtype=float))
        b = np.asarray(self.eq_rhs, dtype=float).ravel()
        c = np.asarray(self.objective, dtype=float).ravel()
        if A.shape != (b.size, c.size):
            raise ValueError(f"shape mismatch: A {A.shape}, b {b.size}, c {c.size}")
        if not np.all(np.isfinite(b)):
            raise ValueError("right-hand side must be finite")
        object.__setattr__(self, "eq_matrix", A)
        object.__setattr__(self, "eq_rhs", b)
        object.__setattr__(self, "objective", c)

    @property
    def n(self) -> int:
        return self.objective.size


@dataclass
class LpSolution:
    status: str  # optimal | infeasible | unbounded
    x: np.ndarray = field(default_factory=lambda: np.zeros(0))
    objective_value: float = float("nan")
    is_vertex: bool = False
    basis: tuple = ()
    iterations: int = 0


class _Tableau:
    """Rows 0..m-1 are constraints, row m holds reduced costs (max form)."""

    def __init__(self, A: np.ndarray, b: np.ndarray) -> None:
        m, n = A.shape
        self.m, self.n = m, n
        T = np.zeros((m + 1, n + m + 1))
        T[:m, :n] = A
        T[:m, n:n + m] = np.eye(m)
        T[:m, -1] = b
        self.T = T
        self.original = T[:m].copy()
        self.cost = np.zeros(n + m)
        self.basis = list(range(n, n + m))
        self.iterations = 0

    def pivot(self, r: int, j: int) -> None:
        T = self.T
        T[r] /= T[r, j]
        col = T[:, j].copy()
        col[r] = 0.0
        T -= np.outer(col, T[r])
        self.basis[r] = j
        self.iterations += 1
        if self.iterations % REFACTOR_EVERY == 0:
            self.refactor()

    def refactor(self) -> None:
        """Rebuild B^-1 [A I b] from the original data to shed accumulated rounding."""
        B = self.original[:, self.basis]
        self.T[:-1] = np.linalg.solve(B, self.original)
        self.set_objective(self.cost)

    def set_objective(self, c: np.ndarray) -> None:
        """Reduced costs d_j = c_j - c_B B^-1 A_j and value row for a full-width cost vector."""
        T = self.T
        self.cost = c
        cb = c[self.basis]
        T[-1, :-1] = c - cb @ T[:-1, :-1]
        T[-1, -1] = -(cb @ T[:-1, -1])

    def run(self, allowed: np.ndarray) -> str:
        """Pivot to optimality.

        Entering columns follow Dantzig's largest-reduced-cost rule while the
        objective improves. After a run of degenerate pivots the tableau
        switches to Bland's smallest-index rule, which cannot cycle, and
        returns to Dantzig once the objective moves again.
        """
        T = self.T
        stall_limit = T.shape[0]
        stalled = 0
        inf = np.inf
        while True:
            d = np.where(allowed, T[-1, :-1], 0.0)
            bland = stalled >= stall_limit
            if bland:
                cand = np.flatnonzero(d > PIVOT_TOL)
                if cand.size == 0:
                    return "optimal"
                j = int(cand[0])
            else:
                j = int(d.argmax())
                if d[j] <= PIVOT_TOL:
                    return "optimal"
            col = T[:-1, j]
            # relative threshold: entries at rounding level of a large column are zeros
            ok = col > PIVOT_TOL * max(1.0, float(np.abs(col).max()))
            if not ok.any():
                return "unbounded"
            ratios = np.full(col.shape, inf)
            np.divide(np.maximum(T[:-1, -1], 0.0), col, out=ratios, where=ok)
            best = ratios.min()
            ties = np.flatnonzero(ratios <= best * (1.0 + 1e-12) + 1e-15)
            if ties.size == 1:
                r = int(ties[0])
            elif bland:
                r = int(min(ties, key=lambda i: self.basis[i]))
            else:
                r = int(min(ties, key=lambda i: (-col[i], self.basis[i])))
            before = T[-1, -1]
            self.pivot(r, j)
            stalled = stalled + 1 if T[-1, -1] >= before - 1e-15 else 0
            # rounding can leave basic values at -1e-16; they are zeros
            rhs = T[:-1, -1]
            rhs[(rhs < 0) & (rhs > -FEAS_TOL)] = 0.0


def solve_max(lp: LinearProgram) -> LpSolution:
    A = lp.eq_matrix.copy()
    b = lp.eq_rhs.copy()
    neg = b < 0
    A[neg] *= -1.0
    b[neg] *= -1.0
    m, n = A.shape

    tab = _Tableau(A, b)
    phase1 = np.zeros(n + m)
    phase1[n:] = -1.0
    tab.set_objective(phase1)
    tab.run(np.ones(n + m, dtype=bool))
    # the value cell holds the residual artificial mass
    if tab.T[-1, -1] > FEAS_TOL * max(1.0, b.sum()):
        return LpSolution("infeasible", iterations=tab.iterations)

    # drive zero-valued artificials out of the basis where a structural pivot exists
    for r in range(m):
        if tab.basis[r] >= n:
            row = tab.T[r, :n]
            cand = np.flatnonzero(np.abs(row) > PIVOT_TOL)
            if cand.size:
                tab.pivot(r, int(cand[0]))
    # artificials still basic sit on redundant rows; they never enter again

    cost = np.zeros(n + m)
    cost[:n] = lp.objective
    tab.set_objective(cost)
    allowed = np.zeros(n + m, dtype=bool)
    allowed[:n] = True
    status = tab.run(allowed)
    if status != "optimal":
        return LpSolution(status, iterations=tab.iterations)

    x = np.zeros(n + m)
    for r, j in enumerate(tab.basis):
        x[j] = tab.T[r, -1]
    x = x[:n]
    x[np.abs(x) < PIVOT_TOL] = 0.0
    return LpSolution(
        "optimal",
        x=x,
        objective_value=float(lp.objective @ x),
        is_vertex=True,
        basis=tuple(j for j in tab.basis if j < n),
        iterations=tab.iterations,
    )


def dedupe_vertices(solutions, tol: float = 1e-9) -> list:
    """Keep the first occurrence of each distinct x (L-infinity distance > tol)."""
    kept = []
    for sol in solutions:
        x = sol.x if isinstance(sol, LpSolution) else np.asarray(sol, dtype=float)
        if all(np.max(np.abs(x - (k.x if isinstance(k, LpSolution) else k))) > tol for k in kept):
            kept.append(sol)
    return kept
