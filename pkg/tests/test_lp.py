import numpy as np
import pytest

from switchover.channel import ChannelParams
from switchover.lp import LinearProgram, LpSolution, dedupe_vertices, solve_max
from switchover.mdp import build_polytope, rates_from_x
from switchover.oracle import lp_max_by_enumeration


def _polytope_lp(eps, alpha, drop=False):
    poly = build_polytope(ChannelParams.symmetric(eps), 2)
    return poly, LinearProgram(poly.objective(alpha), *poly.equalities(drop))


def test_trivial():
    sol = solve_max(LinearProgram([1.0, 0.0], [[1.0, 1.0]], [1.0]))
    assert sol.status == "optimal"
    assert sol.objective_value == pytest.approx(1.0)
    np.testing.assert_allclose(sol.x, [1.0, 0.0])
    assert sol.is_vertex


def test_shape_validation():
    with pytest.raises(ValueError):
        LinearProgram([1.0, 2.0], [[1.0, 1.0, 1.0]], [1.0])
    with pytest.raises(ValueError):
        LinearProgram([1.0], [[1.0]], [np.inf])


def test_infeasible_and_unbounded():
    assert solve_max(LinearProgram([1.0, 1.0], [[1.0, 1.0], [1.0, 1.0]], [1.0, 2.0])).status == "infeasible"
    assert solve_max(LinearProgram([1.0, 0.0], [[1.0, -1.0]], [0.0])).status == "unbounded"


def test_negative_rhs():
    sol = solve_max(LinearProgram([-1.0, -1.0], [[-1.0, -2.0]], [-2.0]))
    assert sol.objective_value == pytest.approx(-1.0)


def test_half_weights_value():
    _, lp = _polytope_lp(0.25, [0.5, 0.5])
    assert solve_max(lp).objective_value == pytest.approx(0.3125, abs=1e-12)


@pytest.mark.parametrize("eps", [0.1, 0.25, 0.4])
def test_redundant_row_does_not_matter(eps):
    for alpha in ([1, 0], [0.3, 0.7], [0.5, 0.5], [0.9, 0.1]):
        _, full = _polytope_lp(eps, alpha)
        _, dropped = _polytope_lp(eps, alpha, drop=True)
        a, b = solve_max(full), solve_max(dropped)
        assert abs(a.objective_value - b.objective_value) <= 1e-10
        assert abs(a.objective_value - lp_max_by_enumeration(ChannelParams.symmetric(eps), alpha)) <= 1e-9


def test_solution_properties():
    poly, lp = _polytope_lp(0.3, [0.4, 0.6])
    sol = solve_max(lp)
    assert np.max(np.abs(poly.A @ sol.x - poly.b)) <= 1e-9
    assert sol.x.min() >= 0
    assert np.count_nonzero(sol.x > 0) <= np.linalg.matrix_rank(poly.A)


def test_invariance_under_permutation_and_scaling():
    rng = np.random.default_rng(0)
    poly, lp = _polytope_lp(0.2, [0.35, 0.65])
    base = solve_max(lp).objective_value
    rows = rng.permutation(lp.eq_matrix.shape[0])
    cols = rng.permutation(lp.n)
    permuted = LinearProgram(lp.objective[cols] * 3.0, lp.eq_matrix[rows][:, cols], lp.eq_rhs[rows])
    assert solve_max(permuted).objective_value / 3.0 == pytest.approx(base, abs=1e-10)


def test_weak_duality_against_feasible_points():
    from switchover.mdp import occupancy_from_table
    from switchover.policies import SIX_CORNER_TABLES

    p = ChannelParams.symmetric(0.2)
    poly, lp = _polytope_lp(0.2, [0.6, 0.4])
    best = solve_max(lp).objective_value
    for table in SIX_CORNER_TABLES.values():
        x = occupancy_from_table(p, 2, table)
        assert lp.objective @ x <= best + 1e-9


def test_deterministic():
    _, lp = _polytope_lp(0.4, [0.5, 0.5])
    a, b = solve_max(lp), solve_max(lp)
    assert np.array_equal(a.x, b.x)


def test_larger_polytopes_stay_feasible():
    rng = np.random.default_rng(4)
    p = ChannelParams(0.3, 0.2)
    for n in (3, 4):
        poly = build_polytope(p, n)
        for _ in range(5):
            alpha = rng.dirichlet(np.ones(n))
            sol = solve_max(LinearProgram(poly.objective(alpha), *poly.equalities(True)))
            assert sol.status == "optimal"
            assert np.max(np.abs(poly.A @ sol.x - poly.b)) <= 1e-9
            assert rates_from_x(sol.x, n).max() <= p.p01 / (p.p01 + p.p10) + 1e-9


def test_dedupe():
    a = LpSolution("optimal", x=np.array([1.0, 0.0]))
    b = LpSolution("optimal", x=np.array([1.0 + 1e-11, 0.0]))
    c = LpSolution("optimal", x=np.array([0.0, 1.0]))
    assert dedupe_vertices([a, b, c], 1e-9) == [a, c]
    assert dedupe_vertices([], 1e-9) == []


def test_dedupe_two_corners_at_high_eps():
    p = ChannelParams.symmetric(0.4)
    poly = build_polytope(p, 2)
    # Q2/Q1 above 1.32 selects b0, between 1 and 1.32 selects b1
    sols = [solve_max(LinearProgram(poly.objective(a), poly.A, poly.b)) for a in ([0.2, 0.8], [0.3, 0.7], [0.45, 0.55])]
    assert len(dedupe_vertices(sols[:2], 1e-9)) == 1
    kept = dedupe_vertices(sols, 1e-9)
    assert len(kept) == 2
    np.testing.assert_allclose(rates_from_x(kept[0].x, 2), [0, 0.5], atol=1e-12)
    np.testing.assert_allclose(rates_from_x(kept[1].x, 2), [0.20625, 0.34375], atol=1e-12)
