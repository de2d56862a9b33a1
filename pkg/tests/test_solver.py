import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helpers import make_scenario, scenario_lps
from ictqkd.decoy_lp import LinearProgram
from ictqkd.solver import (
    INFEASIBLE,
    OPTIMAL,
    UNBOUNDED,
    HighsSolver,
    NonConvergenceError,
    SimplexSolver,
    get_solver,
    solve_lp,
)


def lp_from(c, rows, sense="min", lower=None, upper=None):
    lp = LinearProgram([f"x{i}" for i in range(len(c))], objective=np.array(c, float), sense=sense,
                       lower=lower, upper=upper)
    for coeffs, rel, rhs in rows:
        lp.add(dict(enumerate(coeffs)), rel, rhs)
    return lp


def test_trivial_examples():
    lp = lp_from([1.0], [([1.0], "<=", 1.0)], sense="max", upper=np.array([np.inf]))
    sol = solve_lp(lp)
    assert sol.status == OPTIMAL and sol.objective == pytest.approx(1.0)
    lp = lp_from([1.0], [([1.0], ">=", 2.0), ([1.0], "<=", 1.0)], upper=np.array([np.inf]))
    assert solve_lp(lp).status == INFEASIBLE


def test_unbounded():
    lp = lp_from([1.0, 1.0], [([1.0, -1.0], "<=", 1.0)], sense="max", upper=np.array([np.inf, np.inf]))
    assert solve_lp(lp).status == UNBOUNDED


def test_equality_rows_and_shifted_bounds():
    lp = lp_from([1.0, 2.0], [([1.0, 1.0], "=", 3.0)], lower=np.array([0.5, 1.0]), upper=np.array([5.0, 5.0]))
    sol = solve_lp(lp)
    assert sol.objective == pytest.approx(2.0 + 2.0)
    assert sol.values == pytest.approx([2.0, 1.0])


def test_beale_cycling_example():
    """A classic degenerate LP on which Dantzig's rule cycles without safeguards."""
    c = [-0.75, 150, -0.02, 6]
    rows = [
        ([0.25, -60, -0.04, 9], "<=", 0.0),
        ([0.5, -90, -0.02, 3], "<=", 0.0),
        ([0, 0, 1, 0], "<=", 1.0),
    ]
    lp = lp_from(c, rows, upper=np.full(4, np.inf))
    sol = solve_lp(lp)
    assert sol.status == OPTIMAL and sol.objective == pytest.approx(-0.05)


def test_iteration_cap_raises():
    lp, *_ = scenario_lps(make_scenario(xi=1, delta=1e-2))
    with pytest.raises(NonConvergenceError):
        SimplexSolver(max_iter=2).solve(lp)


def test_get_solver():
    assert isinstance(get_solver("highs"), HighsSolver)
    with pytest.raises(ValueError):
        get_solver("cplex")


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.integers(2, 6), st.integers(1, 8), st.sampled_from(["min", "max"]))
def test_random_lps_match_highs(seed, n, m, sense):
    rng = np.random.default_rng(seed)
    rows = []
    for _ in range(m):
        rel = rng.choice(["<=", ">=", "="], p=[0.5, 0.35, 0.15])
        rows.append((rng.normal(size=n) * (rng.random(n) < 0.7), str(rel), float(rng.normal())))
    lp = lp_from(rng.normal(size=n), rows, sense=sense, lower=-rng.random(n), upper=rng.random(n) * 2)
    a, b = SimplexSolver().solve(lp), HighsSolver().solve(lp)
    assert a.status == b.status
    if a.optimal:
        assert a.objective == pytest.approx(b.objective, rel=1e-9, abs=1e-9)
        assert lp.is_feasible(a.values, 1e-9)


@pytest.mark.parametrize("xi", [1, 3])
@pytest.mark.parametrize("delta", [0.0, 1e-4, 1e-2])
@pytest.mark.parametrize("mode", ["worst-case", "monitor"])
def test_conformance_on_built_lps(xi, delta, mode):
    for distance in (0.0, 60.0, 120.0):
        sc = make_scenario(xi=xi, delta=delta, mode=mode, distance=distance)
        for lp in scenario_lps(sc):
            a, b = SimplexSolver().solve(lp), HighsSolver().solve(lp)
            assert a.optimal and b.optimal
            assert a.objective == pytest.approx(b.objective, rel=1e-9, abs=1e-13)
            assert lp.is_feasible(a.values, 1e-9)


def test_decomposition_is_transparent():
    lp, *_ = scenario_lps(make_scenario(xi=1, delta=1e-3))
    a = SimplexSolver(decompose=True).solve(lp)
    b = SimplexSolver(decompose=False).solve(lp)
    assert a.objective == pytest.approx(b.objective, rel=1e-10, abs=1e-15)
