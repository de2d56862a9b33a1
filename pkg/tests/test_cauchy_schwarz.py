import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ictqkd.cauchy_schwarz import (
    g_bounds,
    g_slopes,
    linearize_cs,
    reference_error_yield,
    reference_yield,
)

unit = st.floats(0.0, 1.0)


def random_instance(rng):
    """Two random qubit pure states and a random operator 0 <= O <= 1."""
    a = rng.normal(size=2) + 1j * rng.normal(size=2)
    b = rng.normal(size=2) + 1j * rng.normal(size=2)
    a /= np.linalg.norm(a)
    b /= np.linalg.norm(b)
    h = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    h = h + h.conj().T
    w, v = np.linalg.eigh(h)
    O = v @ np.diag(rng.uniform(0, 1, 2)) @ v.conj().T
    x = float(np.real(a.conj() @ O @ a))
    target = float(np.real(b.conj() @ O @ b))
    overlap = float(abs(a.conj() @ b) ** 2)
    return min(max(x, 0.0), 1.0), min(max(overlap, 0.0), 1.0), target


def test_envelope_sandwich_random_states():
    rng = np.random.default_rng(11)
    for _ in range(2000):
        x, y, target = random_instance(rng)
        lo, hi = g_bounds(x, y)
        assert lo - 1e-10 <= target <= hi + 1e-10


def test_examples():
    assert g_bounds(0.37, 1.0) == pytest.approx((0.37, 0.37))
    assert g_bounds(0.37, 0.0) == (0.0, 1.0)
    lo, hi = g_bounds(0.3, 0.9)
    assert lo == pytest.approx(0.065045, abs=1e-6)
    assert hi == pytest.approx(0.614955, abs=1e-6)
    with pytest.raises(ValueError):
        g_bounds(1.2, 0.5)


def test_brute_force_envelope_values():
    """Optimize Tr[O b] over real qubit operators with Tr[O a] = 0.3 and overlap 0.9."""
    x, y = 0.3, 0.9
    a = np.array([1.0, 0.0])
    b = np.array([math.sqrt(y), math.sqrt(1 - y)])
    best_lo, best_hi = 1.0, 0.0
    for theta in np.linspace(0, math.pi, 1801):
        phi = np.array([math.cos(theta), math.sin(theta)])
        perp = np.array([-math.sin(theta), math.cos(theta)])
        ca, sa = (phi @ a) ** 2, (perp @ a) ** 2
        for lam1 in np.linspace(0, 1, 401):
            if sa < 1e-12:
                continue
            lam2 = (x - lam1 * ca) / sa
            if not 0 <= lam2 <= 1:
                continue
            val = lam1 * (phi @ b) ** 2 + lam2 * (perp @ b) ** 2
            best_lo, best_hi = min(best_lo, val), max(best_hi, val)
    lo, hi = g_bounds(x, y)
    assert lo <= best_lo + 1e-12 and best_lo - lo < 2e-4
    assert hi >= best_hi - 1e-12 and hi - best_hi < 2e-4


def test_slopes_examples():
    assert g_slopes(0.4, 1.0) == (1.0, 1.0)
    assert g_slopes(0.4, 0.0)[1] == 0.0
    h = 1e-6
    for x, y in [(0.3, 0.9), (0.5, 0.7), (0.8, 0.95)]:
        s_lo, s_hi = g_slopes(x, y)
        fd_lo = (g_bounds(x + h, y)[0] - g_bounds(x - h, y)[0]) / (2 * h)
        fd_hi = (g_bounds(x + h, y)[1] - g_bounds(x - h, y)[1]) / (2 * h)
        assert abs(s_lo - fd_lo) <= 1e-6 and abs(s_hi - fd_hi) <= 1e-6


@given(st.floats(0.0, 1.0))
def test_continuity_at_thresholds(y):
    for x in (1 - y, y):
        if not 0 <= x <= 1:
            continue
        for branch in (0, 1):
            left = g_bounds(max(0.0, x - 1e-13), y)[branch]
            right = g_bounds(min(1.0, x + 1e-13), y)[branch]
            assert abs(left - right) <= 1e-6
        lo, hi = g_bounds(x, y)
        base = x + (1 - 2 * x) * (1 - y)
        root = 2 * math.sqrt(max(x * (1 - x) * y * (1 - y), 0.0))
        if x == 1 - y:
            assert abs(lo - max(base - root, 0.0)) <= 1e-12
        if x == y:
            assert abs(hi - min(base + root, 1.0)) <= 1e-12


def test_linearize_examples():
    t = linearize_cs(0.4, 1.0)
    assert (t.c_minus, t.m_minus, t.c_plus, t.m_plus) == pytest.approx((0, 1, 0, 1), abs=1e-15)
    t = linearize_cs(0.4, 0.0)
    assert (t.c_plus, t.m_plus, t.c_minus, t.m_minus) == (1.0, 0.0, 0.0, 0.0)
    t = linearize_cs(0.0, 0.5)
    assert (t.c_plus, t.m_plus) == (1.0, 0.0)


@given(st.floats(0.0, 1.0), unit)
def test_tangency(ref, tau):
    t = linearize_cs(ref, tau)
    lo, hi = g_bounds(ref, tau)
    s_lo, s_hi = g_slopes(ref, tau)
    # intercept form cancels near the steep ends; allow its rounding error
    eps = np.finfo(float).eps
    if math.isfinite(s_lo):
        tol = 1e-12 + 8 * eps * (abs(t.c_minus) + abs(t.m_minus) * ref)
        assert abs(t.lower(ref) - lo) <= tol
    if math.isfinite(s_hi):
        tol = 1e-12 + 8 * eps * (abs(t.c_plus) + abs(t.m_plus) * ref)
        assert abs(t.upper(ref) - hi) <= tol


GRID = np.linspace(0, 1, 1001)


def _dominates(ref, tau):
    t = linearize_cs(ref, tau)
    for x in GRID:
        lo, hi = g_bounds(float(x), tau)
        assert t.upper(x) >= hi - 1e-10
        assert t.lower(x) <= lo + 1e-10


def test_grid_dominance_example():
    _dominates(0.2, 0.99)


@given(unit, unit)
def test_grid_dominance_random(ref, tau):
    _dominates(ref, tau)


def test_reference_yield_examples():
    assert reference_yield(0, 0.3, 1e-3) == pytest.approx(1 - (1 - 1e-3) ** 2)
    assert reference_yield(1, 0.3, 0.0) == pytest.approx(0.3)
    val = reference_yield(2, 0.1, 4.2e-6)
    assert val == pytest.approx(0.19 + (1 - 0.19) * (1 - (1 - 4.2e-6) ** 2), rel=1e-12)


def test_reference_yield_monte_carlo():
    rng = np.random.default_rng(3)
    n, eta, p_d, trials = 2, 0.1, 4.2e-6, 2_000_000
    photons = rng.binomial(n, eta, trials)
    darks = rng.random((trials, 2)) < p_d
    clicks = (photons > 0) | darks.any(axis=1)
    est = clicks.mean()
    sigma = math.sqrt(est * (1 - est) / trials)
    assert abs(est - reference_yield(n, eta, p_d)) <= 4 * sigma


def test_reference_error_yield_examples():
    p_d = 1e-3
    assert reference_error_yield(0, 0.3, p_d, 0.08) == pytest.approx(p_d * (1 - p_d) + p_d**2 / 2)
    for n in range(5):
        assert reference_error_yield(n, 0.4, 0.0, 0.0) == pytest.approx(0.0, abs=1e-15)


def test_reference_error_yield_monte_carlo():
    """Two-detector simulation with random assignment of double clicks."""
    rng = np.random.default_rng(5)
    n, eta, delta, p_d, trials = 1, 0.05, 0.08, 4.2e-6, 4_000_000
    detected = rng.binomial(n, eta, trials)
    to_err = rng.binomial(detected, math.sin(delta) ** 2)
    to_cor = detected - to_err
    cor = (to_cor > 0) | (rng.random(trials) < p_d)
    err = (to_err > 0) | (rng.random(trials) < p_d)
    coin = rng.random(trials) < 0.5
    error = (err & ~cor) | (err & cor & coin)
    est = error.mean()
    sigma = math.sqrt(est * (1 - est) / trials)
    assert abs(est - reference_error_yield(n, eta, p_d, delta)) <= 3 * sigma + 1e-12
