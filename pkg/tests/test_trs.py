import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ckmplace.trs import TrsProblem, cauchy_point, make_feasible, project, solve_trs, truncated_cg


def problem(g, G=None, delta=1.0, lower=None, upper=None, center=None):
    g = np.asarray(g, dtype=float)
    n = g.size
    G = np.zeros((n, n)) if G is None else np.asarray(G, dtype=float)
    center = np.zeros(n) if center is None else center
    lower = np.full(n, -1e6) if lower is None else lower
    upper = np.full(n, 1e6) if upper is None else upper
    return TrsProblem(g, G, center, delta, lower, upper)


def random_problem(rng, n):
    A = rng.standard_normal((n, n))
    G = A + A.T
    g = rng.standard_normal(n)
    center = rng.uniform(-1, 1, n)
    return TrsProblem(g, G, center, rng.uniform(0.2, 2.0), -np.ones(n) * 1.5, np.ones(n) * 1.5)


def feasible(p, s, tol=1e-9):
    return np.linalg.norm(s) <= p.delta * (1 + tol) and np.all(p.center + s >= p.lower - tol) and np.all(
        p.center + s <= p.upper + tol
    )


def test_zero_model_gives_zero_step():
    s = solve_trs(problem([0.0, 0.0]))
    np.testing.assert_array_equal(s, 0.0)
    np.testing.assert_array_equal(cauchy_point(problem([0.0, 0.0])), 0.0)


def test_linear_model_on_ball():
    p = problem([1.0, 0.0], delta=2.0)
    s = solve_trs(p, seed=0)
    np.testing.assert_allclose(s, [2.0, 0.0], atol=1e-9)
    assert p.gain(s) == pytest.approx(2.0)
    np.testing.assert_allclose(cauchy_point(p), [2.0, 0.0], atol=1e-12)


def test_linear_model_with_box_face():
    p = problem([1.0, 0.0], delta=2.0, lower=np.array([-5.0, -5.0]), upper=np.array([0.5, 5.0]))
    s = solve_trs(p, seed=0)
    assert s[0] == pytest.approx(0.5, abs=1e-9)
    assert p.gain(s) == pytest.approx(0.5, abs=1e-9)


def test_linear_cauchy_matches_closed_form_in_any_direction():
    rng = np.random.default_rng(0)
    for _ in range(20):
        g = rng.standard_normal(4)
        p = problem(g, delta=1.7)
        np.testing.assert_allclose(cauchy_point(p), 1.7 * g / np.linalg.norm(g), atol=1e-12)
        assert p.gain(solve_trs(p, seed=1)) == pytest.approx(1.7 * np.linalg.norm(g), rel=1e-9)


def test_concave_1d_cauchy_interior():
    p = problem([1.0], G=[[-1.0]], delta=10.0)
    np.testing.assert_allclose(cauchy_point(p), [1.0])
    np.testing.assert_allclose(solve_trs(p, seed=0), [1.0], atol=1e-9)


def test_negative_curvature_reaches_boundary():
    # saddle: best steps lie on the ball along +-y
    p = problem([0.0, 0.0], G=[[-1.0, 0.0], [0.0, 2.0]], delta=1.5)
    s = solve_trs(p, seed=0)
    assert np.linalg.norm(s) == pytest.approx(1.5, rel=1e-9)
    assert p.gain(s) == pytest.approx(0.5 * 2.0 * 1.5**2, rel=1e-6)


def test_truncated_cg_respects_box():
    p = problem([1.0, 1.0], G=[[0.5, 0.0], [0.0, 0.5]], delta=3.0, lower=np.array([-1.0, -1.0]), upper=np.array([0.3, 10.0]))
    s = truncated_cg(p)
    assert feasible(p, s)
    assert s[0] == pytest.approx(0.3)


def test_center_on_box_corner():
    p = problem([-1.0, -1.0], delta=1.0, lower=np.zeros(2), upper=np.ones(2), center=np.zeros(2))
    np.testing.assert_array_equal(solve_trs(p, seed=0), 0.0)


def test_projection_matches_constrained_oracle():
    # projection onto ball-box intersection: compare against a dense grid in 2-D
    rng = np.random.default_rng(4)
    lo, hi = np.array([-0.4, -2.0]), np.array([1.5, 0.7])
    p = TrsProblem(np.zeros(2), np.zeros((2, 2)), np.zeros(2), 1.0, lo, hi)
    grid = np.stack(np.meshgrid(np.linspace(-0.4, 1.0, 701), np.linspace(-1.0, 0.7, 851)), -1).reshape(-1, 2)
    grid = grid[np.linalg.norm(grid, axis=1) <= 1.0]
    for x in rng.uniform(-3, 3, (25, 2)):
        y = project(p, x)[0]
        assert feasible(p, y)
        best = np.min(np.linalg.norm(grid - x, axis=1))
        assert np.linalg.norm(y - x) <= best + 1e-9


def test_seed_reproducible():
    rng = np.random.default_rng(9)
    p = random_problem(rng, 4)
    np.testing.assert_array_equal(solve_trs(p, seed=[1, 2]), solve_trs(p, seed=[1, 2]))


def test_invalid_radius():
    with pytest.raises(ValueError):
        problem([1.0], delta=0.0)


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([2, 4, 6]))
def test_feasible_and_dominates_cauchy(seed, n):
    p = random_problem(np.random.default_rng(seed), n)
    s = solve_trs(p, seed=seed)
    c = cauchy_point(p)
    assert feasible(p, s)
    assert feasible(p, c)
    assert p.gain(s) >= p.gain(c) - 1e-12
    assert p.gain(s) >= -1e-15


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=3, max_size=3), st.floats(0.1, 3.0))
def test_make_feasible_output_is_feasible(x, delta):
    p = problem([1.0, 1.0, 1.0], delta=delta, lower=-np.ones(3), upper=np.array([0.5, 2.0, 1.0]))
    assert feasible(p, make_feasible(p, np.array(x)))
