import numpy as np
from hypothesis import given, settings, strategies as st

from disorder.simplex import SimplexGrid, normalize_rows


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4), st.integers(1, 12))
def test_linear_functions_reproduced(seed, dim, res):
    rng = np.random.default_rng(seed)
    grid = SimplexGrid(dim, res)
    coef = rng.normal(size=dim)
    d = rng.dirichlet(np.ones(dim), size=5)
    np.testing.assert_allclose(grid.interpolate(grid.points @ coef, d), d @ coef, atol=1e-12)


def test_grid_points_exact():
    grid = SimplexGrid(3, 5)
    vals = np.arange(len(grid), dtype=float)
    np.testing.assert_allclose(grid.interpolate(vals, grid.points), vals, atol=1e-12)
    np.testing.assert_allclose(grid.matrix(grid.points).toarray(), np.eye(len(grid)), atol=1e-12)


def test_normalize_rows_zero_row():
    dirs, mass = normalize_rows(np.array([[0.0, 0.0], [1.0, 3.0]]))
    np.testing.assert_allclose(dirs, [[0.5, 0.5], [0.25, 0.75]])
    np.testing.assert_allclose(mass, [0.0, 4.0])
