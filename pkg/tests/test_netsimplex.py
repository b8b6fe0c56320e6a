import numpy as np
import pytest
import scipy.optimize
from hypothesis import given, settings, strategies as st

from lqot.errors import Infeasible, NumericalStall
from lqot.netsimplex import transport_simplex


def highs_value(C, a, b):
    n, m = C.shape
    A_eq = np.vstack([np.kron(np.eye(n), np.ones(m)), np.kron(np.ones(n), np.eye(m))])
    res = scipy.optimize.linprog(C.ravel(), A_eq=A_eq, b_eq=np.concatenate([a, b]), method="highs")
    assert res.status == 0
    return res.fun


def check_solution(C, a, b, rows, cols, masses, u, v):
    X = np.zeros(C.shape)
    X[rows, cols] = masses
    assert np.abs(X.sum(1) - a).max() <= 1e-12 and np.abs(X.sum(0) - b).max() <= 1e-12
    assert (masses > 0).all()
    scale = 1.0 + np.abs(C).max()
    assert (v[None, :] - u[:, None] - C).max() <= 1e-9 * scale
    assert np.abs(C[rows, cols] - (v[cols] - u[rows])).max() <= 1e-9 * scale
    primal = float(np.sum(masses * C[rows, cols]))
    assert abs(primal - (v @ b - u @ a)) <= 1e-9 * scale
    return primal


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 9), st.integers(1, 9), st.sampled_from(["real", "integer", "uniform"]))
def test_matches_highs(seed, n, m, kind):
    rng = np.random.default_rng(seed)
    if kind == "integer":
        C = rng.integers(0, 4, (n, m)).astype(float)
    else:
        C = rng.standard_normal((n, m)) * 3
    if kind == "uniform":
        a, b = np.full(n, 1.0 / n), np.full(m, 1.0 / m)
    else:
        a, b = rng.random(n) + 0.01, rng.random(m) + 0.01
        a /= a.sum()
        b /= b.sum()
    out = transport_simplex(C, a, b)
    primal = check_solution(C, a, b, *out[:5])
    assert primal == pytest.approx(highs_value(C, a, b), abs=1e-9 * (1 + np.abs(C).max()))


def test_degenerate_square_assignment():
    # identical rows and columns make every pivot degenerate
    C = np.ones((6, 6))
    a = b = np.full(6, 1 / 6)
    rows, cols, masses, u, v, _ = transport_simplex(C, a, b)
    assert check_solution(C, a, b, rows, cols, masses, u, v) == pytest.approx(1.0)


def test_deterministic():
    rng = np.random.default_rng(3)
    C = rng.integers(0, 3, (30, 30)).astype(float)
    a = b = np.full(30, 1 / 30)
    first = transport_simplex(C, a, b)
    second = transport_simplex(C, a, b)
    for x, y in zip(first[:5], second[:5]):
        assert np.array_equal(x, y)


def test_unbalanced_is_infeasible():
    with pytest.raises(Infeasible):
        transport_simplex(np.zeros((2, 2)), np.array([0.5, 0.5]), np.array([0.7, 0.7]))


def test_pivot_budget():
    rng = np.random.default_rng(0)
    C = rng.random((20, 20))
    with pytest.raises(NumericalStall) as exc:
        transport_simplex(C, np.full(20, 0.05), np.full(20, 0.05), max_pivots=2)
    assert exc.value.diagnostics["pivots"] == 3


def test_large_instance_marginals():
    rng = np.random.default_rng(11)
    n = 1000
    C = rng.random((n, n))
    a = rng.random(n) + 0.1
    a /= a.sum()
    b = rng.random(n) + 0.1
    b /= b.sum()
    rows, cols, masses, u, v, _ = transport_simplex(C, a, b)
    assert np.abs(np.bincount(rows, masses, n) - a).max() <= 1e-10
    assert np.abs(np.bincount(cols, masses, n) - b).max() <= 1e-10
    assert (v[None, :] - u[:, None] - C).max() <= 1e-9
