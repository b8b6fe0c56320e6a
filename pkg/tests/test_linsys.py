import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st

from lqot.errors import (
    MatrixExponentialOverflow,
    NonSymmetric,
    NotPositiveDefinite,
    NotPositiveSemidefinite,
    ShapeMismatch,
)
from lqot.linsys import (
    block_residual,
    controllability_subspace,
    kalman_decomposition,
    kalman_matrix,
    matrix_exponential,
    reachable_target,
    validate_system,
)

seeds = st.integers(0, 2**32 - 1)


def test_scalar_identity_system():
    sys_ = validate_system([[0]], [[1]], [[0]], [[1]])
    assert (sys_.n, sys_.m) == (1, 1)


def test_rejections_name_the_hypothesis():
    with pytest.raises(NotPositiveDefinite):
        validate_system([[0]], [[1]], [[0]], [[-1]])
    with pytest.raises(NonSymmetric) as exc:
        validate_system(np.zeros((2, 2)), np.eye(2), [[0, 1], [0, 0]], np.eye(2))
    assert exc.value.field == "W"
    with pytest.raises(NotPositiveSemidefinite):
        validate_system([[0]], [[1]], [[-1]], [[1]])
    with pytest.raises(ShapeMismatch):
        validate_system(np.zeros((2, 2)), np.eye(3), np.zeros((2, 2)), np.eye(3))


def test_system_arrays_are_read_only():
    sys_ = validate_system([[0]], [[1]], [[0]], [[1]])
    with pytest.raises(ValueError):
        sys_.A[0, 0] = 1.0


def test_controllability_examples():
    assert controllability_subspace(np.zeros((3, 3)), np.eye(3)).d == 3
    rep = controllability_subspace([[0, 1], [0, 0]], [[0], [1]])
    assert rep.d == 2 and rep.is_controllable
    rep = controllability_subspace(np.eye(2), [[1], [0]])
    assert rep.d == 1
    assert np.allclose(np.abs(rep.V_basis[:, 0]), [1, 0])


def test_kalman_axis_aligned_example():
    rep = kalman_decomposition(np.eye(2), [[1], [0]])
    assert np.allclose(rep.P, np.eye(2))
    assert np.allclose(rep.A1, [[1]]) and np.allclose(rep.A2, [[1]])
    assert np.allclose(rep.A3, [[0]]) and np.allclose(rep.B1, [[1]])


def test_kalman_controllable_and_zero_input():
    rep = kalman_decomposition([[0, 1], [0, 0]], [[0], [1]])
    assert rep.is_controllable and np.allclose(rep.P, np.eye(2)) and rep.A1 is None
    rep = kalman_decomposition(np.ones((2, 2)), np.zeros((2, 1)))
    assert rep.d == 0


def test_reachable_target_examples():
    A = np.eye(2)
    rep = controllability_subspace(A, [[1], [0]])
    assert reachable_target(A, rep, [0, 1], [0, np.e])
    assert not reachable_target(A, rep, [0, 1], [0, 0])
    rep_c = controllability_subspace(A, np.eye(2))
    assert reachable_target(A, rep_c, [3, -1], [0.2, 7])


def test_exponential_examples():
    assert np.array_equal(matrix_exponential(np.zeros((3, 3)), 2.5), np.eye(3))
    assert np.allclose(matrix_exponential([[0, 1], [0, 0]]), [[1, 1], [0, 1]], atol=1e-15)
    M = np.random.default_rng(0).standard_normal((4, 4))
    half = matrix_exponential(M, 0.5)
    assert np.abs(half @ half - matrix_exponential(M)).max() <= 1e-11 * np.abs(matrix_exponential(M)).max()


def test_exponential_against_taylor_series():
    # independent reference: long Taylor series after scaling by 2^-6, then squaring
    rng = np.random.default_rng(4)
    M = rng.standard_normal((4, 4))
    S = M / 64.0
    term = np.eye(4)
    acc = np.eye(4)
    for k in range(1, 30):
        term = term @ S / k
        acc = acc + term
    for _ in range(6):
        acc = acc @ acc
    ref = acc
    assert np.linalg.norm(matrix_exponential(M) - ref, 2) <= 1e-12 * np.linalg.norm(ref, 2) * 10


def test_exponential_batched_matches_loop():
    M = np.random.default_rng(1).standard_normal((3, 3))
    ts = np.linspace(0, 1, 5)
    batch = matrix_exponential(M, ts)
    for k, t in enumerate(ts):
        assert np.allclose(batch[k], scipy.linalg.expm(t * M), rtol=1e-13, atol=1e-14)


def test_exponential_overflow():
    with pytest.raises(MatrixExponentialOverflow):
        matrix_exponential(np.eye(2) * 1e4)


@settings(max_examples=40, deadline=None)
@given(seeds, st.floats(0, 1), st.floats(0, 1))
def test_semigroup(seed, s, t):
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((4, 4))
    M *= 10.0 / np.linalg.norm(M, 2) * rng.random()
    lhs = matrix_exponential(M, s + t)
    rhs = matrix_exponential(M, s) @ matrix_exponential(M, t)
    assert np.abs(lhs - rhs).max() <= 1e-10 * max(1.0, np.abs(lhs).max())


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_rank_monotone_and_basis_invariant(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 6))
    A = rng.standard_normal((n, n))
    # low-rank input so d < n is common
    B = rng.standard_normal((n, 1)) if rng.random() < 0.5 else np.zeros((n, 1))
    if n > 2 and rng.random() < 0.5:
        A[-1, :-1] = 0.0
        B[-1] = 0.0
    d = controllability_subspace(A, B).d
    extra = np.hstack([B, rng.standard_normal((n, 1))])
    assert controllability_subspace(A, extra).d >= d
    T = rng.standard_normal((2, 2)) + 3 * np.eye(2)
    assert controllability_subspace(A, extra @ T).d == controllability_subspace(A, extra).d


@settings(max_examples=40, deadline=None)
@given(seeds, st.integers(1, 3), st.integers(1, 3))
def test_decomposition_round_trip(seed, d, k):
    rng = np.random.default_rng(seed)
    A1 = rng.standard_normal((d, d))
    B1 = rng.standard_normal((d, 1))
    if controllability_subspace(A1, B1).d < d:
        return
    Ak = np.block([[A1, rng.standard_normal((d, k))], [np.zeros((k, d)), rng.standard_normal((k, k))]])
    Bk = np.vstack([B1, np.zeros((k, 1))])
    Q = np.linalg.qr(rng.standard_normal((d + k, d + k)))[0]
    A, B = Q @ Ak @ Q.T, Q @ Bk
    rep = kalman_decomposition(A, B)
    assert rep.d == d
    assert np.allclose(rep.V_basis.T @ rep.V_basis, np.eye(d), atol=1e-12)
    assert block_residual(A, B, rep) <= 1e-10 * max(1.0, np.abs(A).max())
    blocks = np.block([[rep.A1, rep.A3], [np.zeros((k, d)), rep.A2]])
    assert np.abs(rep.P.T @ blocks @ rep.P - A).max() <= 1e-10 * max(1.0, np.abs(A).max())
    assert np.linalg.matrix_rank(kalman_matrix(rep.A1, rep.B1)) == d
