import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st

from instances import random_controllable, random_spd
from lqot.errors import NotControllable, PreconditionViolated
from lqot.linsys import validate_system
from lqot.lqcost import (
    cost_gradient_x,
    cost_matrices,
    eval_cost,
    fundamental_solution,
    grammian_cost,
    hamiltonian_matrix,
    initial_adjoint,
    optimal_trajectory,
    pairwise_cost,
    symplectic_form,
)
from lqot.oracle import min_cost_piecewise

seeds = st.integers(0, 2**32 - 1)


def euclid(n):
    return validate_system(np.zeros((n, n)), np.eye(n), np.zeros((n, n)), np.eye(n))


DOUBLE = validate_system([[0, 1], [0, 0]], [[0], [1]], np.zeros((2, 2)), [[1]])


def test_hamiltonian_examples():
    assert np.array_equal(hamiltonian_matrix(euclid(1)), [[0, 1], [0, 0]])
    s = validate_system([[0]], [[1]], [[1]], [[1]])
    assert np.array_equal(hamiltonian_matrix(s), [[0, 1], [1, 0]])
    sys_, _ = random_controllable(np.random.default_rng(3))
    JM = symplectic_form(sys_.n) @ hamiltonian_matrix(sys_)
    assert np.allclose(JM, JM.T, atol=1e-14)


def test_fundamental_solution_examples():
    n = 3
    R1, R2, R3, R4 = fundamental_solution(euclid(n), 0.0)
    assert np.array_equal(R1, np.eye(n)) and not R2.any() and not R3.any() and np.array_equal(R4, np.eye(n))
    R1, R2, R3, R4 = fundamental_solution(euclid(n), 0.7)
    assert np.allclose(R1, np.eye(n)) and np.allclose(R2, 0.7 * np.eye(n)) and np.allclose(R4, np.eye(n))
    W = random_spd(np.random.default_rng(0), n)
    s = validate_system(np.zeros((n, n)), np.eye(n), W, np.eye(n))
    R1, R2, _, _ = fundamental_solution(s, 0.6)
    r = scipy.linalg.sqrtm(W).real
    assert np.allclose(R1, scipy.linalg.coshm(0.6 * r), atol=1e-12)
    assert np.allclose(R2, scipy.linalg.sinhm(0.6 * r) @ np.linalg.inv(r), atol=1e-12)


def test_euclidean_cost():
    model = cost_matrices(euclid(2))
    for M in (model.D, model.E, model.F):
        assert np.allclose(M, np.eye(2), atol=1e-12)
    assert eval_cost(model, [1, 0], [0, 1]) == pytest.approx(1.0, abs=1e-12)
    assert eval_cost(model, [0, 0], [0, 0]) == 0.0


def test_scalar_hyperbolic_cost():
    model = cost_matrices(validate_system([[0]], [[1]], [[1]], [[1]]))
    assert model.D[0, 0] == pytest.approx(1 / np.tanh(1.0), rel=1e-12)
    assert model.E[0, 0] == pytest.approx(1 / np.sinh(1.0), rel=1e-12)


def test_not_controllable():
    with pytest.raises(NotControllable):
        cost_matrices(validate_system(np.eye(2), np.zeros((2, 1)), np.zeros((2, 2)), [[1]]))


def test_double_integrator_value_and_control():
    model = cost_matrices(DOUBLE)
    assert eval_cost(model, [0, 0], [1, 0]) == pytest.approx(6.0, abs=1e-8)
    tr = optimal_trajectory(DOUBLE, model, np.zeros(2), np.array([1.0, 0.0]), 2000)
    assert np.abs(tr.controls[:, 0] - (6 - 12 * tr.times)).max() <= 1e-6
    assert tr.running_cost == pytest.approx(6.0, rel=1e-9)
    assert grammian_cost(DOUBLE, [0, 0], [1, 0]) == pytest.approx(6.0, rel=1e-10)


def test_initial_adjoint_examples():
    model = cost_matrices(euclid(3))
    assert not initial_adjoint(model, np.zeros(3), np.zeros(3)).any()
    x, y = np.array([1.0, 2, 3]), np.array([-1.0, 0, 4])
    assert np.allclose(initial_adjoint(model, x, y), y - x)


def test_euclidean_trajectory_is_straight():
    sys_ = euclid(2)
    model = cost_matrices(sys_)
    x, y = np.array([1.0, -1]), np.array([0.5, 2])
    tr = optimal_trajectory(sys_, model, x, y, 10)
    assert np.allclose(tr.states, x + tr.times[:, None] * (y - x), atol=1e-14)
    assert np.allclose(tr.controls, y - x, atol=1e-14)
    zero = optimal_trajectory(sys_, model, np.zeros(2), np.zeros(2), 4)
    assert not zero.states.any() and zero.running_cost == 0.0


def test_trajectory_needs_two_intervals():
    with pytest.raises(PreconditionViolated):
        optimal_trajectory(DOUBLE, cost_matrices(DOUBLE), np.zeros(2), np.ones(2), 1)


def test_grammian_examples():
    assert grammian_cost(euclid(2), [0, 0], [3, 4]) == pytest.approx(12.5, rel=1e-12)
    assert grammian_cost(euclid(2), [1, 1], [1, 1]) == 0.0
    with pytest.raises(PreconditionViolated):
        grammian_cost(validate_system([[0]], [[1]], [[1]], [[1]]), [0], [1])


def test_pairwise_matches_pointwise():
    sys_, model = random_controllable(np.random.default_rng(9), n=3)
    rng = np.random.default_rng(1)
    X, Y = rng.standard_normal((4, 3)), rng.standard_normal((5, 3))
    C = pairwise_cost(model, X, Y)
    for i in range(4):
        for j in range(5):
            assert C[i, j] == pytest.approx(eval_cost(model, X[i], Y[j]), rel=1e-12, abs=1e-14)


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_model_invariants(seed):
    rng = np.random.default_rng(seed)
    sys_, model = random_controllable(rng)
    n = sys_.n
    assert model.residuals["C"] <= 1e-9 and model.residuals["Q1"] <= 1e-9
    assert np.linalg.eigvalsh(model.D).min() > 0 and np.linalg.eigvalsh(model.F).min() > 0
    assert np.allclose(model.D, model.D.T) and np.allclose(model.F, model.F.T)
    J = symplectic_form(n)
    for t in (0.25, 0.5, 0.75, 1.0):
        R = np.block([list(fundamental_solution(sys_, t)[:2]), list(fundamental_solution(sys_, t)[2:])])
        assert np.abs(R.T @ J @ R - J).max() <= 1e-10 * max(1.0, np.abs(R).max() ** 2)


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_adjoint_is_negative_gradient(seed):
    rng = np.random.default_rng(seed)
    sys_, model = random_controllable(rng)
    x, y = rng.standard_normal(sys_.n), rng.standard_normal(sys_.n)
    p0 = initial_adjoint(model, x, y)
    assert np.abs(model.R1 @ x + model.R2 @ p0 - y).max() <= 1e-10 * max(1.0, np.abs(y).max()) * model.cond_E
    assert np.abs(p0 + cost_gradient_x(model, x, y)).max() <= 1e-9 * max(1.0, np.abs(p0).max())
    h = 1e-5
    fd = np.array([
        (eval_cost(model, x + h * e, y) - eval_cost(model, x - h * e, y)) / (2 * h) for e in np.eye(sys_.n)
    ])
    assert np.abs(fd + p0).max() <= 1e-6 * max(1.0, np.abs(p0).max())


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_cost_is_a_lower_bound_for_piecewise_controls(seed):
    rng = np.random.default_rng(seed)
    sys_, model = random_controllable(rng, n=int(rng.integers(1, 4)))
    x, y = rng.standard_normal(sys_.n), rng.standard_normal(sys_.n)
    c = eval_cost(model, x, y)
    gaps = [min_cost_piecewise(sys_, x, y, K)[0] - c for K in (4, 16, 64)]
    assert min(gaps) >= -1e-8 * max(1.0, c)
    assert gaps[0] >= gaps[1] - 1e-9 * max(1.0, c) >= gaps[2] - 2e-9 * max(1.0, c)


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_cost_non_negative(seed):
    rng = np.random.default_rng(seed)
    sys_, model = random_controllable(rng)
    x, y = rng.standard_normal(sys_.n), rng.standard_normal(sys_.n)
    assert eval_cost(model, x, y) >= -1e-12 * (1 + x @ x + y @ y)
    assert eval_cost(model, x, np.asarray(scipy.linalg.expm(sys_.A) @ x)) >= 0.0


def test_relation_check_catches_corrupted_integrals(monkeypatch):
    import lqot.lqcost as lq
    from lqot.errors import ConsistencyFailure

    real = lq.flow_integrals

    def corrupted(M, weight, **kw):
        K = real(M, weight, **kw)
        return K * (1.0 + 1e-7)

    sys_, _ = random_controllable(np.random.default_rng(5), n=3)
    monkeypatch.setattr(lq, "flow_integrals", corrupted)
    with pytest.raises(ConsistencyFailure):
        lq.cost_matrices(sys_)
