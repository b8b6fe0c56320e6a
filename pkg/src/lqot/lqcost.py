"""Closed-form transport cost of a controllable linear-quadratic problem.

The cost is the value function

    c(x, y) = inf { int_0^1 L(x(t), u(t)) dt : x(0) = x, x(1) = y }

which, for a controllable pair, is the quadratic form
``1/2 <x, D x> - <x, E y> + 1/2 <y, F y>``. The matrices come from the
fundamental solution ``R(t) = e^{tM}`` of the state/adjoint system with
Hamiltonian matrix ``M = [[A, B U^-1 B^T], [W, -A^T]]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.integrate

from . import quadrature
from .errors import (
    ConsistencyFailure,
    IllConditioned,
    NotControllable,
    PreconditionViolated,
)
from .linsys import LinearQuadraticSystem, controllability_subspace, matrix_exponential

COND_LIMIT = 1e12
TOL_RELATION = 1e-9
TOL_SYMMETRY = 1e-10


def hamiltonian_matrix(sys: LinearQuadraticSystem) -> np.ndarray:
    """``[[A, B U^-1 B^T], [W, -A^T]]``."""
    A = sys.A
    return np.block([[A, sys.control_gain], [sys.W, -A.T]])


def symplectic_form(n: int) -> np.ndarray:
    I = np.eye(n)
    Z = np.zeros((n, n))
    return np.block([[Z, I], [-I, Z]])


def split_blocks(R, n):
    return R[..., :n, :n], R[..., :n, n:], R[..., n:, :n], R[..., n:, n:]


def fundamental_solution(sys: LinearQuadraticSystem, t: float):
    """Blocks ``(R1, R2, R3, R4)`` of ``R(t) = e^{tM}``."""
    R = matrix_exponential(hamiltonian_matrix(sys), t)
    return split_blocks(R, sys.n)


@dataclass(frozen=True)
class CostModel:
    """Matrices of the quadratic cost together with the intermediate integrals.

    ``Q1``, ``Q2`` and ``C`` are the time integrals of the running cost along
    the Hamiltonian flow; ``residuals`` records how well the identities linking
    them to ``R(1)`` hold numerically.
    """

    D: np.ndarray
    E: np.ndarray
    F: np.ndarray
    R1: np.ndarray
    R2: np.ndarray
    R3: np.ndarray
    R4: np.ndarray
    Q1: np.ndarray
    Q2: np.ndarray
    C: np.ndarray
    cond_E: float
    residuals: dict = field(default_factory=dict)
    horizon: float = 1.0

    @property
    def n(self) -> int:
        return self.D.shape[0]

    @property
    def E_inv(self) -> np.ndarray:
        return self.R2


def flow_integrals(M, weight, rtol=quadrature.RTOL):
    """``int_0^1 e^{tM}^T weight e^{tM} dt`` by composite Gauss-Legendre."""

    def integrand(t):
        R = matrix_exponential(M, t)
        return np.einsum("tki,kl,tlj->tij", R, weight, R)

    K = quadrature.integrate(integrand, rtol=rtol)
    return 0.5 * (K + K.T)


def _rel(residual, *scales):
    return float(np.abs(residual).max() / max(1.0, *(np.abs(s).max() for s in scales)))


def _product_scale(*factors):
    # normwise size of a product; roundoff in the product is eps times this
    return np.array([np.prod([np.linalg.norm(f, 2) for f in factors])])


def cost_matrices(sys: LinearQuadraticSystem) -> CostModel:
    """Assemble ``D, E, F`` and verify the structural identities.

    ``D = R2^-1 R1`` and ``E = R2^-1`` come from ``R(1)``; ``F`` is taken as
    ``R4 R2^-1`` and checked against the quadrature integral ``Q2``.

    Raises:
        NotControllable: the Kalman rank is below ``n``.
        IllConditioned: ``R2(1)`` is numerically singular.
        ConsistencyFailure: an identity fails beyond ``1e-9`` relative, or
            ``D``/``F`` is not symmetric positive definite.
    """
    n = sys.n
    rep = controllability_subspace(sys.A, sys.B)
    if not rep.is_controllable:
        raise NotControllable(f"Kalman rank {rep.d} < n = {n}")

    M = hamiltonian_matrix(sys)
    R1, R2, R3, R4 = split_blocks(matrix_exponential(M), n)
    cond = float(np.linalg.cond(R2))
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise IllConditioned(f"cond(R2(1)) = {cond:.3e}", condition_number=cond)

    weight = np.zeros((2 * n, 2 * n))
    weight[:n, :n] = sys.W
    weight[n:, n:] = sys.control_gain
    K = flow_integrals(M, weight)
    Q1, C, Q2 = K[:n, :n], K[:n, n:], K[n:, n:]

    E = np.linalg.inv(R2)
    D = E @ R1
    # F = E^T Q2 E, evaluated through Q2 = R2^T R4 so that cond(R2)^2 does not
    # multiply the quadrature error; the definition is checked on the Q2 side
    F = R4 @ E
    ETQ2 = R1.T @ E.T @ Q2
    R2FR2 = R2.T @ (0.5 * (F + F.T)) @ R2
    # residuals are relative to the factor magnitudes, so cancellation in a
    # product with a large inverse does not masquerade as an inconsistency
    residuals = {
        "C": _rel(C - (-np.eye(n) + ETQ2), C, _product_scale(R1, E, Q2)),
        "Q1": _rel(Q1 - C @ E @ R1, Q1, _product_scale(C, E, R1)),
        "F": _rel(Q2 - R2FR2, Q2, _product_scale(R2, F, R2)),
        "D_symmetry": float(np.abs(D - D.T).max() / max(np.abs(D).max(), 1e-300)),
        "F_symmetry": float(np.abs(F - F.T).max() / max(np.abs(F).max(), 1e-300)),
    }
    if max(residuals["C"], residuals["Q1"], residuals["F"]) > TOL_RELATION:
        raise ConsistencyFailure("adjoint relations violated", residuals)
    if residuals["D_symmetry"] > TOL_SYMMETRY or residuals["F_symmetry"] > TOL_SYMMETRY:
        raise ConsistencyFailure("D or F not symmetric", residuals)
    D = 0.5 * (D + D.T)
    F = 0.5 * (F + F.T)
    residuals["D_min_eig"] = float(np.linalg.eigvalsh(D).min())
    residuals["F_min_eig"] = float(np.linalg.eigvalsh(F).min())
    if residuals["D_min_eig"] <= 0 or residuals["F_min_eig"] <= 0:
        raise ConsistencyFailure("D or F not positive definite", residuals)

    return CostModel(
        D=D, E=E, F=F, R1=R1, R2=R2, R3=R3, R4=R4, Q1=Q1, Q2=Q2, C=C,
        cond_E=float(np.linalg.cond(E)), residuals=residuals,
    )


def _clamp(value, scale):
    # non-negativity under roundoff; larger violations are left visible
    return np.where((value < 0) & (value >= -1e-12 * scale), 0.0, value)


def _term_scale(model, x, y):
    # size of the three quadratic terms before they cancel
    ax, ay = np.abs(x), np.abs(y)
    return 1.0 + 0.5 * ax @ np.abs(model.D) @ ax + ax @ np.abs(model.E) @ ay + 0.5 * ay @ np.abs(model.F) @ ay


def eval_cost(model: CostModel, x, y) -> float:
    """``1/2 <x, D x> - <x, E y> + 1/2 <y, F y>``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    val = 0.5 * x @ model.D @ x - x @ model.E @ y + 0.5 * y @ model.F @ y
    return float(_clamp(val, _term_scale(model, x, y)))


def pairwise_cost(model: CostModel, X, Y) -> np.ndarray:
    """Cost between every row of ``X`` and every row of ``Y``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    dx = 0.5 * np.einsum("ik,kl,il->i", X, model.D, X)
    fy = 0.5 * np.einsum("jk,kl,jl->j", Y, model.F, Y)
    val = dx[:, None] - X @ model.E @ Y.T + fy[None, :]
    aX, aY = np.abs(X), np.abs(Y)
    scale = (
        1.0
        + 0.5 * np.einsum("ik,kl,il->i", aX, np.abs(model.D), aX)[:, None]
        + aX @ np.abs(model.E) @ aY.T
        + 0.5 * np.einsum("jk,kl,jl->j", aY, np.abs(model.F), aY)[None, :]
    )
    return _clamp(val, scale)


def cost_gradient_x(model: CostModel, x, y) -> np.ndarray:
    return model.D @ np.asarray(x, dtype=float) - model.E @ np.asarray(y, dtype=float)


def initial_adjoint(model: CostModel, x, y) -> np.ndarray:
    """Adjoint ``p0`` with ``R1(1) x + R2(1) p0 = y``; equals ``-grad_x c(x, y)``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return np.linalg.solve(model.R2, y - model.R1 @ x)


@dataclass(frozen=True)
class OptimalTrajectory:
    times: np.ndarray
    states: np.ndarray
    adjoints: np.ndarray
    controls: np.ndarray
    running_cost: float


def trajectory_from_adjoint(sys: LinearQuadraticSystem, x, p0, N: int) -> OptimalTrajectory:
    """Sample the Hamiltonian flow from ``(x, p0)`` on ``N + 1`` uniform times."""
    if N < 2:
        raise PreconditionViolated("trajectory needs N >= 2 intervals")
    n = sys.n
    times = np.linspace(0.0, 1.0, N + 1)
    R = matrix_exponential(hamiltonian_matrix(sys), times)
    z = R @ np.concatenate([x, p0])
    states, adjoints = z[:, :n], z[:, n:]
    controls = np.linalg.solve(sys.U, sys.B.T @ adjoints.T).T
    running = scipy.integrate.simpson(sys.lagrangian(states, controls), x=times)
    return OptimalTrajectory(times, states, adjoints, controls, float(running))


def optimal_trajectory(sys: LinearQuadraticSystem, model: CostModel, x, y, N: int) -> OptimalTrajectory:
    """Optimal state, adjoint and control sampled on ``N + 1`` points.

    ``running_cost`` is the composite Simpson integral of the Lagrangian; its
    error against :func:`eval_cost` decays like ``N**-4``.
    """
    x = np.asarray(x, dtype=float)
    p0 = initial_adjoint(model, x, y)
    return trajectory_from_adjoint(sys, x, p0, N)


def controllability_grammian(sys: LinearQuadraticSystem) -> np.ndarray:
    """``int_0^1 e^{-tA} B U^-1 B^T e^{-tA^T} dt``."""
    A, G = sys.A, sys.control_gain

    def integrand(t):
        Phi = matrix_exponential(-A, t)
        return Phi @ G @ np.swapaxes(Phi, -1, -2)

    K = quadrature.integrate(integrand)
    return 0.5 * (K + K.T)


def grammian_cost(sys: LinearQuadraticSystem, x, y) -> float:
    """Minimum-energy cost for ``W = 0``: ``1/2 <v, G^-1 v>`` with ``v = x - e^{-A} y``.

    The Grammian integrates ``e^{-tA}`` rather than ``e^{tA^T}``; only this
    orientation reproduces the value function when ``A`` is not normal.
    """
    if np.any(sys.W != 0):
        raise PreconditionViolated("grammian_cost requires W = 0")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    v = x - matrix_exponential(-sys.A) @ y
    G = controllability_grammian(sys)
    return float(0.5 * v @ np.linalg.solve(G, v))
