"""Linear control systems, quadratic Lagrangians and the Kalman decomposition.

The system is ``x' = A x + B u`` on the fixed horizon ``[0, 1]`` with running
cost ``L(x, u) = 1/2 <x, W x> + 1/2 <u, U u>``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from .errors import (
    MatrixExponentialOverflow,
    NonSymmetric,
    NotPositiveDefinite,
    NotPositiveSemidefinite,
    ShapeMismatch,
)

TOL_RANK = 1e-10
TOL_PSD = 1e-10
TOL_PD = 1e-12
TOL_SYM = 1e-10
TOL_REACH = 1e-9
TOL_DECOMP = 1e-10

# e^{tM} is only attempted while ||tM||_1 stays below this bound.
MAX_EXPONENT_NORM = 700.0


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class LinearQuadraticSystem:
    """Validated problem instance ``(A, B, W, U)``.

    Build instances through :func:`validate_system`; the constructor does not
    re-check the hypotheses.
    """

    A: np.ndarray
    B: np.ndarray
    W: np.ndarray
    U: np.ndarray

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def control_gain(self) -> np.ndarray:
        """``B U^{-1} B^T``, the quadratic form of the Hamiltonian in ``p``."""
        G = self.B @ np.linalg.solve(self.U, self.B.T)
        return 0.5 * (G + G.T)

    def lagrangian(self, x, u) -> np.ndarray:
        """Running cost evaluated row-wise on stacked states and controls."""
        x = np.atleast_2d(x)
        u = np.atleast_2d(u)
        return 0.5 * np.einsum("ti,ij,tj->t", x, self.W, x) + 0.5 * np.einsum(
            "ti,ij,tj->t", u, self.U, u
        )


def _as_matrix(name, value):
    a = np.array(value, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim != 2:
        raise ShapeMismatch(f"{name} must be a 2-D matrix, got ndim={a.ndim}", field=name)
    if not np.all(np.isfinite(a)):
        raise ShapeMismatch(f"{name} has non-finite entries", field=name)
    return a


def _check_symmetric(name, M):
    scale = max(1.0, np.abs(M).max(initial=0.0))
    if np.abs(M - M.T).max(initial=0.0) > TOL_SYM * scale:
        raise NonSymmetric(f"{name} is not symmetric", field=name)
    return 0.5 * (M + M.T)


def validate_system(A, B, W, U) -> LinearQuadraticSystem:
    """Check the standing hypotheses and return an immutable system.

    Raises:
        ShapeMismatch: inconsistent dimensions.
        NonSymmetric: ``W`` or ``U`` not symmetric.
        NotPositiveSemidefinite: ``W`` has a negative eigenvalue.
        NotPositiveDefinite: ``U`` is not positive definite.
    """
    A = _as_matrix("A", A)
    B = _as_matrix("B", B)
    W = _as_matrix("W", W)
    U = _as_matrix("U", U)

    n = A.shape[0]
    if A.shape != (n, n):
        raise ShapeMismatch(f"A must be square, got {A.shape}", field="A")
    if B.shape[0] != n:
        raise ShapeMismatch(f"B must have {n} rows, got {B.shape}", field="B")
    m = B.shape[1]
    if W.shape != (n, n):
        raise ShapeMismatch(f"W must be {n}x{n}, got {W.shape}", field="W")
    if U.shape != (m, m):
        raise ShapeMismatch(f"U must be {m}x{m}, got {U.shape}", field="U")

    W = _check_symmetric("W", W)
    U = _check_symmetric("U", U)

    w_eig = np.linalg.eigvalsh(W)
    w_scale = np.abs(w_eig).max(initial=0.0)
    if w_eig.min(initial=0.0) < -TOL_PSD * w_scale:
        raise NotPositiveSemidefinite(
            f"W has eigenvalue {w_eig.min():.3e} < 0", field="W"
        )
    u_eig = np.linalg.eigvalsh(U)
    if u_eig.min() <= TOL_PD * max(1.0, np.abs(u_eig).max()):
        raise NotPositiveDefinite(
            f"U has eigenvalue {u_eig.min():.3e}, must be > 0", field="U"
        )
    return LinearQuadraticSystem(_frozen(A), _frozen(B), _frozen(W), _frozen(U))


def matrix_exponential(M, t: float = 1.0) -> np.ndarray:
    """``e^{tM}`` by scaling and squaring with a Pade core.

    ``M`` may carry leading batch dimensions, in which case ``t`` broadcasts
    against them.
    """
    M = np.asarray(M, dtype=float)
    tM = np.asarray(t, dtype=float)[..., None, None] * M
    norm = np.abs(tM).sum(axis=-2).max(axis=-1, initial=0.0)
    if np.any(norm > MAX_EXPONENT_NORM):
        raise MatrixExponentialOverflow(
            f"||tM||_1 = {np.max(norm):.3g} exceeds supported range {MAX_EXPONENT_NORM}"
        )
    out = scipy.linalg.expm(tM)
    if not np.all(np.isfinite(out)):
        raise MatrixExponentialOverflow("matrix exponential overflowed")
    return out


def kalman_matrix(A, B) -> np.ndarray:
    """``[B, AB, ..., A^{n-1} B]``."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    blocks = [B]
    for _ in range(A.shape[0] - 1):
        blocks.append(A @ blocks[-1])
    return np.hstack(blocks)


def _fix_signs(Q):
    # largest-magnitude entry of each column made positive, for reproducibility
    idx = np.argmax(np.abs(Q), axis=0)
    signs = np.sign(Q[idx, np.arange(Q.shape[1])])
    signs[signs == 0] = 1.0
    return Q * signs


@dataclass(frozen=True)
class ControllabilityReport:
    """Rank of the controllable subspace ``V`` and, when ``d < n``, the blocks.

    ``P`` is orthogonal; new coordinates are ``P @ x`` and the first ``d`` of
    them parametrize ``V``.
    """

    d: int
    n: int
    V_basis: np.ndarray
    P: np.ndarray
    A1: Optional[np.ndarray] = None
    A2: Optional[np.ndarray] = None
    A3: Optional[np.ndarray] = None
    B1: Optional[np.ndarray] = None

    @property
    def is_controllable(self) -> bool:
        return self.d == self.n

    @property
    def has_blocks(self) -> bool:
        return self.A1 is not None

    def to_kalman(self, x) -> np.ndarray:
        """Map points (rows) into decomposition coordinates."""
        return np.asarray(x, dtype=float) @ self.P.T

    def from_kalman(self, z) -> np.ndarray:
        return np.asarray(z, dtype=float) @ self.P

    def fiber_projection(self, x) -> np.ndarray:
        """Uncontrollable coordinates ``x2`` of points given in original coordinates."""
        return self.to_kalman(x)[..., self.d :]


def controllability_subspace(A, B, tol_rank: float = TOL_RANK) -> ControllabilityReport:
    """Numerical rank of the Kalman matrix and an orthonormal basis of ``V``."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    n = A.shape[0]
    K = kalman_matrix(A, B)
    Q, s, _ = np.linalg.svd(K, full_matrices=True)
    smax = s.max(initial=0.0)
    d = int(np.sum(s > tol_rank * smax)) if smax > 0 else 0
    Q = np.hstack([_fix_signs(Q[:, :d]), _fix_signs(Q[:, d:])])
    if d == n:
        P = np.eye(n)
    else:
        P = Q.T
    return ControllabilityReport(d=d, n=n, V_basis=_frozen(Q[:, :d]), P=_frozen(P))


def kalman_decomposition(A, B, tol_rank: float = TOL_RANK) -> ControllabilityReport:
    """Full report including the block-triangular form when ``d < n``.

    In coordinates ``P x`` the system reads ``[[A1, A3], [0, A2]]`` and
    ``[B1; 0]`` with ``(A1, B1)`` controllable.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    rep = controllability_subspace(A, B, tol_rank)
    if rep.is_controllable:
        return rep
    d, P = rep.d, rep.P
    At = P @ A @ P.T
    Bt = P @ B
    return ControllabilityReport(
        d=d,
        n=rep.n,
        V_basis=rep.V_basis,
        P=rep.P,
        A1=_frozen(At[:d, :d]),
        A2=_frozen(At[d:, d:]),
        A3=_frozen(At[:d, d:]),
        B1=_frozen(Bt[:d, :]),
    )


def block_residual(A, B, report: ControllabilityReport) -> float:
    """Largest deviation of the transformed pair from the block-triangular form."""
    P = report.P
    At = P @ np.asarray(A, dtype=float) @ P.T
    Bt = P @ np.asarray(B, dtype=float)
    d = report.d
    return float(max(np.abs(At[d:, :d]).max(initial=0.0), np.abs(Bt[d:, :]).max(initial=0.0)))


def reachable_target(A, report: ControllabilityReport, x, y, tol_reach: float = TOL_REACH) -> bool:
    """Whether some control steers ``x`` to ``y`` in unit time (``e^A x - y`` in ``V``)."""
    if report.is_controllable:
        return True
    r = matrix_exponential(A) @ np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    V = report.V_basis
    off = r - V @ (V.T @ r)
    return bool(np.linalg.norm(off) <= tol_reach * (1.0 + np.linalg.norm(r)))
