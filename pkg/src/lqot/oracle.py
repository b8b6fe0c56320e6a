"""Brute-force references, independent of the closed-form cost.

``min_cost_piecewise`` optimizes directly over piecewise-constant controls;
every per-piece quantity, including the state-cost integral, comes from an
augmented matrix exponential, so it carries no quadrature error.
``enumerate_ot`` scans permutations or transportation-polytope vertices.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import NumericalStall, TooLarge, UnreachableEndpoint
from .linsys import LinearQuadraticSystem, matrix_exponential
from .transport import TransportPlan

KKT_RTOL = 1e-10


@dataclass(frozen=True)
class PiecewiseControl:
    K: int
    values: np.ndarray  # (K, m)

    def __call__(self, t):
        k = np.minimum((np.asarray(t) * self.K).astype(int), self.K - 1)
        return self.values[k]


def piece_propagators(sys: LinearQuadraticSystem, h: float):
    """Exact one-piece maps for a constant control held for time ``h``.

    Returns ``(Phi, Gamma, Psi)``: the step ``x+ = Phi x + Gamma u`` and the
    state-cost Grammian with ``int_0^h <x, W x> ds = [x; u]^T Psi [x; u]``.
    """
    n, m = sys.n, sys.m
    Abar = np.zeros((n + m, n + m))
    Abar[:n, :n] = sys.A
    Abar[:n, n:] = sys.B
    step = matrix_exponential(Abar, h)
    Phi, Gamma = step[:n, :n], step[:n, n:]

    Wbar = np.zeros((n + m, n + m))
    Wbar[:n, :n] = sys.W
    k = n + m
    big = np.zeros((2 * k, 2 * k))
    big[:k, :k] = -Abar.T
    big[:k, k:] = Wbar
    big[k:, k:] = Abar
    F = matrix_exponential(big, h)
    Psi = F[k:, k:].T @ F[:k, k:]
    return Phi, Gamma, 0.5 * (Psi + Psi.T)


def _reduce_constraints(G, r, tol=1e-10):
    Uc, s, Vt = np.linalg.svd(G, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        rank = 0
    else:
        rank = int(np.sum(s > tol * s[0]))
    Ur = Uc[:, :rank]
    off = r - Ur @ (Ur.T @ r)
    if np.linalg.norm(off) > 1e-8 * (1.0 + np.linalg.norm(r)):
        raise UnreachableEndpoint(
            f"endpoint misses the reachable set by {np.linalg.norm(off):.3e}"
        )
    return s[:rank, None] * Vt[:rank], Ur.T @ r


def min_cost_piecewise(sys: LinearQuadraticSystem, x, y, K: int):
    """Cheapest control constant on each of ``K`` equal pieces steering ``x`` to ``y``.

    The cost is a convex quadratic in the ``K m`` control values and the
    endpoint condition is affine, so one KKT solve gives the exact optimum.
    Endpoint constraints are reduced to their row space first, which lets
    targets on the reachable fiber of a non-controllable system through.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    n, m = sys.n, sys.m
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    h = 1.0 / K
    Phi, Gamma, Psi = piece_propagators(sys, h)

    # maps zeta = (x0, u_1..u_K) to the state at the start of each piece
    dim = n + K * m
    state = np.zeros((n, dim))
    state[:, :n] = np.eye(n)
    H = np.zeros((dim, dim))
    for k in range(K):
        cols = slice(n + k * m, n + (k + 1) * m)
        L = np.zeros((n + m, dim))
        L[:n] = state
        L[n:, cols] = np.eye(m)
        H += L.T @ Psi @ L
        H[cols, cols] += h * sys.U
        state = Phi @ state
        state[:, cols] += Gamma
    H = 0.5 * (H + H.T)

    Huu = H[n:, n:]
    g = H[n:, :n] @ x
    const = 0.5 * x @ H[:n, :n] @ x
    G = state[:, n:]
    Gr, rr = _reduce_constraints(G, y - state[:, :n] @ x)
    r = Gr.shape[0]

    kkt = np.block([[Huu, Gr.T], [Gr, np.zeros((r, r))]])
    rhs = np.concatenate([-g, rr])
    sol = np.linalg.solve(kkt, rhs)
    res = np.linalg.norm(kkt @ sol - rhs)
    if res > KKT_RTOL * (np.linalg.norm(kkt) * np.linalg.norm(sol) + np.linalg.norm(rhs)):
        raise NumericalStall("KKT residual too large", {"residual": float(res), "K": K})
    u = sol[: K * m]
    value = 0.5 * u @ Huu @ u + g @ u + const
    return float(value), PiecewiseControl(K, u.reshape(K, m))


def extrapolated_min_cost(sys: LinearQuadraticSystem, x, y, K: int) -> float:
    """Richardson combination of ``K`` and ``2K`` pieces.

    The piecewise-constant gap expands in even powers of ``1/K``, so
    ``(4 V(2K) - V(K)) / 3`` removes the leading term.
    """
    v1, _ = min_cost_piecewise(sys, x, y, K)
    v2, _ = min_cost_piecewise(sys, x, y, 2 * K)
    return (4.0 * v2 - v1) / 3.0


def _plan(entries, C, shape):
    entries = sorted((i, j, w) for i, j, w in entries if w > 0)
    rows = np.array([e[0] for e in entries], dtype=int)
    cols = np.array([e[1] for e in entries], dtype=int)
    masses = np.array([e[2] for e in entries], dtype=float)
    return TransportPlan(rows, cols, masses, float(np.sum(masses * C[rows, cols])), shape)


def _vertex_search(C, a, b):
    """Minimum over all vertices of the transportation polytope.

    Every vertex arises from repeatedly picking a live cell, shipping
    ``min(a_i, b_j)`` and retiring the exhausted line (both branches on a
    tie), which is what the memoized search enumerates.
    """
    n, m = C.shape
    memo = {}

    def best(rows, cols, ra, rb):
        if not rows or not cols:
            return 0.0, ()
        key = (rows, cols, ra, rb)
        if key in memo:
            return memo[key]
        out = None
        for i in rows:
            for j in cols:
                q = min(ra[i], rb[j])
                na, nb = list(ra), list(rb)
                na[i] -= q
                nb[j] -= q
                branches = []
                if ra[i] <= rb[j]:
                    branches.append((rows - {i}, cols))
                if rb[j] <= ra[i]:
                    branches.append((rows, cols - {j}))
                for nr, nc in branches:
                    na_t = tuple(0.0 if k not in nr else na[k] for k in range(n))
                    nb_t = tuple(0.0 if k not in nc else nb[k] for k in range(m))
                    sub_cost, sub_cells = best(nr, nc, na_t, nb_t)
                    cand = (C[i, j] * q + sub_cost, tuple(sorted(((i, j, q),) + sub_cells)))
                    if out is None or _better(cand, out):
                        out = cand
        memo[key] = out
        return out

    return best(frozenset(range(n)), frozenset(range(m)), tuple(a), tuple(b))


def _better(cand, cur, tol=1e-12):
    if cand[0] < cur[0] - tol:
        return True
    if cand[0] > cur[0] + tol:
        return False
    return [c[:2] for c in cand[1] if c[2] > 0] < [c[:2] for c in cur[1] if c[2] > 0]


def enumerate_ot(C, mu_weights, nu_weights) -> TransportPlan:
    """Exhaustive optimal plan for tiny instances.

    Uniform marginals with equal counts up to 8 scan permutations; any other
    marginals up to 5 atoms per side scan polytope vertices. Ties go to the
    lexicographically smallest support.
    """
    C = np.asarray(C, dtype=float)
    a = np.asarray(mu_weights, dtype=float)
    b = np.asarray(nu_weights, dtype=float)
    n, m = C.shape
    uniform = n == m and np.allclose(a, 1.0 / n, rtol=0, atol=1e-14) and np.allclose(b, 1.0 / m, rtol=0, atol=1e-14)
    if uniform and n <= 8:
        perms = np.array(list(itertools.permutations(range(n))), dtype=int)
        totals = C[np.arange(n)[None, :], perms].sum(axis=1) / n
        k = int(np.flatnonzero(totals <= totals.min() + 1e-12)[0])
        return _plan([(i, int(perms[k, i]), 1.0 / n) for i in range(n)], C, C.shape)
    if n <= 5 and m <= 5:
        _, cells = _vertex_search(C, a, b)
        return _plan(cells, C, C.shape)
    raise TooLarge(f"enumeration limited to 8x8 uniform or 5x5 general, got {n}x{m}")
