"""Seeded random problem instances shared by the test modules."""

import numpy as np

from lqot.errors import IllConditioned
from lqot.linsys import controllability_subspace, validate_system
from lqot.lqcost import cost_matrices, hamiltonian_matrix


def random_spd(rng, n, low=0.2):
    L = rng.standard_normal((n, n))
    return L @ L.T / n + low * np.eye(n)


def random_psd(rng, n):
    r = int(rng.integers(0, n + 1))
    L = rng.standard_normal((n, r))
    return L @ L.T / max(r, 1)


def random_controllable(rng, n=None, m=None, zero_W=False, max_norm=10.0):
    """Controllable system with ``||M||_2 <= max_norm``; redraws on ill-conditioning."""
    while True:
        nn = int(rng.integers(1, 5)) if n is None else n
        mm = int(rng.integers(1, 4)) if m is None else m
        A = rng.standard_normal((nn, nn))
        B = rng.standard_normal((nn, mm))
        W = np.zeros((nn, nn)) if zero_W else random_psd(rng, nn)
        U = random_spd(rng, mm, low=0.5)
        if controllability_subspace(A, B).d < nn:
            continue
        sys_ = validate_system(A, B, W, U)
        M = hamiltonian_matrix(sys_)
        norm = np.linalg.norm(M, 2)
        if norm > max_norm:
            # shrink the drift and input until the Hamiltonian fits
            s = max_norm / norm
            sys_ = validate_system(s * A, s * B, s * W, U)
            if np.linalg.norm(hamiltonian_matrix(sys_), 2) > max_norm:
                continue
        try:
            return sys_, cost_matrices(sys_)
        except IllConditioned:
            continue


def block_system(rng, d, k, m=1, A3_zero=False, W3_zero=False, rotate=True):
    """Non-controllable system with controllable block of size ``d`` and ``k`` free coordinates.

    Returns ``(sys, Q)`` where ``x = Q @ (x1, x2)``.
    """
    while True:
        A1 = rng.standard_normal((d, d))
        B1 = rng.standard_normal((d, m))
        if controllability_subspace(A1, B1).d == d:
            break
    A2 = 0.5 * rng.standard_normal((k, k))
    A3 = np.zeros((d, k)) if A3_zero else rng.standard_normal((d, k))
    Ak = np.block([[A1, A3], [np.zeros((k, d)), A2]])
    Bk = np.vstack([B1, np.zeros((k, m))])
    Wk = random_spd(rng, d + k)
    if W3_zero:
        Wk[:d, d:] = 0.0
        Wk[d:, :d] = 0.0
    Q = np.linalg.qr(rng.standard_normal((d + k, d + k)))[0] if rotate else np.eye(d + k)
    sys_ = validate_system(Q @ Ak @ Q.T, Q @ Bk, Q @ Wk @ Q.T, random_spd(rng, m, low=0.5))
    return sys_, Q
