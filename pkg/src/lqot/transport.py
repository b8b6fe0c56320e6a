"""Discrete measures, exact optimal transport and Brenier-structure diagnostics."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import (
    EmptyMeasure,
    NegativeWeight,
    NonFiniteCost,
    NotDeterministic,
    ZeroDensity,
)
from .lqcost import CostModel, pairwise_cost
from .netsimplex import transport_simplex

MERGE_TOL = 1e-12


@dataclass(frozen=True)
class DiscreteMeasure:
    """Finitely many weighted atoms; weights are positive and sum to one."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        w = np.array(self.weights, dtype=float)
        if len(w) == 0:
            raise EmptyMeasure("measure has no atoms")
        if pts.shape[0] != w.shape[0]:
            raise ValueError("points and weights differ in length")
        if np.any(w <= 0):
            raise NegativeWeight("atom weights must be positive")
        if abs(w.sum() - 1.0) > 1e-12 * len(w):
            raise ValueError(f"weights sum to {w.sum()!r}, not 1")
        pts.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    def __len__(self):
        return len(self.weights)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def mean(self) -> np.ndarray:
        return self.weights @ self.points


def _merge_duplicates(points, weights, tol):
    """Union atoms closer than ``tol`` (sup norm), keeping first-seen order."""
    N = len(points)
    if N < 2:
        return points, weights
    root = np.arange(N)

    def find(i):
        while root[i] != i:
            root[i] = root[root[i]]
            i = root[i]
        return i

    for i, j in sorted(cKDTree(points).query_pairs(tol, p=np.inf)):
        ri, rj = find(i), find(j)
        if ri != rj:
            root[max(ri, rj)] = min(ri, rj)
    reps = np.array([find(i) for i in range(N)])
    keep = np.unique(reps)
    merged = np.zeros(len(keep))
    np.add.at(merged, np.searchsorted(keep, reps), weights)
    return points[keep], merged


def make_measure(points, weights=None, merge_tol: float = MERGE_TOL) -> DiscreteMeasure:
    """Normalize weights, drop zero-weight atoms and merge duplicate points.

    Raises:
        EmptyMeasure: no atom carries positive mass.
        NegativeWeight: some weight is negative.
    """
    pts = np.array(points, dtype=float)
    if pts.ndim == 1:
        # a flat list is a list of scalar atoms
        pts = pts[:, None]
    if pts.size == 0:
        raise EmptyMeasure("measure has no atoms")
    w = np.ones(len(pts)) if weights is None else np.array(weights, dtype=float)
    if w.shape != (len(pts),):
        raise ValueError(f"{len(w)} weights for {len(pts)} points")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise NegativeWeight("weights must be finite and non-negative")
    keep = w > 0
    pts, w = pts[keep], w[keep]
    if w.sum() <= 0:
        raise EmptyMeasure("total mass is zero")
    pts, w = _merge_duplicates(pts, w, merge_tol)
    return DiscreteMeasure(pts, w / w.sum())


def sample_box(
    density: Callable[[np.ndarray], np.ndarray],
    box,
    N: int,
    seed: int,
    density_max: Optional[float] = None,
) -> DiscreteMeasure:
    """Rejection-sample ``N`` points from ``density`` restricted to ``box``.

    ``box`` is a sequence of ``(low, high)`` pairs. ``density`` maps an
    ``(k, n)`` array of points to ``k`` non-negative values. Without an explicit
    ``density_max`` the envelope is 1.25 times the largest value on a pilot
    sample, which is exact for piecewise-constant densities.
    """
    box = np.asarray(box, dtype=float)
    if box.ndim != 2 or box.shape[1] != 2 or np.any(box[:, 1] <= box[:, 0]):
        raise ValueError("box must be a list of (low, high) pairs with low < high")
    if N < 1:
        raise ValueError("N must be positive")
    rng = np.random.default_rng(seed)
    lo, hi = box[:, 0], box[:, 1]
    n = len(box)

    def draw(k):
        return lo + (hi - lo) * rng.random((k, n))

    if density_max is None:
        pilot = np.asarray(density(draw(4096)), dtype=float)
        if np.any(pilot < 0):
            raise ValueError("density is negative somewhere in the box")
        density_max = 1.25 * float(pilot.max())
    if not density_max > 0:
        raise ZeroDensity("density vanishes on the pilot sample")

    out = []
    have = 0
    drawn = 0
    batch = max(64, 2 * N)
    while have < N:
        if drawn > 1000 * N + 100000:
            raise ZeroDensity(f"acceptance rate too low after {drawn} draws")
        cand = draw(batch)
        drawn += batch
        f = np.asarray(density(cand), dtype=float)
        acc = cand[rng.random(batch) * density_max < f]
        out.append(acc)
        have += len(acc)
    pts = np.vstack(out)[:N]
    return DiscreteMeasure(pts, np.full(N, 1.0 / N))


def pushforward(measure: DiscreteMeasure, M, b=None) -> DiscreteMeasure:
    """Image of ``measure`` under ``x -> M x + b``; coincident images merge."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    pts = measure.points @ M.T
    if b is not None:
        pts = pts + np.asarray(b, dtype=float)
    return make_measure(pts, measure.weights)


def cost_matrix(cost: Callable, mu: DiscreteMeasure, nu: DiscreteMeasure) -> np.ndarray:
    """Dense ``c(x_i, y_j)``.

    ``cost`` is either a :class:`CostModel` or a pairwise callable taking the
    two point arrays and returning the full matrix.
    """
    if isinstance(cost, CostModel):
        Cm = pairwise_cost(cost, mu.points, nu.points)
    else:
        Cm = np.asarray(cost(mu.points, nu.points), dtype=float)
    if not np.all(np.isfinite(Cm)):
        bad = np.argwhere(~np.isfinite(Cm))[0]
        raise NonFiniteCost(f"cost is not finite at pair {tuple(int(k) for k in bad)}")
    return Cm


@dataclass(frozen=True)
class TransportPlan:
    """Sparse coupling between atoms of two measures."""

    rows: np.ndarray
    cols: np.ndarray
    masses: np.ndarray
    total_cost: float
    shape: tuple

    @property
    def is_map(self) -> bool:
        return len(np.unique(self.rows)) == len(self.rows)

    def row_sums(self) -> np.ndarray:
        return np.bincount(self.rows, weights=self.masses, minlength=self.shape[0])

    def col_sums(self) -> np.ndarray:
        return np.bincount(self.cols, weights=self.masses, minlength=self.shape[1])

    def dense(self) -> np.ndarray:
        X = np.zeros(self.shape)
        np.add.at(X, (self.rows, self.cols), self.masses)
        return X

    def support(self) -> set:
        return set(zip(self.rows.tolist(), self.cols.tolist()))

    def recompute_cost(self, C) -> float:
        return float(np.sum(self.masses * np.asarray(C)[self.rows, self.cols]))

    def marginal_error(self, mu_weights, nu_weights) -> float:
        return float(
            max(
                np.abs(self.row_sums() - mu_weights).max(),
                np.abs(self.col_sums() - nu_weights).max(),
            )
        )


@dataclass(frozen=True)
class DualPotentials:
    """Kantorovich potentials on the atoms: ``psi_c[j] - psi[i] <= c(i, j)``."""

    psi: np.ndarray
    psi_c: np.ndarray

    def value(self, mu_weights, nu_weights) -> float:
        return float(self.psi_c @ nu_weights - self.psi @ mu_weights)

    def feasibility_violation(self, C) -> float:
        return float(max(0.0, (self.psi_c[None, :] - self.psi[:, None] - C).max()))

    def slackness_violation(self, C, plan: TransportPlan) -> float:
        gap = C[plan.rows, plan.cols] - (self.psi_c[plan.cols] - self.psi[plan.rows])
        return float(np.abs(gap).max(initial=0.0))


def _weights(m):
    return m.weights if isinstance(m, DiscreteMeasure) else np.asarray(m, dtype=float)


def solve_discrete_ot(C, mu, nu):
    """Exact optimal plan and dual potentials for a finite cost matrix.

    ``mu`` and ``nu`` are measures or plain probability vectors.
    """
    C = np.asarray(C, dtype=float)
    if not np.all(np.isfinite(C)):
        raise NonFiniteCost("cost matrix has non-finite entries")
    a, b = _weights(mu), _weights(nu)
    rows, cols, masses, u, v, _ = transport_simplex(C, a, b)
    plan = TransportPlan(
        rows=rows,
        cols=cols,
        masses=masses,
        total_cost=float(np.sum(masses * C[rows, cols])),
        shape=C.shape,
    )
    shift = u[0]
    return plan, DualPotentials(psi=u - shift, psi_c=v - shift)


def c_transform(psi, source_points, cost_fn, Y) -> np.ndarray:
    """``psi^c(y) = min_i psi_i + c(x_i, y)`` evaluated at arbitrary ``Y``.

    Off the atoms this is a diagnostic extension of the discrete potential, not
    the continuum potential.
    """
    Cm = cost_fn(np.asarray(source_points), np.atleast_2d(Y))
    return (np.asarray(psi)[:, None] + Cm).min(axis=0)


@dataclass(frozen=True)
class ReductionCertificate:
    f: np.ndarray
    g: np.ndarray
    max_residual: float
    passed: bool


def quadratic_reduction(model: CostModel, mu0: DiscreteMeasure, mu1: DiscreteMeasure, tol: float = 1e-10):
    """Pushforward ``E#mu1`` and the split ``c(x, y) = |x - Ey|^2 / 2 + f(x) + g(y)``.

    Because the two costs differ by marginal-only terms they share optimal
    plans between ``mu0`` and ``mu1`` (resp. ``E#mu1``).
    """
    X, Y = mu0.points, mu1.points
    EY = Y @ model.E.T
    Cm = pairwise_cost(model, X, Y)
    half_sq = 0.5 * ((X[:, None, :] - EY[None, :, :]) ** 2).sum(axis=-1)
    f = 0.5 * np.einsum("ik,kl,il->i", X, model.D, X) - 0.5 * np.sum(X * X, axis=1)
    g = 0.5 * np.einsum("jk,kl,jl->j", Y, model.F, Y) - 0.5 * np.sum(EY * EY, axis=1)
    resid = np.abs(Cm - half_sq - f[:, None] - g[None, :]).max()
    # every term is exact algebra, so rounding is bounded by the largest of them
    scale = 1.0 + max(np.abs(Cm).max(), half_sq.max(), np.abs(f).max(), np.abs(g).max())
    cert = ReductionCertificate(f=f, g=g, max_residual=float(resid), passed=bool(resid <= tol * scale))
    mu1_hat = DiscreteMeasure(EY, mu1.weights)
    return mu1_hat, cert


def squared_euclidean(X, Y) -> np.ndarray:
    return 0.5 * ((np.asarray(X)[:, None, :] - np.asarray(Y)[None, :, :]) ** 2).sum(axis=-1)


@dataclass(frozen=True)
class MonotonicityReport:
    min_cycle_slack: Optional[float]
    passed: bool
    scale: float
    exhaustive_length: int
    random_cycles: int


def _minplus(P, Q, chunk=32):
    out = np.empty((P.shape[0], Q.shape[1]))
    for r in range(0, P.shape[0], chunk):
        out[r : r + chunk] = (P[r : r + chunk, :, None] + Q[None, :, :]).min(axis=1)
    return out


def cyclical_monotonicity_check(
    plan: TransportPlan,
    mu: DiscreteMeasure,
    nu: DiscreteMeasure,
    E,
    max_length: int = 4,
    random_cycles: int = 10_000,
    seed: int = 0,
    rtol: float = 1e-9,
    exhaustive_limit: int = 300,
) -> MonotonicityReport:
    """Cyclical monotonicity of the support pairs ``(x_i, E y_j)``.

    A cycle ``a_1 -> ... -> a_k -> a_1`` over support pairs has slack
    ``sum_k <x_{a_k}, E y_{a_k} - E y_{a_{k+1}}>``; the quadratic terms of the
    cost cancel around any cycle, so non-negative slack everywhere is
    c-cyclical monotonicity. Closed walks up to ``max_length`` are searched
    exhaustively (min-plus products) while the support has at most
    ``exhaustive_limit`` pairs, otherwise only 2-cycles; ``random_cycles``
    longer cycles are sampled on top.
    """
    X = mu.points[plan.rows]
    EY = nu.points[plan.cols] @ np.asarray(E, dtype=float).T
    s = len(plan.rows)
    scale = float(max(np.linalg.norm(X, axis=1).max() * np.linalg.norm(EY, axis=1).max(), 1e-300))
    if s < 2:
        return MonotonicityReport(None, True, scale, 0, 0)

    inner = X @ EY.T
    Wt = np.diag(inner)[:, None] - inner
    np.fill_diagonal(Wt, np.inf)

    best = float(np.min(Wt + Wt.T))
    exhaustive = 2
    if s <= exhaustive_limit and max_length > 2:
        # P[a, c]: cheapest walk a -> c with (length - 1) edges
        P = Wt
        for length in range(3, max_length + 1):
            P = _minplus(P, Wt)
            best = min(best, float(np.min(P + Wt.T)))
            exhaustive = length

    n_random = 0
    if random_cycles > 0 and s >= 5:
        rng = np.random.default_rng(seed)
        lmax = min(s, 12)
        lengths = rng.integers(5, lmax + 1, size=random_cycles)
        for start in range(0, random_cycles, 1000):
            ls = lengths[start : start + 1000]
            k = len(ls)
            order = np.argsort(rng.random((k, s)), axis=1)[:, :lmax]
            for length in np.unique(ls):
                sel = order[ls == length, :length]
                nxt = np.roll(sel, -1, axis=1)
                slack = (Wt[sel, nxt]).sum(axis=1)
                best = min(best, float(slack.min()))
            n_random += k

    return MonotonicityReport(
        min_cycle_slack=best,
        passed=bool(best >= -rtol * scale),
        scale=scale,
        exhaustive_length=exhaustive,
        random_cycles=n_random,
    )


def plan_to_map(plan: TransportPlan):
    """``[(source, target), ...]`` when no source atom splits its mass."""
    counts = np.bincount(plan.rows, minlength=plan.shape[0])
    split = np.flatnonzero(counts > 1)
    if len(split):
        raise NotDeterministic(
            f"{len(split)} source atoms split their mass", split_sources=split.tolist()
        )
    order = np.argsort(plan.rows, kind="stable")
    return [(int(plan.rows[k]), int(plan.cols[k])) for k in order]


def sparse_from_dense(X, C, tol=0.0) -> TransportPlan:
    X = np.asarray(X, dtype=float)
    rows, cols = np.nonzero(X > tol)
    masses = X[rows, cols]
    return TransportPlan(rows, cols, masses, float(np.sum(masses * np.asarray(C)[rows, cols])), X.shape)
