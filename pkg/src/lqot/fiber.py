"""Transport for non-controllable systems, one fiber at a time.

In Kalman coordinates ``(x1, x2)`` the uncontrolled block evolves on its own,
``x2(t) = e^{tA2} x2``, so a finite-cost target must satisfy
``y2 = e^{A2} x2``. On each such fiber the cost is an affine perturbation of
the controllable cost of ``(A1, B1, W1, U)``:

    c = 1/2 <x1, D x1> - <x1, E r> + 1/2 <r, F r> + <E r, w> + k + int l,
    r = y1 - G(1) x2 - zbar(1).

Everything time dependent is read off one augmented exponential with state
``(zbar, pbar, G(t) x2, e^{tA2} x2)``: the forced Hamiltonian system driven by
the uncontrolled block.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import scipy.integrate
from scipy.spatial import cKDTree

from . import quadrature
from .errors import ConsistencyFailure, DegenerateFiber, IncompatibleMarginals
from .linsys import (
    ControllabilityReport,
    LinearQuadraticSystem,
    kalman_decomposition,
    matrix_exponential,
    validate_system,
)
from .lqcost import CostModel, cost_matrices, flow_integrals
from .transport import DiscreteMeasure, DualPotentials, TransportPlan, solve_discrete_ot

TOL_FIBER_RELATION = 1e-8
EPS_FIBER_REL = 1e-8


class FiberDynamics:
    """Block data of the decomposition and the augmented generator.

    The generator acts on ``(zbar, pbar, g, h)`` of sizes ``(d, d, d, n-d)``;
    starting from ``(0, 0, 0, x2)`` it yields the zero-data solution of the
    forced Hamiltonian system, ``g = G(t) x2`` and ``h = e^{tA2} x2``.
    """

    def __init__(self, sys: LinearQuadraticSystem, report: ControllabilityReport):
        if report.d == 0:
            raise DegenerateFiber("d = 0: the whole state is uncontrolled")
        if report.is_controllable:
            raise DegenerateFiber("system is controllable; use the direct cost")
        if not report.has_blocks:
            report = kalman_decomposition(sys.A, sys.B)
        self.sys = sys
        self.report = report
        d, n = report.d, sys.n
        self.d, self.n = d, n
        P = report.P
        Wk = P @ sys.W @ P.T
        self.W_kalman = 0.5 * (Wk + Wk.T)
        self.W1 = self.W_kalman[:d, :d]
        self.W3 = self.W_kalman[:d, d:]
        self.W2 = self.W_kalman[d:, d:]
        self.A1, self.A2, self.A3, self.B1 = report.A1, report.A2, report.A3, report.B1
        self.reduced = validate_system(self.A1, self.B1, self.W1, sys.U)
        self.gain = self.reduced.control_gain
        self.A2_exp = matrix_exponential(self.A2)

        k = 3 * d + (n - d)
        Mg = np.zeros((k, k))
        Mg[:d, :d] = self.A1
        Mg[:d, d : 2 * d] = self.gain
        Mg[d : 2 * d, :d] = self.W1
        Mg[d : 2 * d, d : 2 * d] = -self.A1.T
        Mg[d : 2 * d, 2 * d : 3 * d] = self.W1
        Mg[d : 2 * d, 3 * d :] = self.W3
        Mg[2 * d : 3 * d, 2 * d : 3 * d] = self.A1
        Mg[2 * d : 3 * d, 3 * d :] = self.A3
        Mg[3 * d :, 3 * d :] = self.A2
        self.generator = Mg
        self._cache = {}
        self._reduced_model: Optional[CostModel] = None

    @property
    def reduced_model(self) -> CostModel:
        if self._reduced_model is None:
            self._reduced_model = cost_matrices(self.reduced)
        return self._reduced_model

    def flow(self, t) -> np.ndarray:
        """``e^{t M}`` for the augmented generator, batched over ``t``."""
        t = np.asarray(t, dtype=float)
        key = t.tobytes()
        out = self._cache.get(key)
        if out is None:
            out = matrix_exponential(self.generator, t)
            if t.ndim == 1 and len(self._cache) < 32:
                self._cache[key] = out
        return out

    def G(self, t) -> np.ndarray:
        """Coupling flow ``e^{tA1} int_0^t e^{-sA1} A3 e^{sA2} ds``."""
        d = self.d
        return self.flow(t)[..., 2 * d : 3 * d, 3 * d :]

    def forcing(self, t, x2) -> np.ndarray:
        """``X(t; x2) = W1 G(t) x2 + W3 e^{tA2} x2``."""
        d = self.d
        s = self.flow(t)[..., :, 3 * d :] @ np.asarray(x2, dtype=float)
        return s[..., 2 * d : 3 * d] @ self.W1.T + s[..., 3 * d :] @ self.W3.T

    def to_kalman(self, x) -> np.ndarray:
        return self.report.to_kalman(x)

    def from_kalman(self, z) -> np.ndarray:
        return self.report.from_kalman(z)


def fiber_dynamics(sys: LinearQuadraticSystem, report: ControllabilityReport) -> FiberDynamics:
    return FiberDynamics(sys, report)


def forced_hamiltonian_solution(sys, dyn: FiberDynamics, x2, times):
    """``(zbar(t), pbar(t))`` at ``times``: the forced system started from zero."""
    d = dyn.d
    s = dyn.flow(np.asarray(times, dtype=float))[..., :, 3 * d :] @ np.asarray(x2, dtype=float)
    return s[..., :d], s[..., d : 2 * d]


@dataclass(frozen=True)
class FiberCostModel:
    """Affine cost data on the fiber through ``x2``."""

    x2: np.ndarray
    y2: np.ndarray
    D: np.ndarray
    E: np.ndarray
    F: np.ndarray
    Q1: np.ndarray
    Q2: np.ndarray
    C: np.ndarray
    R1: np.ndarray
    R2: np.ndarray
    z_bar1: np.ndarray
    v: np.ndarray
    w: np.ndarray
    k: float
    l_int: float
    G1x2: np.ndarray
    residuals: dict = field(default_factory=dict)


def fiber_cost_model(sys, report, x2, dyn: Optional[FiberDynamics] = None) -> FiberCostModel:
    """Synthesize the fiber cost for the uncontrolled coordinates ``x2``.

    Raises:
        ConsistencyFailure: ``v`` and ``R1^T R2^-T w`` disagree beyond 1e-8.
    """
    dyn = dyn or FiberDynamics(sys, report)
    d = dyn.d
    x2 = np.asarray(x2, dtype=float).reshape(-1)
    red = dyn.reduced_model
    gain, W1, Wk = dyn.gain, dyn.W1, dyn.W_kalman

    def integrand(t):
        Et = dyn.flow(t)
        R1, R2 = Et[:, :d, :d], Et[:, :d, d : 2 * d]
        R3, R4 = Et[:, d : 2 * d, :d], Et[:, d : 2 * d, d : 2 * d]
        s = Et[:, :, 3 * d :] @ x2
        zb, pb, g = s[:, :d], s[:, d : 2 * d], s[:, 2 * d : 3 * d]
        X = g @ W1.T + s[:, 3 * d :] @ dyn.W3.T
        Wz = zb @ W1.T
        Gp = pb @ gain.T
        v_t = np.einsum("tki,tk->ti", R1, Wz + X) + np.einsum("tki,tk->ti", R3, Gp)
        w_t = np.einsum("tki,tk->ti", R2, Wz + X) + np.einsum("tki,tk->ti", R4, Gp)
        k_t = 0.5 * np.sum(zb * Wz, axis=1) + 0.5 * np.sum(pb * Gp, axis=1) + np.sum(zb * X, axis=1)
        gh = s[:, 2 * d :]
        l_t = 0.5 * np.einsum("ti,ij,tj->t", gh, Wk, gh)
        return np.hstack([v_t, w_t, k_t[:, None], l_t[:, None]])

    vals = quadrature.integrate(integrand)
    v, w, k, l_int = vals[:d], vals[d : 2 * d], float(vals[2 * d]), float(vals[2 * d + 1])

    end = dyn.flow(np.array([1.0]))[0][:, 3 * d :] @ x2
    z_bar1, G1x2 = end[:d], end[2 * d : 3 * d]
    y2 = dyn.A2_exp @ x2

    pred = red.R1.T @ np.linalg.solve(red.R2.T, w)
    rel = float(np.abs(v - pred).max(initial=0.0) / max(1.0, np.abs(v).max(initial=0.0), np.abs(pred).max(initial=0.0)))
    if rel > TOL_FIBER_RELATION:
        raise ConsistencyFailure("fiber relation v = R1^T R2^-T w violated", {"v": rel})

    return FiberCostModel(
        x2=x2, y2=y2, D=red.D, E=red.E, F=red.F, Q1=red.Q1, Q2=red.Q2, C=red.C,
        R1=red.R1, R2=red.R2, z_bar1=z_bar1, v=v, w=w, k=k, l_int=l_int,
        G1x2=G1x2, residuals={"v": rel},
    )


def _affine_target(fcm: FiberCostModel, y1):
    return np.asarray(y1, dtype=float) - fcm.G1x2 - fcm.z_bar1


def eval_fiber_cost(fcm: FiberCostModel, x1, y1):
    """Cost from ``(x1, x2)`` to ``(y1, e^{A2} x2)``; 2-D ``x1``/``y1`` give the pairwise matrix."""
    x1 = np.asarray(x1, dtype=float)
    r = _affine_target(fcm, y1)
    X = np.atleast_2d(x1)
    Rr = np.atleast_2d(r)
    Ew = fcm.E.T @ fcm.w
    val = (
        0.5 * np.einsum("ik,kl,il->i", X, fcm.D, X)[:, None]
        - X @ fcm.E @ Rr.T
        + (0.5 * np.einsum("jk,kl,jl->j", Rr, fcm.F, Rr) + Rr @ Ew)[None, :]
        + fcm.k + fcm.l_int
    )
    aX, aR = np.abs(X), np.abs(Rr)
    scale = (
        1.0 + abs(fcm.k) + abs(fcm.l_int)
        + 0.5 * np.einsum("ik,kl,il->i", aX, np.abs(fcm.D), aX)[:, None]
        + aX @ np.abs(fcm.E) @ aR.T
        + (0.5 * np.einsum("jk,kl,jl->j", aR, np.abs(fcm.F), aR) + aR @ np.abs(Ew))[None, :]
    )
    val = np.where((val < 0) & (val >= -1e-12 * scale), 0.0, val)
    if x1.ndim == 1 and r.ndim == 1:
        return float(val[0, 0])
    return val


def fiber_bar_cost(fcm: FiberCostModel, x1, z1) -> float:
    """Reduced cost of the forced problem written through the adjoint ``p``."""
    x1 = np.asarray(x1, dtype=float)
    p = np.linalg.solve(fcm.R2, np.asarray(z1, dtype=float) - fcm.R1 @ x1 - fcm.z_bar1)
    return float(
        0.5 * x1 @ fcm.Q1 @ x1 + 0.5 * p @ fcm.Q2 @ p + x1 @ fcm.C @ p
        + x1 @ fcm.v + p @ fcm.w + fcm.k
    )


@dataclass(frozen=True)
class FiberTrajectory:
    times: np.ndarray
    states: np.ndarray  # original coordinates
    adjoints: np.ndarray  # reduced adjoint, dimension d
    controls: np.ndarray
    running_cost: float


def fiber_trajectory(dyn: FiberDynamics, fcm: FiberCostModel, x1, y1, N: int = 4096) -> FiberTrajectory:
    """Optimal motion on a fiber, mapped back to original coordinates.

    ``running_cost`` integrates the full ``n``-dimensional Lagrangian with
    composite Simpson.
    """
    d, sys = dyn.d, dyn.sys
    x1 = np.asarray(x1, dtype=float)
    p0 = fcm.E @ (_affine_target(fcm, y1) - fcm.R1 @ x1)
    start = np.concatenate([x1, p0, np.zeros(d), fcm.x2])
    times = np.linspace(0.0, 1.0, N + 1)
    s = dyn.flow(times) @ start
    xk = np.hstack([s[:, :d] + s[:, 2 * d : 3 * d], s[:, 3 * d :]])
    states = dyn.from_kalman(xk)
    p = s[:, d : 2 * d]
    controls = np.linalg.solve(sys.U, dyn.B1.T @ p.T).T
    running = scipy.integrate.simpson(sys.lagrangian(states, controls), x=times)
    return FiberTrajectory(times, states, p, controls, float(running))


# --- measures ---------------------------------------------------------------


@dataclass(frozen=True)
class Fiber:
    """Atoms sharing one uncontrolled label; ``measure`` lives on ``x1``."""

    label: np.ndarray
    measure: DiscreteMeasure
    weight: float
    indices: np.ndarray


def default_fiber_eps(*labels) -> float:
    big = max((np.abs(l).max(initial=0.0) for l in labels if len(l)), default=0.0)
    return EPS_FIBER_REL * (1.0 + big)


def _single_linkage(labels, eps):
    N = len(labels)
    root = list(range(N))

    def find(i):
        while root[i] != i:
            root[i] = root[root[i]]
            i = root[i]
        return i

    if N > 1 and labels.shape[1] > 0:
        for i, j in sorted(cKDTree(labels).query_pairs(eps)):
            ri, rj = find(i), find(j)
            if ri != rj:
                root[max(ri, rj)] = min(ri, rj)
    elif labels.shape[1] == 0:
        root = [0] * N
    groups = {}
    for i in range(N):
        groups.setdefault(find(i), []).append(i)
    return list(groups.values())


def disintegrate(measure: DiscreteMeasure, d: int, eps: Optional[float] = None) -> List[Fiber]:
    """Split a measure given in Kalman coordinates into fibers over ``x2``.

    Labels closer than ``eps`` are chained together (single linkage). Fibers
    come back sorted lexicographically by label.
    """
    pts = measure.points
    labels = pts[:, d:]
    if eps is None:
        eps = default_fiber_eps(labels)
    out = []
    for members in _single_linkage(labels, eps):
        idx = np.array(members, dtype=int)
        wts = measure.weights[idx]
        mass = float(wts.sum())
        label = (wts @ labels[idx]) / mass
        out.append(Fiber(label, DiscreteMeasure(pts[idx, :d], wts / mass), mass, idx))
    out.sort(key=lambda f: tuple(f.label.tolist()))
    return out


@dataclass(frozen=True)
class CompatibilityReport:
    compatible: bool
    discrepancy: float
    max_gap: float
    groups: list  # [(source fiber ids, target fiber ids, source mass, target mass)]
    eps: float

    def as_dict(self):
        return {
            "compatible": self.compatible,
            "discrepancy": self.discrepancy,
            "max_gap": self.max_gap,
            "eps_fiber": self.eps,
            "groups": [
                {"source_fibers": list(s), "target_fibers": list(t), "source_mass": a, "target_mass": b}
                for s, t, a, b in self.groups
            ],
        }


def _match_fibers(fib0, fib1, A2_exp, eps):
    pushed = np.array([A2_exp @ f.label for f in fib0]).reshape(len(fib0), -1)
    targets = np.array([f.label for f in fib1]).reshape(len(fib1), -1)
    both = np.vstack([pushed, targets])
    groups = []
    for members in _single_linkage(both, eps):
        src = sorted(i for i in members if i < len(fib0))
        tgt = sorted(i - len(fib0) for i in members if i >= len(fib0))
        a = float(sum(fib0[i].weight for i in src))
        b = float(sum(fib1[j].weight for j in tgt))
        groups.append((src, tgt, a, b))
    groups.sort(key=lambda g: (g[0][:1] or [len(fib0)], g[1][:1] or [len(fib1)]))
    return groups


def compatibility_check(mu0: DiscreteMeasure, mu1: DiscreteMeasure, report: ControllabilityReport,
                        tol: float = 1e-9, eps: Optional[float] = None) -> CompatibilityReport:
    """Compare ``e^{A2}`` applied to the ``x2``-marginal of ``mu0`` with that of ``mu1``.

    Both measures are in Kalman coordinates. ``discrepancy`` is the total
    variation between the two label marginals; compatibility requires every
    matched group of fibers to balance within ``tol``.
    """
    d = report.d
    A2 = report.A2 if report.A2 is not None else np.zeros((report.n - d, report.n - d))
    A2_exp = matrix_exponential(A2) if A2.size else A2
    if eps is None:
        eps = default_fiber_eps(mu0.points[:, d:] @ A2_exp.T, mu1.points[:, d:])
    fib0 = disintegrate(mu0, d, eps)
    fib1 = disintegrate(mu1, d, eps)
    groups = _match_fibers(fib0, fib1, A2_exp, eps)
    gaps = [abs(a - b) for _, _, a, b in groups]
    max_gap = max(gaps)
    return CompatibilityReport(
        compatible=bool(max_gap <= tol),
        discrepancy=0.5 * float(sum(gaps)),
        max_gap=float(max_gap),
        groups=groups,
        eps=float(eps),
    )


# --- solver -----------------------------------------------------------------


@dataclass(frozen=True)
class FiberSolution:
    source_label: np.ndarray
    target_label: np.ndarray
    mass: float
    cost: float
    source_indices: np.ndarray
    target_indices: np.ndarray
    plan: TransportPlan
    costs: np.ndarray
    duals: DualPotentials
    single_label: bool


@dataclass(frozen=True)
class FiberwiseSolution:
    plan: TransportPlan
    fibers: List[FiberSolution]
    compatibility: Optional[CompatibilityReport]
    d: int


def free_motion_cost(sys: LinearQuadraticSystem, X) -> np.ndarray:
    """``1/2 int_0^1 <e^{tA} x, W e^{tA} x> dt`` for each row of ``X``."""
    S = flow_integrals(sys.A, sys.W)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return 0.5 * np.einsum("ik,kl,il->i", X, S, X)


def _solve_free_motion(sys, mu0, mu1, tol):
    expA = matrix_exponential(sys.A)
    mapped = mu0.points @ expA.T
    tree = cKDTree(mu1.points)
    dist, idx = tree.query(mapped, p=np.inf)
    scale = 1.0 + np.abs(mapped).max(axis=1)
    miss = dist > 1e-8 * scale
    got = np.bincount(idx[~miss], weights=mu0.weights[~miss], minlength=len(mu1))
    discrepancy = 0.5 * (float(mu0.weights[miss].sum()) + float(np.abs(got - mu1.weights).sum()))
    if miss.any() or np.abs(got - mu1.weights).max() > tol:
        raise IncompatibleMarginals(
            "target is not the image of the source under e^A", discrepancy=discrepancy
        )
    costs = free_motion_cost(sys, mu0.points)
    rows = np.arange(len(mu0))
    plan = TransportPlan(rows, idx.astype(int), mu0.weights.copy(), float(costs @ mu0.weights), (len(mu0), len(mu1)))
    return FiberwiseSolution(plan=plan, fibers=[], compatibility=None, d=0)


def solve_noncontrollable(sys: LinearQuadraticSystem, mu0: DiscreteMeasure, mu1: DiscreteMeasure,
                          report: Optional[ControllabilityReport] = None, tol: float = 1e-9,
                          eps: Optional[float] = None) -> FiberwiseSolution:
    """Optimal plan between measures given in original coordinates.

    With ``d = 0`` the only finite-cost map is ``x -> e^A x``. Otherwise each
    source fiber is paired with the target fiber over ``e^{A2} x2`` and solved
    as an ordinary discrete problem under the fiber cost.

    Raises:
        IncompatibleMarginals: the label marginals do not match.
    """
    report = report or kalman_decomposition(sys.A, sys.B)
    if report.d == 0:
        return _solve_free_motion(sys, mu0, mu1, tol)
    if report.is_controllable:
        raise DegenerateFiber("system is controllable; use the direct solver")
    dyn = FiberDynamics(sys, report)
    d = report.d
    k0 = DiscreteMeasure(dyn.to_kalman(mu0.points), mu0.weights)
    k1 = DiscreteMeasure(dyn.to_kalman(mu1.points), mu1.weights)
    comp = compatibility_check(k0, k1, report, tol=tol, eps=eps)
    if not comp.compatible:
        raise IncompatibleMarginals(
            f"fiber masses differ by up to {comp.max_gap:.3e}",
            discrepancy=comp.discrepancy, report=comp,
        )
    fib0 = disintegrate(k0, d, comp.eps)
    fib1 = disintegrate(k1, d, comp.eps)

    rows, cols, masses = [], [], []
    total = 0.0
    sols = []
    for src, tgt, mass, _ in comp.groups:
        s_idx = np.concatenate([fib0[i].indices for i in src])
        t_idx = np.concatenate([fib1[j].indices for j in tgt])
        Y1 = k1.points[t_idx, :d]
        blocks = []
        for i in src:
            fcm = fiber_cost_model(sys, report, fib0[i].label, dyn)
            blocks.append(eval_fiber_cost(fcm, k0.points[fib0[i].indices, :d], Y1))
        Cm = np.vstack(blocks)
        a = mu0.weights[s_idx] / mu0.weights[s_idx].sum()
        b = mu1.weights[t_idx] / mu1.weights[t_idx].sum()
        local, duals = solve_discrete_ot(Cm, a, b)
        total += mass * local.total_cost
        rows.append(s_idx[local.rows])
        cols.append(t_idx[local.cols])
        masses.append(mass * local.masses)
        sols.append(FiberSolution(
            source_label=np.mean([fib0[i].label for i in src], axis=0),
            target_label=np.mean([fib1[j].label for j in tgt], axis=0),
            mass=mass, cost=local.total_cost,
            source_indices=s_idx, target_indices=t_idx, plan=local,
            costs=Cm, duals=duals, single_label=len(src) == 1,
        ))

    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    masses = np.concatenate(masses)
    order = np.lexsort((cols, rows))
    plan = TransportPlan(rows[order], cols[order], masses[order], float(total), (len(mu0), len(mu1)))
    return FiberwiseSolution(plan=plan, fibers=sols, compatibility=comp, d=d)


class NoncontrollableCost:
    """Pointwise cost in original coordinates, ``+inf`` off the fiber.

    Fiber models are cached per ``x2`` label.
    """

    def __init__(self, sys: LinearQuadraticSystem, report: Optional[ControllabilityReport] = None,
                 eps: Optional[float] = None):
        self.sys = sys
        self.report = report or kalman_decomposition(sys.A, sys.B)
        self.dyn = FiberDynamics(sys, self.report)
        self.eps = eps
        self._models = {}

    def model(self, x2) -> FiberCostModel:
        key = np.asarray(x2, dtype=float).tobytes()
        if key not in self._models:
            self._models[key] = fiber_cost_model(self.sys, self.report, x2, self.dyn)
        return self._models[key]

    def on_fiber(self, x, y) -> bool:
        d = self.report.d
        xk, yk = self.dyn.to_kalman(x), self.dyn.to_kalman(y)
        target = self.dyn.A2_exp @ xk[d:]
        eps = self.eps if self.eps is not None else default_fiber_eps(target, yk[d:])
        return bool(np.abs(yk[d:] - target).max(initial=0.0) <= eps)

    def __call__(self, x, y) -> float:
        if not self.on_fiber(x, y):
            return float("inf")
        d = self.report.d
        xk, yk = self.dyn.to_kalman(x), self.dyn.to_kalman(y)
        return eval_fiber_cost(self.model(xk[d:]), xk[:d], yk[:d])

    def pairwise(self, X, Y) -> np.ndarray:
        X = np.atleast_2d(X)
        Y = np.atleast_2d(Y)
        out = np.empty((len(X), len(Y)))
        for i, x in enumerate(X):
            for j, y in enumerate(Y):
                out[i, j] = self(x, y)
        return out
