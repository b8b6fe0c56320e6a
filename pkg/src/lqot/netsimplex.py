"""Primal network simplex for the dense transportation problem.

Sources ``0..n-1`` ship to sinks ``n..n+m-1``; an artificial root carries
big-M arcs so that the starting tree is feasible. Anti-cycling follows the
strongly-feasible-tree rule: among blocking arcs, the last one met when
walking the pivot cycle from its apex leaves the basis. Pricing scans
row blocks cyclically and takes the first most negative reduced cost in the
block, so runs are reproducible bit for bit.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import Infeasible, NumericalStall


class _Tree:
    __slots__ = (
        "n", "m", "root", "parent", "up", "flow", "cost", "arc",
        "depth", "children", "pi",
    )

    def __init__(self, a, b, big):
        n, m = len(a), len(b)
        self.n, self.m = n, m
        self.root = root = n + m
        N = n + m + 1
        self.parent = [root] * N
        self.parent[root] = -1
        # up[v]: tree arc of v is oriented v -> parent(v)
        self.up = [True] * n + [False] * m + [False]
        self.flow = [float(x) for x in a] + [float(x) for x in b] + [0.0]
        self.cost = [big] * (n + m) + [0.0]
        # arc[v] = (i, j) for a real arc, None for an artificial one
        self.arc = [None] * N
        self.depth = [1] * (n + m) + [0]
        self.children = [set() for _ in range(N)]
        self.children[root] = set(range(n + m))
        self.pi = np.concatenate([np.full(n, -big), np.full(m, big), [0.0]])

    def recompute_potentials(self):
        pi = self.pi
        pi[self.root] = 0.0
        stack = [self.root]
        depth = self.depth
        while stack:
            u = stack.pop()
            for v in sorted(self.children[u]):
                depth[v] = depth[u] + 1
                pi[v] = pi[u] - self.cost[v] if self.up[v] else pi[u] + self.cost[v]
                stack.append(v)


def transport_simplex(C, a, b, max_pivots=None):
    """Solve ``min <C, X>`` subject to ``X 1 = a``, ``X^T 1 = b``, ``X >= 0``.

    Returns ``(rows, cols, masses, u, v, pivots)`` where the plan is supported
    on ``(rows[k], cols[k])`` and the potentials satisfy
    ``v[j] - u[i] <= C[i, j]`` with equality on the support.
    """
    C = np.asarray(C, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n, m = C.shape
    if a.shape != (n,) or b.shape != (m,):
        raise ValueError("marginals do not match the cost matrix")
    if not math.isclose(a.sum(), b.sum(), rel_tol=1e-9, abs_tol=1e-12):
        raise Infeasible(f"unbalanced marginals: {a.sum()!r} vs {b.sum()!r}")

    cmin = float(C.min())
    Cs = C - cmin
    cmax = float(Cs.max())
    big = (n + m) * (2.0 * cmax + 1.0)
    T = _Tree(a, b, big)
    parent, up, flow, depth, children, pi = T.parent, T.up, T.flow, T.depth, T.children, T.pi

    eps_flow = 1e-13 * max(a.max(), b.max())
    tol_rc = 1e-12 * (n + m) * (cmax + 1.0)
    rows_per_block = max(1, int(math.sqrt(n * m)) // m)
    nblocks = -(-n // rows_per_block)
    if max_pivots is None:
        max_pivots = 200 * (n + m) * max(1, int(math.log2(n * m + 1))) + 1000

    blk = 0
    pivots = 0
    while True:
        entering = None
        for step in range(nblocks):
            r0 = ((blk + step) % nblocks) * rows_per_block
            r1 = min(r0 + rows_per_block, n)
            rc = Cs[r0:r1] + pi[r0:r1, None] - pi[None, n : n + m]
            k = int(np.argmin(rc))
            val = rc.flat[k]
            if val < -tol_rc:
                blk = (blk + step) % nblocks
                entering = (r0 + k // m, k % m, float(val))
                break
        if entering is None:
            # confirm optimality with freshly propagated potentials
            T.recompute_potentials()
            rc = Cs + pi[:n, None] - pi[None, n : n + m]
            if rc.min() >= -tol_rc:
                break
            continue

        pivots += 1
        if pivots > max_pivots:
            raise NumericalStall(
                "network simplex exceeded its pivot budget",
                {"pivots": pivots, "n": n, "m": m, "min_reduced_cost": entering[2]},
            )

        i, j, rc_ij = entering
        si, sj = i, n + j

        # paths to the apex
        path_i, path_j = [], []
        u, v = si, sj
        while depth[u] > depth[v]:
            path_i.append(u)
            u = parent[u]
        while depth[v] > depth[u]:
            path_j.append(v)
            v = parent[v]
        while u != v:
            path_i.append(u)
            path_j.append(v)
            u, v = parent[u], parent[v]

        # walk the cycle from the apex: down to i, across (i, j), up from j
        theta = math.inf
        for w in path_i:
            if up[w] and flow[w] < theta:
                theta = flow[w]
        for w in path_j:
            if not up[w] and flow[w] < theta:
                theta = flow[w]
        if theta == math.inf:
            raise Infeasible("unbounded pivot cycle")

        leave = None
        leave_in_i = False
        for w in reversed(path_i):
            if up[w] and flow[w] <= theta + eps_flow:
                leave, leave_in_i = w, True
        for w in path_j:
            if not up[w] and flow[w] <= theta + eps_flow:
                leave, leave_in_i = w, False

        if theta > 0.0:
            for w in path_i:
                f = flow[w] - theta if up[w] else flow[w] + theta
                flow[w] = 0.0 if abs(f) <= eps_flow else f
            for w in path_j:
                f = flow[w] + theta if up[w] else flow[w] - theta
                flow[w] = 0.0 if abs(f) <= eps_flow else f

        # re-hang the subtree cut off by the leaving arc
        if leave_in_i:
            s, t = si, sj
            seg = path_i[: path_i.index(leave) + 1]
            new_up = True
            delta = -rc_ij
        else:
            s, t = sj, si
            seg = path_j[: path_j.index(leave) + 1]
            new_up = False
            delta = rc_ij

        children[parent[leave]].discard(leave)
        prev_up, prev_flow, prev_cost, prev_arc = up[s], flow[s], T.cost[s], T.arc[s]
        for k in range(1, len(seg)):
            w, below = seg[k], seg[k - 1]
            children[w].discard(below)
            children[below].add(w)
            cur = (up[w], flow[w], T.cost[w], T.arc[w])
            up[w], flow[w], T.cost[w], T.arc[w] = (not prev_up), prev_flow, prev_cost, prev_arc
            parent[w] = below
            prev_up, prev_flow, prev_cost, prev_arc = cur
        parent[s] = t
        children[t].add(s)
        up[s] = new_up
        flow[s] = theta if theta > eps_flow else 0.0
        T.cost[s] = float(Cs[i, j])
        T.arc[s] = (i, j)

        depth[s] = depth[t] + 1
        sub = [s]
        k = 0
        while k < len(sub):
            w = sub[k]
            dw = depth[w] + 1
            for c in children[w]:
                depth[c] = dw
                sub.append(c)
            k += 1
        pi[sub] += delta

    T.recompute_potentials()
    art = [w for w in range(n + m) if T.arc[w] is None and flow[w] > 1e-10 * max(a.max(), 1.0)]
    if art:
        raise Infeasible("artificial arcs carry flow at optimum")

    rows, cols, masses = [], [], []
    for w in range(n + m):
        if T.arc[w] is not None and flow[w] > 0.0:
            rows.append(T.arc[w][0])
            cols.append(T.arc[w][1])
            masses.append(flow[w])
    order = np.lexsort((cols, rows))
    rows = np.asarray(rows, dtype=int)[order]
    cols = np.asarray(cols, dtype=int)[order]
    masses = np.asarray(masses, dtype=float)[order]
    u = pi[:n].copy()
    v = pi[n : n + m] + cmin
    return rows, cols, masses, u, v, pivots
