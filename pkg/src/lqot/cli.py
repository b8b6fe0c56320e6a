"""Command-line front end.

    lqot <verb> --config problem.json [--out DIR] [--seed S] [--tol T]

Verbs: analyze, cost, solve, trajectory, check, sample. Results go to
``DIR/<verb>.json`` (plus CSV tables) and a one-line summary to stdout.
Exit codes: 0 success, 2 bad config or input, 3 incompatible marginals,
4 numerical failure or a failed check.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile

import numpy as np

from .config import ProblemConfig, load_config
from .errors import (
    ConfigError,
    IncompatibleMarginals,
    LQOTError,
    NotDeterministic,
    ValidationError,
)
from .fiber import (
    NoncontrollableCost,
    eval_fiber_cost,
    fiber_trajectory,
    free_motion_cost,
    solve_noncontrollable,
)
from .linsys import kalman_decomposition, matrix_exponential
from .lqcost import (
    cost_matrices,
    eval_cost,
    grammian_cost,
    hamiltonian_matrix,
    initial_adjoint,
    optimal_trajectory,
    pairwise_cost,
    symplectic_form,
)
from .oracle import enumerate_ot, extrapolated_min_cost, min_cost_piecewise
from .transport import (
    DiscreteMeasure,
    cyclical_monotonicity_check,
    plan_to_map,
    quadratic_reduction,
    solve_discrete_ot,
)

EXIT_OK, EXIT_CONFIG, EXIT_INCOMPATIBLE, EXIT_NUMERICAL = 0, 2, 3, 4


# --- serialization ----------------------------------------------------------


def _plain(obj):
    """Numpy-free structure; non-finite floats become ``"+inf"``-style strings."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "+inf" if x > 0 else "-inf"
        return x
    return obj


def _atomic_write(path, text):
    folder = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=folder, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path, doc):
    _atomic_write(path, json.dumps(_plain(doc), indent=2, sort_keys=True, allow_nan=False) + "\n")


def _fmt(x):
    return format(float(x), ".17g")


def write_csv(path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([v if isinstance(v, (int, np.integer)) else _fmt(v) for v in row])
    _atomic_write(path, buf.getvalue())


def read_plan_csv(path):
    """``(rows, cols, masses)`` from a plan table."""
    with open(path, newline="", encoding="utf-8") as fh:
        r = csv.reader(fh)
        header = next(r)
        if header != ["i", "j", "mass"]:
            raise ValueError(f"unexpected plan header {header}")
        data = [(int(i), int(j), float(m)) for i, j, m in r]
    rows = np.array([d[0] for d in data], dtype=int)
    cols = np.array([d[1] for d in data], dtype=int)
    masses = np.array([d[2] for d in data], dtype=float)
    return rows, cols, masses


def _plan_doc(plan):
    return {
        "total_cost": plan.total_cost,
        "shape": list(plan.shape),
        "couplings": [
            {"i": int(i), "j": int(j), "mass": float(m)}
            for i, j, m in zip(plan.rows, plan.cols, plan.masses)
        ],
    }


def _write_plan(out, plan):
    write_csv(os.path.join(out, "plan.csv"), ["i", "j", "mass"],
              [(int(i), int(j), m) for i, j, m in zip(plan.rows, plan.cols, plan.masses)])


# --- shared helpers ---------------------------------------------------------


def _report_doc(report):
    doc = {
        "n": report.n,
        "d": report.d,
        "controllable": report.is_controllable,
        "V_basis": report.V_basis,
    }
    if report.has_blocks:
        doc.update(P=report.P, A1=report.A1, A2=report.A2, A3=report.A3, B1=report.B1)
    return doc


def _model_doc(sys_, model):
    M = hamiltonian_matrix(sys_)
    R = matrix_exponential(M)
    J = symplectic_form(sys_.n)
    return {
        "D": model.D,
        "E": model.E,
        "F": model.F,
        "E_inv": model.E_inv,
        "R1": model.R1, "R2": model.R2, "R3": model.R3, "R4": model.R4,
        "Q1": model.Q1, "Q2": model.Q2, "C": model.C,
        "cond_E": model.cond_E,
        "cond_D": float(np.linalg.cond(model.D)),
        "cond_F": float(np.linalg.cond(model.F)),
        "residuals": dict(model.residuals, symplectic=float(np.abs(R.T @ J @ R - J).max())),
    }


def _noncontrollable_pair(nc, x, y):
    """Cost, reduced adjoint and fiber model for one pair (``None`` off the fiber)."""
    if not nc.on_fiber(x, y):
        return float("inf"), None, None
    d = nc.report.d
    xk, yk = nc.dyn.to_kalman(x), nc.dyn.to_kalman(y)
    fcm = nc.model(xk[d:])
    cost = eval_fiber_cost(fcm, xk[:d], yk[:d])
    p0 = fcm.E @ (yk[:d] - fcm.G1x2 - fcm.z_bar1 - fcm.R1 @ xk[:d])
    return cost, p0, fcm


def _free_pair(sys_, x, y):
    expA = matrix_exponential(sys_.A)
    target = expA @ x
    if np.abs(target - y).max() > 1e-8 * (1.0 + np.abs(target).max()):
        return float("inf")
    return float(free_motion_cost(sys_, x)[0])


def _default_pairs(cfg: ProblemConfig, report, count=3):
    if cfg.pairs:
        return cfg.pairs
    rng = np.random.default_rng(cfg.seed)
    n = cfg.system.n
    out = []
    for _ in range(count):
        x = rng.standard_normal(n)
        if report.is_controllable:
            y = rng.standard_normal(n)
        elif report.d == 0:
            y = matrix_exponential(cfg.system.A) @ x
        else:
            d = report.d
            xk = report.to_kalman(x)
            yk = np.concatenate([rng.standard_normal(d), matrix_exponential(report.A2) @ xk[d:]])
            y = report.from_kalman(yk)
        out.append((x, y))
    return out


# --- verbs ------------------------------------------------------------------


def cmd_analyze(cfg, out):
    report = kalman_decomposition(cfg.system.A, cfg.system.B)
    doc = {"system": {"n": cfg.system.n, "m": cfg.system.m}, "controllability": _report_doc(report)}
    if report.is_controllable:
        doc["cost"] = _model_doc(cfg.system, cost_matrices(cfg.system))
    write_json(os.path.join(out, "analyze.json"), doc)
    return doc, f"analyze: n={cfg.system.n} d={report.d}"


def cmd_cost(cfg, out):
    sys_ = cfg.system
    report = kalman_decomposition(sys_.A, sys_.B)
    if not cfg.pairs:
        raise ConfigError("cost needs at least one pair", "pairs")
    rows = []
    if report.is_controllable:
        model = cost_matrices(sys_)
        for x, y in cfg.pairs:
            rows.append({"x": x, "y": y, "cost": eval_cost(model, x, y),
                         "p0": initial_adjoint(model, x, y)})
    elif report.d == 0:
        for x, y in cfg.pairs:
            rows.append({"x": x, "y": y, "cost": _free_pair(sys_, x, y), "p0": None})
    else:
        nc = NoncontrollableCost(sys_, report, cfg.options["fiber_eps"])
        for x, y in cfg.pairs:
            c, p0, _ = _noncontrollable_pair(nc, x, y)
            rows.append({"x": x, "y": y, "cost": c, "p0": p0})
    doc = {"d": report.d, "n": sys_.n, "pairs": rows}
    write_json(os.path.join(out, "cost.json"), doc)
    return doc, "cost: " + " ".join(_plain(r["cost"]).__repr__() for r in rows)


def cmd_trajectory(cfg, out):
    sys_ = cfg.system
    n, m = sys_.n, sys_.m
    report = kalman_decomposition(sys_.A, sys_.B)
    if not cfg.pairs:
        raise ConfigError("trajectory needs at least one pair", "pairs")
    N = cfg.options["trajectory_N"]
    header = ["t"] + [f"x{i + 1}" for i in range(n)] + [f"p{i + 1}" for i in range(n)] + [f"u{i + 1}" for i in range(m)]
    summary = []
    model = cost_matrices(sys_) if report.is_controllable else None
    nc = None if report.is_controllable or report.d == 0 else NoncontrollableCost(sys_, report, cfg.options["fiber_eps"])
    for k, (x, y) in enumerate(cfg.pairs):
        name = f"trajectory_{k}.csv"
        if model is not None:
            tr = optimal_trajectory(sys_, model, x, y, N)
            closed = eval_cost(model, x, y)
            times, states, adj, ctrl, running = tr.times, tr.states, tr.adjoints, tr.controls, tr.running_cost
        elif nc is None:
            closed = _free_pair(sys_, x, y)
            if math.isinf(closed):
                summary.append({"pair": k, "cost": closed, "file": None})
                continue
            times = np.linspace(0.0, 1.0, N + 1)
            states = matrix_exponential(sys_.A, times) @ x
            adj = np.zeros((N + 1, n))
            ctrl = np.zeros((N + 1, m))
            running = float(np.mean(free_motion_cost(sys_, x)))
        else:
            closed, _, fcm = _noncontrollable_pair(nc, x, y)
            if fcm is None:
                summary.append({"pair": k, "cost": closed, "file": None})
                continue
            d = report.d
            ft = fiber_trajectory(nc.dyn, fcm, nc.dyn.to_kalman(x)[:d], nc.dyn.to_kalman(y)[:d], N)
            times, states, ctrl, running = ft.times, ft.states, ft.controls, ft.running_cost
            # controllable-block adjoint embedded in original coordinates
            adj = report.from_kalman(np.hstack([ft.adjoints, np.zeros((N + 1, n - d))]))
        write_csv(os.path.join(out, name), header, np.hstack([times[:, None], states, adj, ctrl]))
        summary.append({
            "pair": k, "cost": closed, "running_cost": running,
            "rel_error": abs(running - closed) / max(abs(closed), 1e-300),
            "endpoint_error": float(np.abs(states[-1] - y).max()), "file": name,
        })
    doc = {"N": N, "trajectories": summary}
    write_json(os.path.join(out, "trajectory.json"), doc)
    return doc, f"trajectory: {len(summary)} pair(s)"


def _solve_controllable(cfg, mu0, mu1):
    model = cost_matrices(cfg.system)
    C = pairwise_cost(model, mu0.points, mu1.points)
    plan, duals = solve_discrete_ot(C, mu0, mu1)
    mono = cyclical_monotonicity_check(plan, mu0, mu1, model.E,
                                       random_cycles=cfg.options["random_cycles"], seed=cfg.seed % 2**32)
    _, cert = quadratic_reduction(model, mu0, mu1)
    try:
        mapping = [{"i": i, "j": j} for i, j in plan_to_map(plan)]
    except NotDeterministic as exc:
        mapping = {"deterministic": False, "split_sources": exc.split_sources}
    doc = {
        "controllable": True,
        "plan": _plan_doc(plan),
        "duals": {"psi": duals.psi, "psi_c": duals.psi_c,
                  "dual_value": duals.value(mu0.weights, mu1.weights),
                  "duality_gap": plan.total_cost - duals.value(mu0.weights, mu1.weights)},
        "map": mapping,
        "monotonicity": {"passed": mono.passed, "min_cycle_slack": mono.min_cycle_slack,
                         "scale": mono.scale, "exhaustive_length": mono.exhaustive_length,
                         "random_cycles": mono.random_cycles},
        "quadratic_reduction": {"passed": cert.passed, "max_residual": cert.max_residual},
    }
    return plan, doc


def _solve_fibered(cfg, mu0, mu1):
    sol = solve_noncontrollable(cfg.system, mu0, mu1, tol=cfg.options["tol"], eps=cfg.options["fiber_eps"])
    plan = sol.plan
    fibers = [
        {"source_label": f.source_label, "target_label": f.target_label, "mass": f.mass, "cost": f.cost,
         "source_indices": f.source_indices, "target_indices": f.target_indices}
        for f in sol.fibers
    ]
    try:
        mapping = [{"i": i, "j": j} for i, j in plan_to_map(plan)]
    except NotDeterministic as exc:
        mapping = {"deterministic": False, "split_sources": exc.split_sources}
    doc = {
        "controllable": False,
        "d": sol.d,
        "plan": _plan_doc(plan),
        "map": mapping,
        "fibers": fibers,
        "compatibility": sol.compatibility.as_dict() if sol.compatibility else None,
    }
    return plan, doc


def cmd_solve(cfg, out):
    mu0, mu1 = cfg.measure("source"), cfg.measure("target")
    if mu0.dim != mu1.dim or mu0.dim != cfg.system.n:
        raise ConfigError(f"measures must live in R^{cfg.system.n}", "target")
    report = kalman_decomposition(cfg.system.A, cfg.system.B)
    if report.is_controllable:
        plan, doc = _solve_controllable(cfg, mu0, mu1)
    else:
        plan, doc = _solve_fibered(cfg, mu0, mu1)
    write_json(os.path.join(out, "solve.json"), doc)
    _write_plan(out, plan)
    return doc, f"solve: total_cost={plan.total_cost!r} couplings={len(plan.rows)}"


def cmd_sample(cfg, out):
    doc = {"seed": cfg.seed}
    for which in ("source", "target"):
        if getattr(cfg, which) is None:
            continue
        mu = cfg.measure(which)
        header = [f"x{i + 1}" for i in range(mu.dim)] + ["weight"]
        write_csv(os.path.join(out, f"{which}.csv"), header, np.hstack([mu.points, mu.weights[:, None]]))
        doc[which] = {"atoms": len(mu), "mean": mu.mean(), "file": f"{which}.csv"}
    if len(doc) == 1:
        raise ConfigError("no measure to sample", "source")
    write_json(os.path.join(out, "sample.json"), doc)
    return doc, f"sample: {', '.join(k for k in doc if k != 'seed')}"


# --- check ------------------------------------------------------------------


def _check(name, passed, **values):
    return {"name": name, "passed": bool(passed), **values}


def _suite_controllable(cfg, pairs):
    sys_ = cfg.system
    model = cost_matrices(sys_)
    out = []
    R = matrix_exponential(hamiltonian_matrix(sys_), np.array([0.25, 0.5, 0.75, 1.0]))
    J = symplectic_form(sys_.n)
    sym = float(np.abs(np.swapaxes(R, -1, -2) @ J @ R - J).max())
    rel = max(model.residuals["C"], model.residuals["Q1"])
    out.append(_check("structural_identities", rel <= 1e-9 and sym <= 1e-10,
                      relation_residual=rel, symplectic_residual=sym,
                      D_min_eig=model.residuals["D_min_eig"], F_min_eig=model.residuals["F_min_eig"]))
    for k, (x, y) in enumerate(pairs):
        c = eval_cost(model, x, y)
        tr = optimal_trajectory(sys_, model, x, y, 4096)
        err = abs(tr.running_cost - c) / max(c, 1e-300)
        values = {"pair": k, "cost": c, "trajectory_rel_error": err}
        ok = err <= 1e-6
        if not np.any(sys_.W):
            g = grammian_cost(sys_, x, y)
            values["grammian_rel_error"] = abs(g - c) / max(c, 1e-300)
            ok = ok and values["grammian_rel_error"] <= 1e-8
        out.append(_check("triple_consistency", ok, **values))

    Ks = sorted(cfg.options["oracle_K"])
    for k, (x, y) in enumerate(pairs[:1]):
        c = eval_cost(model, x, y)
        vals = [min_cost_piecewise(sys_, x, y, K)[0] for K in Ks]
        monotone = all(b <= a + 1e-10 * max(1.0, abs(a)) for a, b in zip(vals, vals[1:]))
        lower = all(v >= c - 1e-8 for v in vals)
        rich = extrapolated_min_cost(sys_, x, y, Ks[-1])
        rich_gap = abs(rich - c) / max(1.0, c)
        out.append(_check(
            "oracle", monotone and lower and rich_gap <= cfg.options["oracle_gap"],
            pair=k, cost=c, K=Ks, values=vals, gap=vals[-1] - c,
            gap_within_bound=vals[-1] - c <= cfg.options["oracle_gap"],
            monotone=monotone, lower_bound=lower, extrapolated=rich, extrapolated_gap=rich_gap,
        ))
    return out, model


def _suite_measures_controllable(cfg, model, mu0, mu1):
    tol = cfg.options["tol"]
    C = pairwise_cost(model, mu0.points, mu1.points)
    plan, duals = solve_discrete_ot(C, mu0, mu1)
    scale = 1.0 + np.abs(C).max()
    gap = abs(plan.total_cost - duals.value(mu0.weights, mu1.weights))
    out = [_check(
        "duality",
        gap <= tol * scale and duals.feasibility_violation(C) <= tol * scale
        and duals.slackness_violation(C, plan) <= tol * scale
        and plan.marginal_error(mu0.weights, mu1.weights) <= 1e-10,
        duality_gap=gap, feasibility=duals.feasibility_violation(C),
        slackness=duals.slackness_violation(C, plan),
        marginal_error=plan.marginal_error(mu0.weights, mu1.weights),
    )]
    mono = cyclical_monotonicity_check(plan, mu0, mu1, model.E,
                                       random_cycles=cfg.options["random_cycles"], seed=cfg.seed % 2**32)
    out.append(_check("monotonicity", mono.passed, min_cycle_slack=mono.min_cycle_slack, scale=mono.scale))
    if len(mu0) <= 5 and len(mu1) <= 5 or (len(mu0) == len(mu1) <= 8 and np.ptp(mu0.weights) == 0 and np.ptp(mu1.weights) == 0):
        ref = enumerate_ot(C, mu0.weights, mu1.weights)
        out.append(_check("enumeration", abs(ref.total_cost - plan.total_cost) <= tol * scale,
                          solver=plan.total_cost, enumeration=ref.total_cost))
    return out


def _suite_fibered(cfg, report, pairs):
    sys_ = cfg.system
    out = []
    if report.d == 0:
        for k, (x, y) in enumerate(pairs):
            c = _free_pair(sys_, x, y)
            v = min_cost_piecewise(sys_, x, y, 1)[0] if np.isfinite(c) else float("inf")
            err = abs(v - c) / max(abs(c), 1.0) if np.isfinite(c) else 0.0
            out.append(_check("oracle", err <= 1e-8, pair=k, cost=c, oracle=v))
        return out
    nc = NoncontrollableCost(sys_, report, cfg.options["fiber_eps"])
    d = report.d
    K = max(cfg.options["oracle_K"])
    for k, (x, y) in enumerate(pairs):
        c, _, fcm = _noncontrollable_pair(nc, x, y)
        if fcm is None:
            # the only admissible answer off the fiber
            out.append(_check("off_fiber", math.isinf(c), pair=k, cost=c))
            continue
        ft = fiber_trajectory(nc.dyn, fcm, nc.dyn.to_kalman(x)[:d], nc.dyn.to_kalman(y)[:d], 4096)
        terr = abs(ft.running_cost - c) / max(c, 1e-300)
        rel = fcm.residuals["v"]
        out.append(_check("triple_consistency", terr <= 1e-6 and rel <= 1e-8,
                          pair=k, cost=c, trajectory_rel_error=terr, fiber_relation=rel))
        if k == 0:
            rich = extrapolated_min_cost(sys_, x, y, K // 2 if K > 1 else 1)
            err = abs(rich - c) / max(1.0, c)
            out.append(_check("oracle", err <= 1e-6, pair=k, cost=c, extrapolated=rich, error=err))
    return out


def _suite_measures_fibered(cfg, report, mu0, mu1):
    tol = cfg.options["tol"]
    sol = solve_noncontrollable(cfg.system, mu0, mu1, report, tol=tol, eps=cfg.options["fiber_eps"])
    plan = sol.plan
    merr = plan.marginal_error(mu0.weights, mu1.weights)
    out = [_check("marginals", merr <= 1e-12, marginal_error=merr)]
    if sol.d == 0:
        return out
    nc = NoncontrollableCost(cfg.system, report, sol.compatibility.eps)
    worst_gap, mono_ok, slack = 0.0, True, None
    for f in sol.fibers:
        a = f.plan.row_sums()
        b = f.plan.col_sums()
        worst_gap = max(worst_gap, abs(f.plan.total_cost - f.duals.value(a, b)) / (1.0 + np.abs(f.costs).max()))
        if f.single_label:
            dd = report.d
            k0 = DiscreteMeasure(report.to_kalman(mu0.points[f.source_indices])[:, :dd], a)
            k1 = DiscreteMeasure(report.to_kalman(mu1.points[f.target_indices])[:, :dd], b)
            E = nc.model(f.source_label).E
            m = cyclical_monotonicity_check(f.plan, k0, k1, E, random_cycles=cfg.options["random_cycles"],
                                            seed=cfg.seed % 2**32)
            mono_ok = mono_ok and m.passed
            if m.min_cycle_slack is not None:
                slack = m.min_cycle_slack if slack is None else min(slack, m.min_cycle_slack)
    out.append(_check("duality", worst_gap <= tol, worst_relative_gap=worst_gap))
    out.append(_check("monotonicity", mono_ok, min_cycle_slack=slack))
    recomputed = sum(m * nc(mu0.points[i], mu1.points[j]) for i, j, m in zip(plan.rows, plan.cols, plan.masses))
    out.append(_check("fiber_assembly", abs(recomputed - plan.total_cost) <= 1e-8 * max(1.0, abs(plan.total_cost)),
                      total_cost=plan.total_cost, recomputed=recomputed))
    return out


def cmd_check(cfg, out):
    report = kalman_decomposition(cfg.system.A, cfg.system.B)
    pairs = _default_pairs(cfg, report)
    if report.is_controllable:
        checks, model = _suite_controllable(cfg, pairs)
    else:
        checks, model = _suite_fibered(cfg, report, pairs), None
    if cfg.source is not None and cfg.target is not None:
        mu0, mu1 = cfg.measure("source"), cfg.measure("target")
        if model is not None:
            checks += _suite_measures_controllable(cfg, model, mu0, mu1)
        else:
            checks += _suite_measures_fibered(cfg, report, mu0, mu1)
    passed = all(c["passed"] for c in checks)
    doc = {"passed": passed, "checks": checks}
    write_json(os.path.join(out, "check.json"), doc)
    failed = [c["name"] for c in checks if not c["passed"]]
    summary = "check: all passed" if passed else "check: failed " + ", ".join(failed)
    return doc, summary


COMMANDS = {
    "analyze": cmd_analyze,
    "cost": cmd_cost,
    "solve": cmd_solve,
    "trajectory": cmd_trajectory,
    "check": cmd_check,
    "sample": cmd_sample,
}


def _parser():
    p = argparse.ArgumentParser(prog="lqot", description="Optimal transport under linear-quadratic control costs.")
    p.add_argument("verb", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, help="JSON problem document")
    p.add_argument("--out", default="lqot-out", help="output directory (default: lqot-out)")
    p.add_argument("--seed", type=int, default=None, help="64-bit seed overriding the config")
    p.add_argument("--tol", type=float, default=None, help="tolerance override in [1e-15, 1e-2]")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ConfigError("seed must be an unsigned 64-bit integer", "--seed")
            cfg = cfg.with_seed(args.seed)
        if args.tol is not None:
            cfg = cfg.with_tol(args.tol)
        os.makedirs(args.out, exist_ok=True)
        doc, summary = COMMANDS[args.verb](cfg, args.out)
    except IncompatibleMarginals as exc:
        info = {"error": "incompatible marginals", "message": str(exc), "discrepancy": exc.discrepancy}
        if exc.report is not None and hasattr(exc.report, "as_dict"):
            info["report"] = exc.report.as_dict()
        if os.path.isdir(args.out):
            write_json(os.path.join(args.out, f"{args.verb}.json"), info)
        print(json.dumps(_plain(info), sort_keys=True), file=sys.stderr)
        return EXIT_INCOMPATIBLE
    except (ConfigError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except LQOTError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(summary)
    if args.verb == "check" and not doc["passed"]:
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
