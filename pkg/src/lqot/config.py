"""JSON problem documents.

A document looks like::

    {
      "system": {"A": [[0, 1], [0, 0]], "B": [[0], [1]], "W": ..., "U": [[1]]},
      "source": {"points": [[0, 0]], "weights": [1]},
      "target": {"density": "1", "box": [[0, 1], [0, 1]], "N": 20, "seed": 3},
      "pairs": [[[0, 0], [1, 0]]],
      "options": {"tol": 1e-9, "trajectory_N": 256, "oracle_K": [4, 8, 16, 32, 64]},
      "seed": 0
    }

``W`` defaults to zero and ``U`` to the identity. Errors carry the JSON path
of the offending field, for example ``system.A[1]``.
"""

from __future__ import annotations

import ast
import json
import math
import operator
from dataclasses import dataclass, replace
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from .errors import ConfigError, ShapeMismatch, ValidationError
from .linsys import LinearQuadraticSystem, validate_system
from .transport import DiscreteMeasure, make_measure, sample_box

TOL_MIN, TOL_MAX = 1e-15, 1e-2
SEED_MAX = 2**64 - 1

DEFAULT_OPTIONS = {
    "tol": 1e-9,
    "trajectory_N": 256,
    "oracle_K": [4, 8, 16, 32, 64],
    "oracle_gap": 1e-3,
    "fiber_eps": None,
    "random_cycles": 10000,
    "max_pivots": None,
}
_TOL_KEYS = ("tol", "oracle_gap", "fiber_eps")


# --- density expressions ----------------------------------------------------

_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}
_UNOPS = {ast.USub: operator.neg, ast.UAdd: operator.pos}
_FUNCS = {
    "exp": np.exp, "log": np.log, "sqrt": np.sqrt, "sin": np.sin, "cos": np.cos,
    "abs": np.abs, "min": np.minimum, "max": np.maximum,
}
_COMPARE = {
    ast.Lt: operator.lt, ast.LtE: operator.le, ast.Gt: operator.gt, ast.GtE: operator.ge,
}


def compile_density(expr: str, dim: int, path: str = "density") -> Callable[[np.ndarray], np.ndarray]:
    """Turn an arithmetic expression in ``x1 .. xn`` into a vectorized density.

    Allowed: numbers, ``+ - * / **``, comparisons (as 0/1 indicators) and
    the functions exp, log, sqrt, sin, cos, abs, min, max.
    """
    try:
        tree = ast.parse(expr, mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"cannot parse density: {exc.msg}", path) from None
    names = {f"x{i + 1}": i for i in range(dim)}

    def check(node):
        if isinstance(node, ast.Expression):
            return check(node.body)
        if isinstance(node, ast.Constant):
            if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
                raise ConfigError(f"unsupported literal {node.value!r}", path)
            return
        if isinstance(node, ast.Name):
            if node.id not in names:
                raise ConfigError(f"unknown variable {node.id!r}; use x1..x{dim}", path)
            return
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            check(node.left)
            check(node.right)
            return
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNOPS:
            check(node.operand)
            return
        if isinstance(node, ast.Compare) and all(type(o) in _COMPARE for o in node.ops):
            check(node.left)
            for c in node.comparators:
                check(c)
            return
        if (
            isinstance(node, ast.Call)
            and isinstance(node.func, ast.Name)
            and node.func.id in _FUNCS
            and not node.keywords
        ):
            want = 2 if node.func.id in ("min", "max") else 1
            if len(node.args) != want:
                raise ConfigError(f"{node.func.id} takes {want} argument(s)", path)
            for a in node.args:
                check(a)
            return
        raise ConfigError(f"unsupported syntax: {ast.dump(node)[:60]}", path)

    check(tree)

    def ev(node, X):
        if isinstance(node, ast.Expression):
            return ev(node.body, X)
        if isinstance(node, ast.Constant):
            return float(node.value)
        if isinstance(node, ast.Name):
            return X[:, names[node.id]]
        if isinstance(node, ast.BinOp):
            return _BINOPS[type(node.op)](ev(node.left, X), ev(node.right, X))
        if isinstance(node, ast.UnaryOp):
            return _UNOPS[type(node.op)](ev(node.operand, X))
        if isinstance(node, ast.Compare):
            left = ev(node.left, X)
            out = True
            for op, c in zip(node.ops, node.comparators):
                right = ev(c, X)
                out = out & _COMPARE[type(op)](left, right)
                left = right
            return np.asarray(out, dtype=float)
        return _FUNCS[node.func.id](*(ev(a, X) for a in node.args))

    def density(X):
        X = np.atleast_2d(X)
        with np.errstate(all="ignore"):
            val = np.broadcast_to(np.asarray(ev(tree, X), dtype=float), (len(X),))
        if not np.all(np.isfinite(val)):
            raise ConfigError("density is not finite on the box", path)
        return np.array(val)

    return density


# --- field readers ----------------------------------------------------------


def _matrix(raw, path, rows=None, cols=None):
    if not isinstance(raw, list) or not raw:
        raise ConfigError("expected a non-empty list of rows", path)
    width = None
    for i, row in enumerate(raw):
        if not isinstance(row, list):
            raise ConfigError("expected a list of numbers", f"{path}[{i}]")
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise _shape(f"row has {len(row)} entries, expected {width}", f"{path}[{i}]")
        for j, v in enumerate(row):
            _number(v, f"{path}[{i}][{j}]")
    M = np.array(raw, dtype=float)
    if rows is not None and M.shape[0] != rows:
        raise _shape(f"expected {rows} rows, got {M.shape[0]}", path)
    if cols is not None and M.shape[1] != cols:
        raise _shape(f"expected {cols} columns, got {M.shape[1]}", path)
    return M


def _shape(message, path):
    return ShapeMismatch(f"{path}: {message}", field=path)


def _number(v, path):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(f"expected a finite number, got {v!r}", path)
    return float(v)


def _integer(v, path, lo=None, hi=None):
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"expected an integer, got {v!r}", path)
    if (lo is not None and v < lo) or (hi is not None and v > hi):
        raise ConfigError(f"{v} outside [{lo}, {hi}]", path)
    return v


def _vector(raw, path, dim):
    if not isinstance(raw, list):
        raise ConfigError("expected a list of numbers", path)
    vals = [_number(v, f"{path}[{i}]") for i, v in enumerate(raw)]
    if len(vals) != dim:
        raise _shape(f"expected {dim} coordinates, got {len(vals)}", path)
    return np.array(vals)


@dataclass(frozen=True)
class SampleSpec:
    density: str
    box: np.ndarray
    N: int
    seed: int
    density_max: Optional[float] = None


@dataclass(frozen=True)
class ProblemConfig:
    system: LinearQuadraticSystem
    source: Optional[object]  # DiscreteMeasure or SampleSpec
    target: Optional[object]
    pairs: List[Tuple[np.ndarray, np.ndarray]]
    options: Dict[str, object]
    seed: int = 0
    path: Optional[str] = None

    def with_seed(self, seed: int) -> "ProblemConfig":
        """Override the global seed and every sampling seed derived from it."""
        src = replace(self.source, seed=seed) if isinstance(self.source, SampleSpec) else self.source
        tgt = replace(self.target, seed=seed + 1) if isinstance(self.target, SampleSpec) else self.target
        return replace(self, source=src, target=tgt, seed=seed)

    def with_tol(self, tol: float) -> "ProblemConfig":
        _check_tol(tol, "--tol")
        return replace(self, options={**self.options, "tol": tol})

    def measure(self, which: str) -> DiscreteMeasure:
        spec = getattr(self, which)
        if spec is None:
            raise ConfigError("measure is required for this command", which)
        if isinstance(spec, DiscreteMeasure):
            return spec
        dens = compile_density(spec.density, self.system.n, f"{which}.density")
        try:
            return sample_box(dens, spec.box, spec.N, spec.seed, spec.density_max)
        except (ValueError, ValidationError) as exc:
            raise ConfigError(str(exc), which) from None


def _check_tol(v, path):
    if not (TOL_MIN <= v <= TOL_MAX):
        raise ConfigError(f"tolerance {v!r} outside [{TOL_MIN}, {TOL_MAX}]", path)
    return v


def _measure(raw, path, dim, default_seed):
    if raw is None:
        return None
    if not isinstance(raw, dict):
        raise ConfigError("expected an object", path)
    if "points" in raw:
        extra = set(raw) - {"points", "weights"}
        if extra:
            raise ConfigError(f"unknown keys {sorted(extra)}", path)
        pts = _matrix(raw["points"], f"{path}.points", cols=dim)
        w = raw.get("weights")
        if w is not None:
            if not isinstance(w, list):
                raise ConfigError("expected a list of numbers", f"{path}.weights")
            w = [_number(v, f"{path}.weights[{i}]") for i, v in enumerate(w)]
            if len(w) != len(pts):
                raise ConfigError(f"{len(w)} weights for {len(pts)} points", f"{path}.weights")
        try:
            return make_measure(pts, w)
        except ValidationError as exc:
            raise ConfigError(str(exc), path) from None
    if "density" in raw:
        extra = set(raw) - {"density", "box", "N", "seed", "max"}
        if extra:
            raise ConfigError(f"unknown keys {sorted(extra)}", path)
        dens = raw["density"]
        if not isinstance(dens, str):
            raise ConfigError("expected an expression string", f"{path}.density")
        compile_density(dens, dim, f"{path}.density")
        box = _matrix(raw.get("box"), f"{path}.box", rows=dim, cols=2)
        if np.any(box[:, 1] <= box[:, 0]):
            raise ConfigError("each box row must be [low, high] with low < high", f"{path}.box")
        N = _integer(raw.get("N"), f"{path}.N", 1, 10**6)
        seed = _integer(raw.get("seed", default_seed), f"{path}.seed", 0, SEED_MAX)
        dmax = raw.get("max")
        if dmax is not None:
            dmax = _number(dmax, f"{path}.max")
        return SampleSpec(dens, box, N, seed, dmax)
    raise ConfigError("measure needs either 'points' or 'density'", path)


def parse_config(doc: dict, path: Optional[str] = None) -> ProblemConfig:
    if not isinstance(doc, dict):
        raise ConfigError("top level must be an object", "$")
    extra = set(doc) - {"system", "source", "target", "pairs", "options", "seed"}
    if extra:
        raise ConfigError(f"unknown keys {sorted(extra)}", "$")
    seed = _integer(doc.get("seed", 0), "seed", 0, SEED_MAX)

    s = doc.get("system")
    if not isinstance(s, dict):
        raise ConfigError("expected an object with A, B and optionally W, U", "system")
    extra = set(s) - {"A", "B", "W", "U"}
    if extra:
        raise ConfigError(f"unknown keys {sorted(extra)}", "system")
    for key in ("A", "B"):
        if key not in s:
            raise ConfigError("missing matrix", f"system.{key}")
    A = _matrix(s["A"], "system.A")
    n = A.shape[0]
    B = _matrix(s["B"], "system.B", rows=n)
    m = B.shape[1]
    W = _matrix(s["W"], "system.W") if "W" in s else np.zeros((n, n))
    U = _matrix(s["U"], "system.U") if "U" in s else np.eye(m)
    try:
        system = validate_system(A, B, W, U)
    except ValidationError as exc:
        where = f"system.{exc.field}" if exc.field else "system"
        raise type(exc)(f"{where}: {exc}", field=where) from None

    source = _measure(doc.get("source"), "source", n, seed)
    target = _measure(doc.get("target"), "target", n, seed + 1 if seed < SEED_MAX else 0)

    pairs = []
    raw_pairs = doc.get("pairs", [])
    if not isinstance(raw_pairs, list):
        raise ConfigError("expected a list of [x, y] pairs", "pairs")
    for k, pr in enumerate(raw_pairs):
        if not isinstance(pr, list) or len(pr) != 2:
            raise ConfigError("expected [x, y]", f"pairs[{k}]")
        pairs.append((_vector(pr[0], f"pairs[{k}][0]", n), _vector(pr[1], f"pairs[{k}][1]", n)))

    options = dict(DEFAULT_OPTIONS)
    raw_opt = doc.get("options", {})
    if not isinstance(raw_opt, dict):
        raise ConfigError("expected an object", "options")
    for key, val in raw_opt.items():
        p = f"options.{key}"
        if key not in DEFAULT_OPTIONS:
            raise ConfigError("unknown option", p)
        if key in _TOL_KEYS:
            options[key] = _check_tol(_number(val, p), p)
        elif key == "trajectory_N":
            options[key] = _integer(val, p, 2, 10**6)
        elif key == "oracle_K":
            if not isinstance(val, list) or not val:
                raise ConfigError("expected a non-empty list of integers", p)
            options[key] = [_integer(v, f"{p}[{i}]", 1, 4096) for i, v in enumerate(val)]
        elif key == "random_cycles":
            options[key] = _integer(val, p, 0, 10**7)
        elif key == "max_pivots":
            options[key] = None if val is None else _integer(val, p, 1, None)
    return ProblemConfig(system, source, target, pairs, options, seed, path)


def load_config(path: str) -> ProblemConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", path) from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg} (line {exc.lineno}, column {exc.colno})", "$") from None
    return parse_config(doc, path)
