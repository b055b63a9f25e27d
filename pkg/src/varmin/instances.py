"""Scenario problem data: loss matrix, probabilities, confidence level, and
the feasible polytope, plus generation, validation, and file round-tripping.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .lp import INFEASIBLE, UNBOUNDED, LpModel, solve_lp

PROB_TOL = 1e-12


class BadProbabilities(Exception):
    """Scenario probabilities are not a positive vector summing to one."""


class UnboundedPolytope(Exception):
    """Some coordinate of the feasible set is unbounded."""


class ParseError(Exception):
    """Malformed instance file."""


@dataclass
class Polytope:
    """Feasible set {x : A_eq x = b_eq, A_ub x <= b_ub, lower <= x <= upper}.

    abs_bound is a vector a with |x| <= a over the whole set; validate()
    fills it from 2n bound LPs when absent. nonneg is derived from lower.
    """

    eq: tuple[np.ndarray, np.ndarray]
    ineq: tuple[np.ndarray, np.ndarray]
    lower: np.ndarray
    upper: np.ndarray
    abs_bound: np.ndarray | None = None
    nonneg: bool = field(init=False)

    def __post_init__(self):
        self.eq = (np.atleast_2d(np.asarray(self.eq[0], dtype=float)),
                   np.asarray(self.eq[1], dtype=float).ravel())
        self.ineq = (np.atleast_2d(np.asarray(self.ineq[0], dtype=float)),
                     np.asarray(self.ineq[1], dtype=float).ravel())
        self.lower = np.asarray(self.lower, dtype=float).ravel()
        self.upper = np.asarray(self.upper, dtype=float).ravel()
        if self.abs_bound is not None:
            self.abs_bound = np.asarray(self.abs_bound, dtype=float).ravel()
        self.nonneg = bool(np.all(self.lower >= 0.0))

    @property
    def dim(self) -> int:
        return self.lower.size

    def install(self, model: LpModel, prefix: str = "x") -> list[int]:
        """Add one bounded variable per coordinate plus all polytope rows."""
        cols = [model.add_var(f"{prefix}{j}", self.lower[j], self.upper[j])
                for j in range(self.dim)]
        Aeq, beq = self.eq
        for i in range(Aeq.shape[0]):
            model.add_row({cols[j]: Aeq[i, j] for j in range(self.dim)}, "=", beq[i])
        Aub, bub = self.ineq
        for i in range(Aub.shape[0]):
            model.add_row({cols[j]: Aub[i, j] for j in range(self.dim)}, "<=", bub[i])
        return cols

    def contains(self, x: np.ndarray, tol: float = 1e-7) -> bool:
        x = np.asarray(x, dtype=float)
        Aeq, beq = self.eq
        Aub, bub = self.ineq
        if Aeq.size and np.max(np.abs(Aeq @ x - beq)) > tol:
            return False
        if Aub.size and np.max(Aub @ x - bub) > tol:
            return False
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))


def simplex_polytope(n: int) -> Polytope:
    """The standard probability simplex in dimension n."""
    return Polytope(eq=(np.ones((1, n)), np.array([1.0])),
                    ineq=(np.zeros((0, n)), np.zeros(0)),
                    lower=np.zeros(n), upper=np.full(n, math.inf))


@dataclass
class Instance:
    """One scenario-based portfolio loss problem."""

    n: int
    k: int
    beta: float
    probs: np.ndarray
    losses: np.ndarray
    polytope: Polytope

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=float).ravel()
        self.losses = np.atleast_2d(np.asarray(self.losses, dtype=float))
        self.beta = float(self.beta)
        if self.probs.size != self.k:
            raise ValueError(f"expected {self.k} probabilities, got {self.probs.size}")
        if self.losses.shape != (self.k, self.n):
            raise ValueError(f"losses must be {self.k}x{self.n}, got {self.losses.shape}")
        if self.polytope.dim != self.n:
            raise ValueError("polytope dimension does not match asset count")

    @property
    def caps(self) -> np.ndarray:
        """Upper bounds p_i/(1-beta) on the scenario dual weights."""
        return self.probs / (1.0 - self.beta)

    def scenario_losses(self, x: np.ndarray) -> np.ndarray:
        return self.losses @ np.asarray(x, dtype=float)

    def with_beta(self, beta: float) -> "Instance":
        return Instance(self.n, self.k, beta, self.probs.copy(),
                        self.losses.copy(), self.polytope)

    def __eq__(self, other):
        if not isinstance(other, Instance):
            return NotImplemented
        mine, theirs = self.polytope, other.polytope
        return (self.n == other.n and self.k == other.k and self.beta == other.beta
                and np.array_equal(self.probs, other.probs)
                and np.array_equal(self.losses, other.losses)
                and np.array_equal(mine.eq[0], theirs.eq[0])
                and np.array_equal(mine.eq[1], theirs.eq[1])
                and np.array_equal(mine.ineq[0], theirs.ineq[0])
                and np.array_equal(mine.ineq[1], theirs.ineq[1])
                and np.array_equal(mine.lower, theirs.lower)
                and np.array_equal(mine.upper, theirs.upper))


@dataclass
class ValidationReport:
    ok: bool
    problems: list[str]
    abs_bound: np.ndarray | None


def validate(inst: Instance) -> ValidationReport:
    """Check instance invariants and probe the polytope with 2n bound LPs.

    Fills inst.polytope.abs_bound from the probes when absent. Raises
    BadProbabilities or UnboundedPolytope; an empty polytope is reported,
    not raised.
    """
    problems: list[str] = []
    if not (0.0 < inst.beta < 1.0):
        raise ValueError(f"beta must lie in (0,1), got {inst.beta}")
    if np.any(inst.probs <= 0.0):
        raise BadProbabilities("all scenario probabilities must be positive")
    if abs(inst.probs.sum() - 1.0) > PROB_TOL:
        raise BadProbabilities(f"probabilities sum to {inst.probs.sum()!r}, not 1")

    poly = inst.polytope
    lo_opt = np.empty(inst.n)
    hi_opt = np.empty(inst.n)
    vertices = []
    for j in range(inst.n):
        for sense, target in ((1.0, lo_opt), (-1.0, hi_opt)):
            model = LpModel()
            cols = poly.install(model)
            model.set_objective({cols[j]: sense})
            sol = solve_lp(model)
            if sol.status == UNBOUNDED:
                raise UnboundedPolytope(f"coordinate {j} is unbounded over X")
            if sol.status == INFEASIBLE:
                return ValidationReport(False, ["polytope is empty"], None)
            target[j] = sense * sol.objective
            vertices.append(sol.x)
    bound = np.maximum(np.abs(lo_opt), np.abs(hi_opt))
    if poly.abs_bound is None:
        poly.abs_bound = bound
    else:
        for v in vertices:
            if np.any(np.abs(v) > poly.abs_bound + 1e-9):
                problems.append("declared abs_bound does not dominate probed vertices")
                break
    return ValidationReport(not problems, problems, poly.abs_bound)


def example_instance(beta: float = 0.9) -> Instance:
    """The bundled 27-scenario, 3-asset demonstration instance.

    Scenario j (1-based) combines one entry from each of three per-asset loss
    menus: j = 9*(i1-1) + 3*(i2-1) + i3 over i1,i2,i3 in {1,2,3}, a bijection
    onto {1..27}. The feasible set is the simplex sliced by a minimum-return
    constraint r.x >= 1/10 with r = (-1/3, 2/3, -1).
    """
    n, k = 3, 27
    menus = np.array([[5.0, 0.0, -6.0],
                      [7.0, 0.0, -5.0],
                      [2.0, 0.0, -5.0]])
    losses = np.zeros((k, n))
    for i1 in range(3):
        for i2 in range(3):
            for i3 in range(3):
                j = 9 * i1 + 3 * i2 + i3
                losses[j] = (menus[0, i1], menus[1, i2], menus[2, i3])
    r = np.array([-1.0 / 3.0, 2.0 / 3.0, -1.0])
    poly = Polytope(eq=(np.ones((1, n)), np.array([1.0])),
                    ineq=(-r[None, :], np.array([-0.1])),
                    lower=np.zeros(n), upper=np.full(n, math.inf))
    return Instance(n=n, k=k, beta=beta, probs=np.full(k, 1.0 / k),
                    losses=losses, polytope=poly)


def random_instance(seed, n: int = 3, k: int = 4, beta: float | None = None,
                    extra_row: bool | None = None) -> Instance:
    """Small random instance over a (possibly sliced) simplex, for testing."""
    rng = np.random.default_rng(seed)
    weights = rng.integers(1, 6, size=k).astype(float)
    probs = weights / weights.sum()
    losses = np.round(rng.uniform(-5.0, 5.0, size=(k, n)), 3)
    if beta is None:
        beta = round(float(rng.uniform(0.3, 0.95)), 3)
    poly = simplex_polytope(n)
    if extra_row is None:
        extra_row = bool(rng.integers(0, 2))
    if extra_row:
        g = np.round(rng.normal(0.0, 1.0, n), 3)
        anchors = rng.dirichlet(np.ones(n), size=3)
        rhs = float(np.min(anchors @ g)) - 0.05
        poly = Polytope(eq=poly.eq, ineq=(-g[None, :], np.array([-rhs])),
                        lower=poly.lower, upper=poly.upper)
    return Instance(n=n, k=k, beta=beta, probs=probs, losses=losses, polytope=poly)


# ---------------------------------------------------------------------------
# file format


def _fmt_num(v: float) -> str:
    if math.isnan(v) or math.isinf(v):
        raise ValueError("non-finite value in instance data")
    return format(float(v), ".17g")


def _fmt_bound(v: float) -> str:
    return "null" if math.isinf(v) else _fmt_num(v)


def _fmt_arr(vals, fmt=_fmt_num) -> str:
    return "[" + ", ".join(fmt(v) for v in vals) + "]"


def dumps(inst: Instance) -> str:
    """Serialize to the instance JSON document (17 significant digits)."""
    poly = inst.polytope
    eq_rows = [list(row) + [rhs] for row, rhs in zip(poly.eq[0], poly.eq[1])]
    ineq_rows = [list(row) + [rhs] for row, rhs in zip(poly.ineq[0], poly.ineq[1])]
    lines = ["{"]
    lines.append(f'  "n": {inst.n},')
    lines.append(f'  "k": {inst.k},')
    lines.append(f'  "beta": {_fmt_num(inst.beta)},')
    lines.append(f'  "probs": {_fmt_arr(inst.probs)},')
    lines.append('  "losses": [')
    for i, row in enumerate(inst.losses):
        comma = "," if i + 1 < inst.k else ""
        lines.append(f"    {_fmt_arr(row)}{comma}")
    lines.append("  ],")
    lines.append('  "polytope": {')
    lines.append('    "eq": [' + ", ".join(_fmt_arr(r) for r in eq_rows) + "],")
    lines.append('    "ineq": [' + ", ".join(_fmt_arr(r) for r in ineq_rows) + "],")
    lines.append(f'    "lower": {_fmt_arr(poly.lower, _fmt_bound)},')
    upper_line = f'    "upper": {_fmt_arr(poly.upper, _fmt_bound)}'
    if poly.abs_bound is not None:
        lines.append(upper_line + ",")
        lines.append(f'    "abs_bound": {_fmt_arr(poly.abs_bound)}')
    else:
        lines.append(upper_line)
    lines.append("  }")
    lines.append("}")
    return "\n".join(lines) + "\n"


def save(inst: Instance, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(inst))


def _require(doc: dict, key: str, where: str = "instance"):
    if key not in doc:
        raise ParseError(f"{where} is missing required field {key!r}")
    return doc[key]


def loads(text: str) -> Instance:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"not valid JSON: line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ParseError("instance document must be a JSON object")
    n = _require(doc, "n")
    k = _require(doc, "k")
    beta = _require(doc, "beta")
    probs = _require(doc, "probs")
    losses = _require(doc, "losses")
    pdoc = _require(doc, "polytope")
    if not isinstance(n, int) or not isinstance(k, int) or n < 1 or k < 1:
        raise ParseError("n and k must be positive integers")
    if len(probs) != k:
        raise ParseError(f"field probs has {len(probs)} entries, header says k={k}")
    if len(losses) != k:
        raise ParseError(f"field losses has {len(losses)} rows, header says k={k}")
    for i, row in enumerate(losses):
        if len(row) != n:
            raise ParseError(f"losses row {i} has {len(row)} entries, header says n={n}")

    def split_rows(rows, label):
        mat, rhs = [], []
        for i, row in enumerate(rows):
            if len(row) != n + 1:
                raise ParseError(f"polytope.{label} row {i} must have {n}+1 entries")
            mat.append(row[:n])
            rhs.append(row[n])
        return (np.array(mat, dtype=float).reshape(len(rows), n),
                np.array(rhs, dtype=float))

    eq = split_rows(_require(pdoc, "eq", "polytope"), "eq")
    ineq = split_rows(_require(pdoc, "ineq", "polytope"), "ineq")
    lower = _require(pdoc, "lower", "polytope")
    upper = _require(pdoc, "upper", "polytope")
    if len(lower) != n or len(upper) != n:
        raise ParseError("polytope bounds must have n entries")
    lo = np.array([-math.inf if v is None else float(v) for v in lower])
    up = np.array([math.inf if v is None else float(v) for v in upper])
    ab = pdoc.get("abs_bound")
    poly = Polytope(eq=eq, ineq=ineq, lower=lo, upper=up,
                    abs_bound=None if ab is None else np.array(ab, dtype=float))
    try:
        return Instance(n=n, k=k, beta=float(beta), probs=probs,
                        losses=losses, polytope=poly)
    except ValueError as exc:
        raise ParseError(str(exc)) from exc


def load(path) -> Instance:
    with open(path, "r", encoding="utf-8") as fh:
        return loads(fh.read())


def digest(inst: Instance) -> str:
    """Short content hash of the serialized instance."""
    return hashlib.sha256(dumps(inst).encode()).hexdigest()[:12]
