"""Sparse linear programs and a bounded-variable primal simplex solver.

Dual sign convention
--------------------
Row multipliers are reported as sensitivities of the optimal objective to the
right-hand side, ``pi_i = d(obj)/d(b_i)``.  For a minimisation this gives
``pi <= 0`` on ``<=`` rows, ``pi >= 0`` on ``>=`` rows and free multipliers on
equality rows, with reduced costs ``d = c - A^T pi``.  Every cut formula in
:mod:`robustmg.formulation` relies on exactly this convention.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np
import scipy.sparse as sp

INF = math.inf

LE, EQ, GE = "<=", "==", ">="

# rows * columns above which backend="auto" hands the model to HiGHS
AUTO_SIMPLEX_MAX_ENTRIES = 20_000
_SENSES = (LE, EQ, GE)


class LpStatus(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"


class LpNumericalError(RuntimeError):
    """Raised when the simplex cannot finish (iteration limit or breakdown)."""


@dataclass(frozen=True)
class Tolerances:
    pivot: float = 1e-9
    feasibility: float = 1e-9
    optimality: float = 1e-9
    certify: float = 1e-7
    degenerate_pivots_before_bland: int = 500
    refactor_every: int = 100


class LinearProgram:
    """Builder for ``min c.x + c0`` subject to sparse rows and variable bounds.

    Variables and rows are appended incrementally; the sparse matrix is
    assembled lazily when a solver asks for it.
    """

    def __init__(self, name: str = "lp"):
        self.name = name
        self.lo: list[float] = []
        self.hi: list[float] = []
        self.cost: list[float] = []
        self.var_tags: list[str] = []
        self.constant = 0.0
        self.row_cols: list[np.ndarray] = []
        self.row_vals: list[np.ndarray] = []
        self.senses: list[str] = []
        self.rhs: list[float] = []
        self.row_tags: list[str] = []
        self._cache = None

    # -- construction -----------------------------------------------------
    @property
    def num_vars(self) -> int:
        return len(self.lo)

    @property
    def num_rows(self) -> int:
        return len(self.senses)

    def add_var(self, lo: float = 0.0, hi: float = INF, cost: float = 0.0, tag: str = "") -> int:
        if lo > hi:
            raise ValueError(f"variable {tag!r}: lower bound {lo} exceeds upper bound {hi}")
        if not math.isfinite(cost):
            raise ValueError(f"variable {tag!r}: non-finite objective coefficient")
        self.lo.append(float(lo))
        self.hi.append(float(hi))
        self.cost.append(float(cost))
        self.var_tags.append(tag)
        self._cache = None
        return len(self.lo) - 1

    def add_row(self, coeffs: Mapping[int, float] | Iterable[tuple[int, float]], sense: str,
                rhs: float, tag: str = "") -> int:
        if sense not in _SENSES:
            raise ValueError(f"unknown sense {sense!r}")
        items = coeffs.items() if isinstance(coeffs, Mapping) else coeffs
        merged: dict[int, float] = {}
        for j, a in items:
            if not 0 <= j < self.num_vars:
                raise IndexError(f"row {tag!r} references unknown variable {j}")
            merged[j] = merged.get(j, 0.0) + float(a)
        cols = np.fromiter(merged.keys(), dtype=np.int64, count=len(merged))
        vals = np.fromiter(merged.values(), dtype=float, count=len(merged))
        keep = vals != 0.0
        self.row_cols.append(cols[keep])
        self.row_vals.append(vals[keep])
        self.senses.append(sense)
        self.rhs.append(float(rhs))
        self.row_tags.append(tag)
        self._cache = None
        return len(self.senses) - 1

    def set_bounds(self, j: int, lo: float, hi: float) -> None:
        if lo > hi:
            raise ValueError(f"variable {self.var_tags[j]!r}: bounds [{lo}, {hi}] are empty")
        self.lo[j] = float(lo)
        self.hi[j] = float(hi)
        self._cache = None

    def copy(self) -> "LinearProgram":
        other = LinearProgram(self.name)
        other.lo = list(self.lo)
        other.hi = list(self.hi)
        other.cost = list(self.cost)
        other.var_tags = list(self.var_tags)
        other.constant = self.constant
        other.row_cols = list(self.row_cols)
        other.row_vals = list(self.row_vals)
        other.senses = list(self.senses)
        other.rhs = list(self.rhs)
        other.row_tags = list(self.row_tags)
        other._cache = self._cache  # the matrix does not depend on bounds, costs or rhs
        return other

    # -- views -------------------------------------------------------------
    def matrix(self) -> sp.csr_matrix:
        if self._cache is None:
            indptr = np.zeros(self.num_rows + 1, dtype=np.int64)
            if self.num_rows:
                indptr[1:] = np.cumsum([len(c) for c in self.row_cols])
                indices = np.concatenate(self.row_cols) if indptr[-1] else np.zeros(0, np.int64)
                data = np.concatenate(self.row_vals) if indptr[-1] else np.zeros(0)
            else:
                indices, data = np.zeros(0, np.int64), np.zeros(0)
            self._cache = sp.csr_matrix((data, indices, indptr), shape=(self.num_rows, self.num_vars))
        return self._cache

    def arrays(self):
        """Return ``(A, senses, b, c, lo, hi)`` as numpy/scipy objects."""
        return (self.matrix(), np.array(self.senses, dtype=object), np.array(self.rhs, dtype=float),
                np.array(self.cost, dtype=float), np.array(self.lo, dtype=float),
                np.array(self.hi, dtype=float))

    def objective(self, x: np.ndarray) -> float:
        return float(np.dot(self.cost, x) + self.constant)

    def row_activity(self, x: np.ndarray) -> np.ndarray:
        return self.matrix() @ np.asarray(x, dtype=float)

    def primal_residual(self, x: np.ndarray) -> float:
        """Largest violation of any row or variable bound at ``x``."""
        x = np.asarray(x, dtype=float)
        ax = self.row_activity(x)
        b = np.array(self.rhs)
        senses = np.array(self.senses, dtype=object)
        viol = np.zeros(self.num_rows)
        le, ge, eq = senses == LE, senses == GE, senses == EQ
        viol[le] = np.maximum(ax[le] - b[le], 0.0)
        viol[ge] = np.maximum(b[ge] - ax[ge], 0.0)
        viol[eq] = np.abs(ax[eq] - b[eq])
        bound_viol = np.maximum(np.maximum(np.array(self.lo) - x, x - np.array(self.hi)), 0.0)
        worst = 0.0
        if viol.size:
            worst = float(viol.max())
        if bound_viol.size:
            worst = max(worst, float(bound_viol.max()))
        return worst

    def dump(self, path) -> None:
        """Write a human-readable listing, one row per line."""
        with open(path, "w") as fh:
            fh.write(dump_text(self))


def _fmt_term(a: float, name: str) -> str:
    sign = "-" if a < 0 else "+"
    return f"{sign} {abs(a):.12g} {name}"


def dump_text(lp: LinearProgram) -> str:
    names = [t or f"x{j}" for j, t in enumerate(lp.var_tags)]
    out = [f"\\ {lp.name}: {lp.num_vars} vars, {lp.num_rows} rows", "minimize"]
    obj = " ".join(_fmt_term(c, names[j]) for j, c in enumerate(lp.cost) if c != 0.0)
    out.append(f"  obj: {obj} + {lp.constant:.12g}")
    out.append("subject to")
    for i in range(lp.num_rows):
        terms = " ".join(_fmt_term(a, names[j]) for j, a in zip(lp.row_cols[i], lp.row_vals[i]))
        tag = lp.row_tags[i] or f"r{i}"
        out.append(f"  {tag}: {terms} {lp.senses[i]} {lp.rhs[i]:.12g}")
    out.append("bounds")
    for j in range(lp.num_vars):
        out.append(f"  {lp.lo[j]:.12g} <= {names[j]} <= {lp.hi[j]:.12g}")
    out.append("end")
    return "\n".join(out) + "\n"


@dataclass
class LpSolution:
    status: LpStatus
    primal: np.ndarray
    duals: np.ndarray
    reduced_costs: np.ndarray
    objective_value: float
    iterations: int = 0
    certificate: np.ndarray | None = None
    backend: str = "simplex"

    @property
    def optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL


@dataclass
class DualCheckReport:
    passed: bool
    primal_residual: float
    dual_residual: float
    complementarity: float
    gap: float
    messages: list[str] = field(default_factory=list)


# ---------------------------------------------------------------------------
# bounded-variable revised simplex
# ---------------------------------------------------------------------------

_BASIC, _AT_LO, _AT_HI, _FREE = 0, 1, 2, 3


class _Simplex:
    """Two-phase primal simplex over ``[A | I | diag(sign)] z = b``.

    Columns ``n..n+m-1`` are row slacks (bounds encode the row sense) and
    ``n+m..n+2m-1`` are phase-one artificials.  The basis inverse is kept
    dense and updated by elementary row operations, with periodic
    reinversion to limit drift.
    """

    def __init__(self, lp: LinearProgram, tol: Tolerances, max_iter: int | None, bounds=None):
        A, senses, b, c, lo, hi = lp.arrays()
        if bounds is not None:
            lo, hi = np.asarray(bounds[0], dtype=float), np.asarray(bounds[1], dtype=float)
        m, n = A.shape
        self.m, self.n, self.tol = m, n, tol
        self.b = b
        self.max_iter = max_iter or 50 * (m + n) + 1000

        slo = np.where(senses == GE, -INF, 0.0)
        shi = np.where(senses == LE, INF, 0.0)
        self.lo = np.concatenate([lo, slo, np.zeros(m)])
        self.hi = np.concatenate([hi, shi, np.full(m, INF)])
        self.c2 = np.concatenate([c, np.zeros(2 * m)])

        x = np.zeros(n + 2 * m)
        state = np.full(n + 2 * m, _AT_LO, dtype=np.int8)
        for j in range(n):
            if math.isfinite(lo[j]):
                x[j], state[j] = lo[j], _AT_LO
            elif math.isfinite(hi[j]):
                x[j], state[j] = hi[j], _AT_HI
            else:
                x[j], state[j] = 0.0, _FREE
        resid = b - A @ x[:n]
        sign = np.ones(m)
        basis = np.empty(m, dtype=np.int64)
        self.n_artificial = 0
        for i in range(m):
            s = n + i
            a = n + m + i
            if slo[i] - tol.feasibility <= resid[i] <= shi[i] + tol.feasibility:
                x[s] = resid[i]
                basis[i] = s
                state[s] = _BASIC
                self.hi[a] = 0.0
            else:
                bound = slo[i] if resid[i] < slo[i] else shi[i]
                x[s] = bound
                state[s] = _AT_LO if bound == slo[i] else _AT_HI
                r = resid[i] - bound
                sign[i] = 1.0 if r >= 0 else -1.0
                x[a] = abs(r)
                basis[i] = a
                state[a] = _BASIC
                self.n_artificial += 1
        self.sign = sign
        self.dense = m * n <= 40_000
        if self.dense:
            self.A = A.toarray()
            self.AT = self.A.T.copy()
        else:
            self.A = A.tocsc()
            self.AT = self.A.T.tocsr()
        self.x = x
        self.state = state
        self.basis = basis
        self.Binv = np.diag(1.0 / sign)
        self.iterations = 0
        self.pivots_since_refactor = 0

    # -- linear algebra ----------------------------------------------------
    def full_column(self, q: int) -> np.ndarray:
        n, m = self.n, self.m
        if q < n:
            if self.dense:
                return self.A[:, q].copy()
            out = np.zeros(m)
            start, end = self.A.indptr[q], self.A.indptr[q + 1]
            out[self.A.indices[start:end]] = self.A.data[start:end]
            return out
        out = np.zeros(m)
        if q < n + m:
            out[q - n] = 1.0
        else:
            out[q - n - m] = self.sign[q - n - m]
        return out

    def column(self, q: int) -> np.ndarray:
        n, m = self.n, self.m
        if q < n:
            if self.dense:
                return self.Binv @ self.A[:, q]
            start, end = self.A.indptr[q], self.A.indptr[q + 1]
            return self.Binv[:, self.A.indices[start:end]] @ self.A.data[start:end]
        if q < n + m:
            return self.Binv[:, q - n].copy()
        return self.Binv[:, q - n - m] * self.sign[q - n - m]

    def pricing(self, cost: np.ndarray, y: np.ndarray) -> np.ndarray:
        n, m = self.n, self.m
        d = np.empty(n + 2 * m)
        d[:n] = cost[:n] - self.AT @ y
        d[n:n + m] = cost[n:n + m] - y
        d[n + m:] = cost[n + m:] - self.sign * y
        return d

    def activity(self, z: np.ndarray) -> np.ndarray:
        n, m = self.n, self.m
        return self.A @ z[:n] + z[n:n + m] + self.sign * z[n + m:]

    def refactor(self) -> None:
        B = np.column_stack([self.full_column(q) for q in self.basis]) if self.m else np.zeros((0, 0))
        try:
            self.Binv = np.linalg.inv(B)
        except np.linalg.LinAlgError as exc:
            raise LpNumericalError("singular basis during reinversion") from exc
        z = self.x.copy()
        z[self.basis] = 0.0
        rhs = self.b - self.activity(z)
        self.x[self.basis] = self.Binv @ rhs
        self.pivots_since_refactor = 0

    # -- main loop -----------------------------------------------------------
    def run(self, cost: np.ndarray) -> str:
        """Optimise ``cost`` from the current basis; return 'optimal' or 'unbounded'."""
        tol = self.tol
        degenerate_run = 0
        bland = False
        while True:
            if self.iterations >= self.max_iter:
                raise LpNumericalError(f"simplex iteration limit {self.max_iter} reached")
            y = cost[self.basis] @ self.Binv
            d = self.pricing(cost, y)
            st = self.state
            eligible = ((st == _AT_LO) & (d < -tol.optimality) & (self.hi > self.lo)) \
                | ((st == _AT_HI) & (d > tol.optimality) & (self.hi > self.lo)) \
                | ((st == _FREE) & (np.abs(d) > tol.optimality))
            cand = np.flatnonzero(eligible)
            if cand.size == 0:
                self.y, self.d = y, d
                return "optimal"
            if bland:
                q = int(cand[0])
            else:
                q = int(cand[np.argmax(np.abs(d[cand]))])
            direction = 1.0 if d[q] < 0 else -1.0
            col = self.column(q)
            # basic variables move by -direction * col * t
            delta = -direction * col
            xb = self.x[self.basis]
            lb = self.lo[self.basis]
            ub = self.hi[self.basis]
            step = self.hi[q] - self.lo[q]
            leave = -1
            leave_to = _AT_LO
            with np.errstate(divide="ignore", invalid="ignore"):
                dec = delta < -tol.pivot
                inc = delta > tol.pivot
                ratio = np.full(self.m, INF)
                ratio[dec] = (xb[dec] - lb[dec]) / -delta[dec]
                ratio[inc] = (ub[inc] - xb[inc]) / delta[inc]
                ratio = np.maximum(ratio, 0.0)
                if bland:
                    tmin = ratio.min() if self.m else INF
                    if tmin < step:
                        ties = np.flatnonzero(ratio <= tmin + 1e-12)
                        leave = int(ties[np.argmin(self.basis[ties])])
                else:
                    # Harris pass: relaxed bound, then the largest pivot among near-ties
                    relaxed = np.full(self.m, INF)
                    relaxed[dec] = (xb[dec] - lb[dec] + tol.feasibility) / -delta[dec]
                    relaxed[inc] = (ub[inc] - xb[inc] + tol.feasibility) / delta[inc]
                    tmax = relaxed.min() if self.m else INF
                    if tmax < step:
                        ties = np.flatnonzero(ratio <= tmax)
                        leave = int(ties[np.argmax(np.abs(delta[ties]))])
            if leave < 0:
                if not math.isfinite(step):
                    self.ray_col, self.ray_q, self.ray_dir = col, q, direction
                    return "unbounded"
                t = step
            else:
                t = ratio[leave]
                leave_to = _AT_LO if delta[leave] < 0 else _AT_HI
            self.iterations += 1
            if t <= 1e-12:
                degenerate_run += 1
                if degenerate_run >= tol.degenerate_pivots_before_bland:
                    bland = True
            else:
                degenerate_run = 0
                bland = False
            self.x[self.basis] = xb + delta * t
            self.x[q] += direction * t
            if leave < 0:
                self.state[q] = _AT_HI if direction > 0 else _AT_LO
                self.x[q] = self.hi[q] if direction > 0 else self.lo[q]
                continue
            out = self.basis[leave]
            self.x[out] = self.lo[out] if leave_to == _AT_LO else self.hi[out]
            self.state[out] = leave_to
            self.state[q] = _BASIC
            self.basis[leave] = q
            piv = col[leave]
            row = self.Binv[leave] / piv
            self.Binv -= np.outer(col, row)
            self.Binv[leave] = row
            self.pivots_since_refactor += 1
            if self.pivots_since_refactor >= tol.refactor_every:
                self.refactor()


def solve_lp(lp: LinearProgram, tol: Tolerances | None = None, backend: str = "simplex",
             max_iter: int | None = None, bounds=None) -> LpSolution:
    """Solve ``lp`` and return primal values, row duals and reduced costs.

    ``backend="simplex"`` (default) runs the in-house two-phase bounded
    simplex; ``backend="highs"`` delegates to SciPy's HiGHS wrapper and maps
    its marginals onto the same sign convention; ``backend="auto"`` uses the
    simplex for models up to ``AUTO_SIMPLEX_MAX_ENTRIES`` dense entries and
    HiGHS above that.  ``bounds=(lo, hi)``
    overrides the variable bounds stored in ``lp`` without copying it.
    """
    tol = tol or Tolerances()
    if backend == "auto":
        backend = "simplex" if lp.num_rows * lp.num_vars <= AUTO_SIMPLEX_MAX_ENTRIES else "highs"
    if bounds is not None and np.any(np.asarray(bounds[0]) > np.asarray(bounds[1])):
        n, m = lp.num_vars, lp.num_rows
        return LpSolution(LpStatus.INFEASIBLE, np.zeros(n), np.zeros(m), np.zeros(n), math.nan)
    if backend == "highs":
        return _solve_highs(lp, bounds)
    if backend != "simplex":
        raise ValueError(f"unknown LP backend {backend!r}")
    n, m = lp.num_vars, lp.num_rows
    if n == 0:
        A, senses, b, *_ = lp.arrays()
        ok = np.all(np.where(senses == LE, b >= -tol.feasibility,
                             np.where(senses == GE, b <= tol.feasibility,
                                      np.abs(b) <= tol.feasibility))) if m else True
        return LpSolution(LpStatus.OPTIMAL if ok else LpStatus.INFEASIBLE, np.zeros(0), np.zeros(m),
                          np.zeros(0), lp.constant)
    S = _Simplex(lp, tol, max_iter, bounds)
    if S.n_artificial:
        c1 = np.zeros(n + 2 * m)
        c1[n + m:] = 1.0
        S.run(c1)
        S.refactor()
        infeas = float(S.x[n + m:].sum())
        if infeas > tol.certify:
            return LpSolution(LpStatus.INFEASIBLE, S.x[:n].copy(), np.zeros(m), np.zeros(n),
                              math.nan, S.iterations, certificate=S.y.copy())
    # lock artificials at zero for phase two
    S.hi[n + m:] = 0.0
    S.x[n + m:][S.state[n + m:] != _BASIC] = 0.0
    outcome = S.run(S.c2)
    if outcome == "unbounded":
        ray = np.zeros(n + 2 * m)
        ray[S.basis] = -S.ray_dir * S.ray_col
        ray[S.ray_q] = S.ray_dir
        return LpSolution(LpStatus.UNBOUNDED, S.x[:n].copy(), np.zeros(m), np.zeros(n), -INF,
                          S.iterations, certificate=ray[:n])
    S.refactor()
    y = S.c2[S.basis] @ S.Binv
    d = S.pricing(S.c2, y)
    x = S.x[:n].copy()
    obj = lp.objective(x)
    return LpSolution(LpStatus.OPTIMAL, x, y.copy(), d[:n].copy(), obj, S.iterations)


_HIGHS_ATTEMPTS = (("highs", {}), ("highs-ds", {"presolve": False}), ("highs-ipm", {}))


def _solve_highs(lp: LinearProgram, bounds=None) -> LpSolution:
    from scipy.optimize import linprog

    A, senses, b, c, lo, hi = lp.arrays()
    if bounds is not None:
        lo, hi = np.asarray(bounds[0], dtype=float), np.asarray(bounds[1], dtype=float)
    le = np.flatnonzero(senses == LE)
    ge = np.flatnonzero(senses == GE)
    eq = np.flatnonzero(senses == EQ)
    ub_rows = np.concatenate([le, ge])
    A_ub = sp.vstack([A[le], -A[ge]]) if ub_rows.size else None
    b_ub = np.concatenate([b[le], -b[ge]]) if ub_rows.size else None
    A_eq = A[eq] if eq.size else None
    b_eq = b[eq] if eq.size else None
    bounds = np.column_stack([np.where(np.isfinite(lo), lo, -np.inf), np.where(np.isfinite(hi), hi, np.inf)])
    # badly scaled B&B nodes occasionally leave HiGHS with an unknown status;
    # the dual simplex without presolve, then the interior point, usually recover
    for method, extra in _HIGHS_ATTEMPTS:
        res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds, method=method,
                      options=extra)
        if res.status in (0, 2, 3):
            break
    m, n = A.shape
    if res.status == 2:
        return LpSolution(LpStatus.INFEASIBLE, np.zeros(n), np.zeros(m), np.zeros(n), math.nan,
                          backend="highs")
    if res.status == 3:
        return LpSolution(LpStatus.UNBOUNDED, np.zeros(n), np.zeros(m), np.zeros(n), -INF,
                          backend="highs")
    if res.status != 0:
        raise LpNumericalError(f"HiGHS failed: {res.message}")
    duals = np.zeros(m)
    if ub_rows.size:
        marg = res.ineqlin.marginals
        duals[le] = marg[: le.size]
        duals[ge] = -marg[le.size:]
    if eq.size:
        duals[eq] = res.eqlin.marginals
    rc = res.lower.marginals + res.upper.marginals
    x = np.clip(np.asarray(res.x, dtype=float), lo, hi)
    return LpSolution(LpStatus.OPTIMAL, x, duals, rc, lp.objective(x), int(res.nit), backend="highs")


def _bound_violation(x, lo, hi) -> float:
    v = np.maximum(np.maximum(lo - x, x - hi), 0.0)
    return float(v.max(initial=0.0))


def _row_violation(lp: LinearProgram, x) -> float:
    A, senses, b, *_ = lp.arrays()
    ax = A @ x
    v = np.where(senses == LE, ax - b, np.where(senses == GE, b - ax, np.abs(ax - b)))
    return float(np.maximum(v, 0.0).max(initial=0.0))


def dual_objective(lp: LinearProgram, duals: np.ndarray, tol: float = 1e-9, bounds=None) -> float:
    """Lagrangian dual bound ``b.pi + sum_j (bound term) + c0`` for given row duals."""
    A, senses, b, c, lo, hi = lp.arrays()
    if bounds is not None:
        lo, hi = np.asarray(bounds[0], dtype=float), np.asarray(bounds[1], dtype=float)
    d = c - A.T @ duals
    val = float(b @ duals) + lp.constant
    for j in range(lp.num_vars):
        if d[j] > tol:
            val += d[j] * lo[j] if math.isfinite(lo[j]) else -INF
        elif d[j] < -tol:
            val += d[j] * hi[j] if math.isfinite(hi[j]) else -INF
        else:
            bound = lo[j] if math.isfinite(lo[j]) else (hi[j] if math.isfinite(hi[j]) else 0.0)
            val += d[j] * bound
    return val


def dual_check(lp: LinearProgram, sol: LpSolution, tol: float = 1e-7, bounds=None) -> DualCheckReport:
    """Certify an optimal primal/dual pair independently of the solver.

    Reduced costs are recomputed from the row duals rather than trusted.
    """
    A, senses, b, c, lo, hi = lp.arrays()
    if bounds is not None:
        lo, hi = np.asarray(bounds[0], dtype=float), np.asarray(bounds[1], dtype=float)
    x = np.asarray(sol.primal, dtype=float)
    pi = np.asarray(sol.duals, dtype=float)
    msgs: list[str] = []
    scale = 1.0 + abs(sol.objective_value) if math.isfinite(sol.objective_value) else 1.0

    primal_res = max(_bound_violation(x, lo, hi), _row_violation(lp, x))
    if primal_res > tol:
        msgs.append(f"primal residual {primal_res:.3e}")

    # sign feasibility of the row duals
    dual_res = 0.0
    if pi.size:
        dual_res = max(dual_res, float(np.max(np.where(senses == LE, pi, 0.0), initial=0.0)))
        dual_res = max(dual_res, float(np.max(np.where(senses == GE, -pi, 0.0), initial=0.0)))
    d = c - A.T @ pi
    at_lo = np.isfinite(lo) & (x - lo <= tol * (1 + np.abs(lo)))
    at_hi = np.isfinite(hi) & (hi - x <= tol * (1 + np.abs(hi)))
    bad_pos = np.where(~at_lo, np.maximum(d, 0.0), 0.0)   # d > 0 only allowed at lower bound
    bad_neg = np.where(~at_hi, np.maximum(-d, 0.0), 0.0)  # d < 0 only allowed at upper bound
    if d.size:
        dual_res = max(dual_res, float(bad_pos.max()), float(bad_neg.max()))
    if dual_res > tol * scale:
        msgs.append(f"dual residual {dual_res:.3e}")

    ax = A @ x
    comp = float(np.max(np.abs(pi * (ax - b)), initial=0.0))
    interior = np.minimum(np.where(np.isfinite(lo), x - lo, INF), np.where(np.isfinite(hi), hi - x, INF))
    comp = max(comp, float(np.max(np.abs(d) * np.where(np.isfinite(interior), interior, 0.0), initial=0.0)))
    if comp > tol * scale:
        msgs.append(f"complementarity {comp:.3e}")

    gap = abs(lp.objective(x) - dual_objective(lp, pi, tol=tol * 1e-2, bounds=bounds)) if math.isfinite(sol.objective_value) else INF
    if not gap <= tol * scale:
        msgs.append(f"duality gap {gap:.3e}")
    return DualCheckReport(not msgs, primal_res, dual_res, comp, gap, msgs)
