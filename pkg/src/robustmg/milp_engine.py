"""Best-bound branch and bound over binary variables."""

from __future__ import annotations

import enum
import heapq
import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .lp_engine import LinearProgram, LpSolution, LpStatus, Tolerances, solve_lp

log = logging.getLogger(__name__)


class MipStatus(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"


class NodeLimitError(RuntimeError):
    def __init__(self, limit: int, incumbent: "MipSolution | None", bound: float):
        super().__init__(f"branch and bound node limit {limit} exceeded (bound {bound:.6g})")
        self.incumbent = incumbent
        self.bound = bound


@dataclass
class MixedIntegerProgram:
    lp: LinearProgram
    binary_vars: list[int]

    def __post_init__(self):
        self.binary_vars = sorted(set(self.binary_vars))
        for j in self.binary_vars:
            if self.lp.lo[j] < 0.0 or self.lp.hi[j] > 1.0:
                raise ValueError(f"binary variable {self.lp.var_tags[j]!r} has bounds outside [0, 1]")


@dataclass
class MipSolution:
    status: MipStatus
    assignment: np.ndarray
    objective_value: float
    bound: float
    node_count: int
    bound_trace: list[float] = field(default_factory=list)
    lp_solution: LpSolution | None = None

    @property
    def optimal(self) -> bool:
        return self.status is MipStatus.OPTIMAL


@dataclass(frozen=True)
class MipOptions:
    abs_gap: float = 1e-6
    rel_gap: float = 1e-6
    integrality: float = 1e-6
    node_limit: int = 1_000_000
    lp_backend: str = "simplex"


NodeLogger = Callable[[int, float, float], None]


def _within_gap(bound: float, incumbent: float, opts: MipOptions) -> bool:
    return bound >= incumbent - max(opts.abs_gap, opts.rel_gap * abs(incumbent))


def solve_milp(mip: MixedIntegerProgram, options: MipOptions | None = None,
               node_log: NodeLogger | None = None, tol: Tolerances | None = None) -> MipSolution:
    """Solve ``mip`` to global optimality within the configured gap.

    Nodes are explored best-bound first (ties by creation order).  At each
    node the most fractional binary is branched on, lowest index on ties,
    and the down branch is created first.  Integral relaxations are polished
    by re-solving with the binaries fixed at their rounded values.
    """
    opts = options or MipOptions()
    lp = mip.lp
    lo0 = np.array(lp.lo, dtype=float)
    hi0 = np.array(lp.hi, dtype=float)
    bins = np.array(mip.binary_vars, dtype=np.int64)

    incumbent: MipSolution | None = None
    inc_val = math.inf
    counter = 0
    nodes = 0
    trace: list[float] = []
    # heap entries: (parent bound, creation id, fixings as tuple of (var, value))
    heap: list[tuple[float, int, tuple]] = [(-math.inf, 0, ())]

    def node_bounds(fix):
        lo, hi = lo0.copy(), hi0.copy()
        for j, v in fix:
            lo[j] = hi[j] = v
        return lo, hi

    global_bound = -math.inf
    while heap:
        parent_bound, _, fix = heapq.heappop(heap)
        global_bound = max(global_bound, parent_bound)
        if incumbent is not None and _within_gap(parent_bound, inc_val, opts):
            continue
        nodes += 1
        if nodes > opts.node_limit:
            raise NodeLimitError(opts.node_limit, incumbent, global_bound)
        lo, hi = node_bounds(fix)
        sol = solve_lp(lp, tol=tol, backend=opts.lp_backend, bounds=(lo, hi))
        if sol.status is LpStatus.INFEASIBLE:
            continue
        if sol.status is LpStatus.UNBOUNDED:
            raise ValueError("MILP relaxation is unbounded")
        node_val = max(sol.objective_value, parent_bound)
        trace.append(global_bound if nodes > 1 else node_val)
        if incumbent is not None and _within_gap(node_val, inc_val, opts):
            continue
        xb = sol.primal[bins]
        frac = np.abs(xb - np.round(xb))
        if bins.size == 0 or frac.max() <= opts.integrality:
            cand = _polish(lp, sol, bins, lo, hi, tol, opts.lp_backend)
            if cand is not None and cand.objective_value < inc_val:
                inc_val = cand.objective_value
                incumbent = cand
                if node_log:
                    node_log(nodes, global_bound, inc_val)
            continue
        score = np.abs(xb - 0.5)
        k = int(np.argmin(score))  # argmin returns the lowest index on ties
        j = int(bins[k])
        for v in (0.0, 1.0):
            counter += 1
            heapq.heappush(heap, (node_val, counter, fix + ((j, v),)))
        if node_log and nodes % 100 == 0:
            node_log(nodes, global_bound, inc_val)

    if incumbent is None:
        return MipSolution(MipStatus.INFEASIBLE, np.zeros(lp.num_vars), math.inf, math.inf, nodes, trace)
    incumbent.node_count = nodes
    incumbent.bound = min(max(global_bound, -math.inf), incumbent.objective_value)
    incumbent.bound_trace = trace
    return incumbent


def _polish(lp, sol, bins, lo, hi, tol, backend) -> MipSolution | None:
    vals = np.round(sol.primal[bins])
    lo, hi = lo.copy(), hi.copy()
    lo[bins] = hi[bins] = vals
    fixed = solve_lp(lp, tol=tol, backend=backend, bounds=(lo, hi))
    if not fixed.optimal:
        return None
    x = fixed.primal.copy()
    x[bins] = vals
    return MipSolution(MipStatus.OPTIMAL, x, lp.objective(x), -math.inf, 0, lp_solution=fixed)


def enumerate_binaries(mip: MixedIntegerProgram, backend: str = "simplex") -> tuple[float, np.ndarray | None]:
    """Exhaustive oracle: solve the LP for every binary assignment."""
    lp = mip.lp
    lo0 = np.array(lp.lo, dtype=float)
    hi0 = np.array(lp.hi, dtype=float)
    bins = np.array(mip.binary_vars, dtype=np.int64)
    best, best_x = math.inf, None
    for code in range(2 ** bins.size):
        vals = np.array([(code >> k) & 1 for k in range(bins.size)], dtype=float)
        lo, hi = lo0.copy(), hi0.copy()
        lo[bins] = hi[bins] = vals
        if np.any(lo > hi):
            continue
        sol = solve_lp(lp, backend=backend, bounds=(lo, hi))
        if sol.optimal and sol.objective_value < best:
            best, best_x = sol.objective_value, sol.primal
    return best, best_x
