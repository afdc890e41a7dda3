"""Brute-force references the solvers are checked against.

Nothing here runs the cutting-plane loop, the branch and bound or the
in-house simplex; LPs and MILPs go to SciPy's HiGHS directly.
"""

from __future__ import annotations

import itertools

import networkx as nx
import numpy as np
from scipy.optimize import linprog

from robustmg.formulation import MASTER, ModelBuilder, PowerFlowOptions, build_power_flow, build_subproblem
from robustmg.formulation.master import nominal_loads
from robustmg.formulation.topology import build_generation_limits
from robustmg.lp_engine import EQ, GE, INF, LE, LinearProgram
from robustmg.robust_solver import enumerate_extremes


def scipy_lp(lp: LinearProgram, bounds=None):
    """(status, objective, x) from scipy's HiGHS; status 0 optimal, 2 infeasible, 3 unbounded."""
    A, senses, b, c, lo, hi = lp.arrays()
    if bounds is not None:
        lo, hi = bounds
    A = A.toarray() if hasattr(A, "toarray") else np.asarray(A)
    le, ge, eq = senses == LE, senses == GE, senses == EQ
    A_ub = np.vstack([A[le], -A[ge]])
    b_ub = np.concatenate([b[le], -b[ge]])
    res = linprog(c, A_ub=A_ub if len(b_ub) else None, b_ub=b_ub if len(b_ub) else None,
                  A_eq=A[eq] if eq.any() else None, b_eq=b[eq] if eq.any() else None,
                  bounds=list(zip(lo, hi)), method="highs")
    if res.status != 0:
        return res.status, None, None
    return 0, float(res.fun) + lp.constant, res.x


def brute_force_milp(lp: LinearProgram, binaries):
    """Best objective over all 0/1 assignments of ``binaries``; None if none is feasible."""
    _, _, _, _, lo0, hi0 = lp.arrays()
    best = None
    for bits in itertools.product((0.0, 1.0), repeat=len(binaries)):
        lo, hi = lo0.copy(), hi0.copy()
        ok = True
        for j, v in zip(binaries, bits):
            if v < lo[j] or v > hi[j]:
                ok = False
                break
            lo[j] = hi[j] = v
        if not ok:
            continue
        st, obj, _ = scipy_lp(lp, (lo, hi))
        if st == 0 and (best is None or obj < best):
            best = obj
    return best


# ---------------------------------------------------------------------------
# configurations
# ---------------------------------------------------------------------------

def admissible(case, z_sw, z_bl, z_inv, k_der=1) -> bool:
    """Plain-language rule for a valid partition.

    Closed switches never join an energised block to a de-energised one and
    never close a loop; every energised island owns between 1 and k_der
    grid-forming DERs; de-energised blocks own none.
    """
    g = nx.MultiGraph()
    g.add_nodes_from(b.id for b in case.blocks)
    for sw in case.switches:
        if z_sw[sw.id]:
            u, v = case.switch_blocks(sw)
            if z_bl[u] != z_bl[v]:
                return False
            g.add_edge(u, v)
    # a multigraph is a forest iff edges == nodes - components
    if g.number_of_edges() != g.number_of_nodes() - nx.number_connected_components(g):
        return False
    for gen in case.generators:
        if z_inv[gen.id] and not z_bl[case.block_of_bus[gen.bus]]:
            return False
    for comp in nx.connected_components(g):
        if not z_bl[next(iter(comp))]:
            continue
        n_gf = sum(z_inv[gen.id] for gen in case.generators if case.block_of_bus[gen.bus] in comp)
        if not 1 <= n_gf <= k_der:
            return False
    return True


def all_configurations(case):
    sws = [s.id for s in case.switches]
    bls = [b.id for b in case.blocks]
    gens = [g.id for g in case.generators]
    for a in itertools.product((0, 1), repeat=len(sws)):
        for b in itertools.product((0, 1), repeat=len(bls)):
            for c in itertools.product((0, 1), repeat=len(gens)):
                yield dict(zip(sws, a)), dict(zip(bls, b)), dict(zip(gens, c))


# ---------------------------------------------------------------------------
# robust value of one configuration
# ---------------------------------------------------------------------------

def _stack_recourse(big: ModelBuilder, sub, tag: str, t_col: int) -> None:
    """Append a copy of recourse LP ``sub`` to ``big`` with first-stage terms as columns.

    A recourse row reads ``a.y (sense) rhs`` where ``rhs`` already absorbed
    ``-coupling.x*``; written against live first-stage columns it becomes
    ``a.y - coupling.x (sense) rhs - coupling.x*``.
    """
    lp, x_star = sub.lp, sub.builder.x_values
    A, senses, b, c, lo, hi = lp.arrays()
    A = A.tocsr()
    offset = big.lp.num_vars
    for j in range(lp.num_vars):
        big.lp.add_var(lo[j], hi[j], 0.0, f"{tag}.{j}")
    for i in range(lp.num_rows):
        coeffs = {offset + int(j): float(a) for j, a in zip(A.indices[A.indptr[i]:A.indptr[i + 1]],
                                                           A.data[A.indptr[i]:A.indptr[i + 1]])}
        rhs = float(b[i])
        for key, cpl in sub.builder.couplings.get(i, {}).items():
            col = big[key]
            coeffs[col] = coeffs.get(col, 0.0) - cpl
            rhs -= cpl * x_star.get(key, 0.0)
        big.lp.add_row(coeffs, senses[i], rhs, f"{tag}.r{i}")
    # t >= c.y + constant
    row = {offset + j: -float(c[j]) for j in range(lp.num_vars) if c[j]}
    row[t_col] = 1.0
    big.lp.add_row(row, GE, lp.constant, f"{tag}.epi")


def robust_value(case, uncertainty, config, omega, cfg) -> float | None:
    """min over set-points of first-stage cost + worst recourse, binaries fixed.

    Every extreme scenario gets its own copy of the recourse variables, so the
    inner max becomes one epigraph variable over all copies.
    """
    z_sw, z_bl, z_inv = config
    mb = ModelBuilder("oracle", MASTER)
    for k, v in z_sw.items():
        mb.var(("z_sw", k), v, v)
    for k, v in z_bl.items():
        weight = next(b.weight for b in case.blocks if b.id == k)
        mb.lp.constant += weight * (1 - v)
        mb.var(("z_bl", k), v, v)
    for k, v in z_inv.items():
        mb.var(("z_inv", k), v, v)
    for g in case.generators:
        mb.lp.constant += g.c0 * z_bl[case.block_of_bus[g.bus]]
        for ph in g.phases:
            mb.var(("pg", g.id, ph), -INF, INF, g.c1)
            mb.var(("qg", g.id, ph), -INF, INF)
    t_col = mb.var(("t",), -INF, INF, 1.0)
    build_generation_limits(mb, case)
    if cfg.master_nominal_pf:
        build_power_flow(mb, case, nominal_loads(case), PowerFlowOptions(facets=cfg.polygon_facets))
    x0 = {("z_sw", k): v for k, v in z_sw.items()}
    x0.update({("z_bl", k): v for k, v in z_bl.items()})
    x0.update({("z_inv", k): v for k, v in z_inv.items()})
    opts = PowerFlowOptions(facets=cfg.polygon_facets, omega=omega, ramp_fraction=cfg.ramp_fraction)
    for sc in enumerate_extremes(uncertainty, z_bl, cap=cfg.scenario_cap):
        sub = build_subproblem(case, x0, sc, opts)
        _stack_recourse(mb, sub, f"s{sc.id}", t_col)
    st, obj, _ = scipy_lp(mb.lp)
    return obj if st == 0 else None


def exhaustive_rpop(case, uncertainty, cfg, omega, k_der=1):
    """(best objective, best configuration) over every admissible configuration."""
    best, arg = None, None
    for config in all_configurations(case):
        if not admissible(case, *config, k_der=k_der):
            continue
        v = robust_value(case, uncertainty, config, omega, cfg)
        if v is not None and (best is None or v < best - 1e-12):
            best, arg = v, config
    return best, arg


# ---------------------------------------------------------------------------
# configuration rows as a feasibility oracle
# ---------------------------------------------------------------------------

class ConfigurationRows:
    """Radiality and colouring rows with the auxiliaries left free.

    ``feasible(z_sw, z_bl, z_inv)`` asks scipy's MILP solver whether some
    (y, eta, xi) completes the assignment.
    """

    def __init__(self, case, k_der=1, radiality=True):
        from scipy.optimize import Bounds, LinearConstraint

        from robustmg.formulation.topology import add_configuration_vars, build_coloring, build_radiality

        mb = ModelBuilder("config", MASTER)
        add_configuration_vars(mb, case)
        if radiality:
            build_radiality(mb, case)
        build_coloring(mb, case, k_der)
        A, s, b, c, lo, hi = mb.lp.arrays()
        self.mb = mb
        self.lo, self.hi = lo, hi
        rl = np.where(s == GE, b, -np.inf)
        rl = np.where(s == EQ, b, rl)
        ru = np.where(s == LE, b, np.inf)
        ru = np.where(s == EQ, b, ru)
        self.cons = LinearConstraint(A.toarray(), rl, ru) if len(b) else None
        self.integrality = np.zeros(len(c))
        self.integrality[mb.binaries] = 1
        self._Bounds = Bounds

    def feasible(self, z_sw, z_bl, z_inv, extra=None) -> bool:
        from scipy.optimize import milp

        lo, hi = self.lo.copy(), self.hi.copy()
        fixed = [(("z_sw", k), v) for k, v in z_sw.items()] + [(("z_bl", k), v) for k, v in z_bl.items()]
        fixed += [(("z_inv", k), v) for k, v in z_inv.items()] + list((extra or {}).items())
        for key, v in fixed:
            lo[self.mb[key]] = hi[self.mb[key]] = v
        res = milp(np.zeros(len(lo)), constraints=self.cons, integrality=self.integrality,
                   bounds=self._Bounds(lo, hi))
        return res.status == 0


def forest(case, z_sw) -> bool:
    g = nx.MultiGraph()
    g.add_nodes_from(b.id for b in case.blocks)
    g.add_edges_from(case.switch_blocks(sw) for sw in case.switches if z_sw[sw.id])
    return g.number_of_edges() == g.number_of_nodes() - nx.number_connected_components(g)


def radiality_feasible(case):
    """Switch ids and, for every 0/1 switch vector, whether the radiality rows hold.

    The rows involve switch variables only, so they are checked by direct
    evaluation.
    """
    from robustmg.formulation import build_radiality

    mb = ModelBuilder("r", MASTER)
    build_radiality(mb, case)
    A, senses, b, *_ = mb.lp.arrays()
    assert np.all(senses == LE)
    ids = [s.id for s in case.switches]
    out = {}
    for bits in itertools.product((0, 1), repeat=len(ids)):
        z = np.zeros(mb.lp.num_vars)
        for sid, v in zip(ids, bits):
            z[mb[("z_sw", sid)]] = v
        out[bits] = bool(np.all(A @ z <= b + 1e-12)) if len(b) else True
    return ids, out
