"""First-stage (master) model: configuration, set-points and cut epigraph."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from ..lp_engine import GE, INF
from ..milp_engine import MipOptions, MipSolution, MixedIntegerProgram, solve_milp
from ..net_model import NetworkCase
from .indexer import MASTER, ModelBuilder, XKey, render_key
from .power_flow import PowerFlowOptions, build_power_flow
from .topology import add_configuration_vars, build_coloring, build_generation_limits, build_radiality

THETA = ("theta",)


@dataclass
class CutRecord:
    """One sub-gradient cut ``theta >= V2 + pi^T A (x - x*)``.

    ``A[row]`` holds the sensitivity of that row's right-hand side to each
    first-stage quantity, so with row duals ``pi = d(obj)/d(rhs)`` the
    product ``pi^T A`` is a sub-gradient of the recourse value.
    """

    V2: float
    pi: dict[int, float]
    A: dict[int, dict[XKey, float]]
    x_star: dict[XKey, float]
    scenario_id: int | None = None
    row_tags: dict[int, str] = field(default_factory=dict)

    def gradient(self, drop: float = 1e-12) -> dict[XKey, float]:
        g: dict[XKey, float] = {}
        for i, coeffs in self.A.items():
            p = self.pi.get(i, 0.0)
            if p == 0.0:
                continue
            for k, a in coeffs.items():
                g[k] = g.get(k, 0.0) + p * a
        return {k: v for k, v in g.items() if abs(v) > drop}

    def evaluate(self, x: Mapping[XKey, float]) -> float:
        return self.V2 + sum(g * (float(x.get(k, 0.0)) - self.x_star.get(k, 0.0))
                             for k, g in self.gradient(drop=0.0).items())

    @classmethod
    def trivial(cls) -> "CutRecord":
        return cls(0.0, {}, {}, {}, None)


@dataclass(frozen=True)
class MasterOptions:
    k_der: int = 1
    facets: int = 8
    master_nominal_pf: bool = True
    # switch id -> forced state (0/1)
    fixed_switches: Mapping[str, int] | None = None
    mip: MipOptions = MipOptions(abs_gap=1e-9, rel_gap=1e-9)


@dataclass
class MasterSolution:
    z_sw: dict[str, int]
    z_bl: dict[int, int]
    z_inv: dict[str, int]
    y: dict[tuple[str, int], int]
    pg: dict[tuple[str, str], float]
    qg: dict[tuple[str, str], float]
    theta: float
    objective: float
    shed_cost: float
    gen_cost: float
    bound: float = -math.inf
    node_count: int = 0

    def x_values(self) -> dict[XKey, float]:
        x: dict[XKey, float] = {}
        x.update({("z_sw", k): float(v) for k, v in self.z_sw.items()})
        x.update({("z_bl", k): float(v) for k, v in self.z_bl.items()})
        x.update({("z_inv", k): float(v) for k, v in self.z_inv.items()})
        x.update({("pg", *k): v for k, v in self.pg.items()})
        x.update({("qg", *k): v for k, v in self.qg.items()})
        return x

    @property
    def energized_blocks(self) -> list[int]:
        return sorted(k for k, v in self.z_bl.items() if v)

    @property
    def closed_switches(self) -> list[str]:
        return sorted(k for k, v in self.z_sw.items() if v)

    @property
    def grid_forming(self) -> list[str]:
        return sorted(k for k, v in self.z_inv.items() if v)


@dataclass
class MasterModel:
    case: NetworkCase
    builder: ModelBuilder
    options: MasterOptions

    @property
    def mip(self) -> MixedIntegerProgram:
        return MixedIntegerProgram(self.builder.lp, self.builder.binaries)


def nominal_loads(case: NetworkCase) -> dict[str, dict[str, complex]]:
    return {d.id: dict(d.s_nominal) for d in case.loads}


def build_master(case: NetworkCase, cuts: Sequence[CutRecord] = (), options: MasterOptions = MasterOptions()) -> MasterModel:
    """Assemble the master MILP.

    Objective: sum alpha_l (1 - z_bl) + sum c1 p_g + c0 z_bl(g) + theta.  The
    constant sum alpha_l is carried in the LP's objective constant.
    """
    mb = ModelBuilder(f"master[{case.name}]", MASTER)
    add_configuration_vars(mb, case, {b.id: -b.weight for b in case.blocks})
    mb.lp.constant += sum(b.weight for b in case.blocks)
    for sw_id, v in (options.fixed_switches or {}).items():
        j = mb[("z_sw", sw_id)]
        mb.lp.set_bounds(j, float(v), float(v))
    for g in case.generators:
        lz = mb[("z_bl", case.block_of_bus[g.bus])]
        mb.lp.cost[lz] += g.c0
        for ph in g.phases:
            mb.var(("pg", g.id, ph), -INF, INF, g.c1)
            mb.var(("qg", g.id, ph), -INF, INF)
    mb.var(THETA, 0.0, INF, 1.0)

    build_radiality(mb, case)
    build_coloring(mb, case, options.k_der)
    build_generation_limits(mb, case)
    if options.master_nominal_pf:
        build_power_flow(mb, case, nominal_loads(case), PowerFlowOptions(facets=options.facets))
    for k, cut in enumerate(cuts):
        add_cut(mb, cut, k)
    return MasterModel(case, mb, options)


def add_cut(mb: ModelBuilder, cut: CutRecord, k: int) -> int:
    g = cut.gradient()
    rhs = cut.V2 - sum(v * cut.x_star.get(key, 0.0) for key, v in g.items())
    return mb.row({THETA: 1.0}, GE, rhs, f"cut[k={k},scenario={cut.scenario_id}]",
                  xterms={key: -v for key, v in g.items()})


def extract_master_solution(model: MasterModel, sol: MipSolution) -> MasterSolution:
    """Round binaries and clip set-points into their gated bounds."""
    case, mb = model.case, model.builder
    x = sol.assignment

    def val(key):
        return float(x[mb[key]])

    z_sw = {sw.id: int(round(val(("z_sw", sw.id)))) for sw in case.switches}
    z_bl = {b.id: int(round(val(("z_bl", b.id)))) for b in case.blocks}
    z_inv = {g.id: int(round(val(("z_inv", g.id)))) for g in case.generators}
    y = {}
    for k in mb.index.of_kind("y"):
        y[(k[1], k[2])] = int(round(val(k)))
    pg, qg = {}, {}
    for g in case.generators:
        z = z_bl[case.block_of_bus[g.bus]]
        for ph in g.phases:
            lo, hi = g.s_min[ph], g.s_max[ph]
            pg[(g.id, ph)] = float(np.clip(val(("pg", g.id, ph)), z * lo.real, z * hi.real))
            qg[(g.id, ph)] = float(np.clip(val(("qg", g.id, ph)), z * lo.imag, z * hi.imag))
    theta = max(val(THETA), 0.0)
    shed = sum(b.weight * (1 - z_bl[b.id]) for b in case.blocks)
    gen = sum(g.c1 * pg[(g.id, ph)] for g in case.generators for ph in g.phases)
    gen += sum(g.c0 * z_bl[case.block_of_bus[g.bus]] for g in case.generators)
    return MasterSolution(z_sw, z_bl, z_inv, y, pg, qg, theta, shed + gen + theta, shed, gen,
                          bound=sol.bound, node_count=sol.node_count)


def solve_master(model: MasterModel, node_log=None) -> MasterSolution | None:
    sol = solve_milp(model.mip, model.options.mip, node_log=node_log)
    if not sol.optimal:
        return None
    return extract_master_solution(model, sol)


def describe_row(mb: ModelBuilder, i: int) -> str:
    return mb.lp.row_tags[i] or f"row{i}"


__all__ = ["CutRecord", "MasterOptions", "MasterSolution", "MasterModel", "build_master", "add_cut",
           "solve_master", "extract_master_solution", "nominal_loads", "render_key", "THETA"]
