"""Linearised three-phase unbalanced power flow rows.

Flow variables on lines and switches are directed from ``from_bus`` to
``to_bus``; transformers carry one flow per side, each measured leaving its
own terminal.  Voltage variables are squared magnitudes ``w``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from ..lp_engine import EQ, GE, INF, LE
from ..net_model import DELTA, NetworkCase
from .indexer import ModelBuilder

SQRT3 = math.sqrt(3.0)

# pairs whose off-diagonal sqrt(3) term is subtracted in M^p (added in M^q)
_POSITIVE_SEQUENCE = {("a", "b"), ("b", "c"), ("c", "a")}


def polygon_directions(K: int) -> list[tuple[float, float]]:
    if K < 4:
        raise ValueError("polygon needs at least 4 facets")
    return [(math.cos(2 * math.pi * k / K + math.pi / K), math.sin(2 * math.pi * k / K + math.pi / K))
            for k in range(K)]


def polygon_rhs_factor(K: int) -> float:
    return math.cos(math.pi / K)


def lindist_matrices(phases, r: np.ndarray, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Voltage-drop matrices ``(M^p, M^q)`` restricted to ``phases``."""
    k = len(phases)
    mp = np.zeros((k, k))
    mq = np.zeros((k, k))
    for a, pa in enumerate(phases):
        for b, pb in enumerate(phases):
            if a == b:
                mp[a, b] = -2.0 * r[a, b]
                mq[a, b] = -2.0 * x[a, b]
            else:
                sgn = 1.0 if (pa, pb) in _POSITIVE_SEQUENCE else -1.0
                mp[a, b] = r[a, b] - sgn * SQRT3 * x[a, b]
                mq[a, b] = x[a, b] + sgn * SQRT3 * r[a, b]
    return mp, mq


@dataclass(frozen=True)
class PowerFlowOptions:
    facets: int = 8
    omega: float = 705.0
    ramp_fraction: float = 0.30
    # recourse objective also charges c1 on adjustments
    adjustment_cost: bool = True


def _flow_keys(kind: str, eid: str, ph: str):
    return (f"p_{kind}", eid, ph), (f"q_{kind}", eid, ph)


def add_flow_vars(mb: ModelBuilder, case: NetworkCase) -> None:
    for bus in case.buses:
        for ph in bus.phases:
            mb.var(("w", bus.id, ph), 0.0, INF)
    for kind, edges in (("line", case.lines), ("sw", case.switches)):
        for e in edges:
            for ph in e.phases:
                for key in _flow_keys(kind, e.id, ph):
                    mb.var(key, -INF, INF)
    for t in case.transformers:
        for side in ("f", "t"):
            for ph in t.phases:
                for key in _flow_keys(f"x{side}", t.id, ph):
                    mb.var(key, -INF, INF)


def _outflows(case: NetworkCase) -> dict[tuple[str, str], list[tuple[tuple, tuple, float]]]:
    """Per (bus, phase): (p_key, q_key, sign) of every flow leaving the bus."""
    out: dict[tuple[str, str], list] = {}
    for kind, edges in (("line", case.lines), ("sw", case.switches)):
        for e in edges:
            for ph in e.phases:
                pk, qk = _flow_keys(kind, e.id, ph)
                out.setdefault((e.from_bus, ph), []).append((pk, qk, 1.0))
                out.setdefault((e.to_bus, ph), []).append((pk, qk, -1.0))
    for t in case.transformers:
        for ph in t.phases:
            pk, qk = _flow_keys("xf", t.id, ph)
            out.setdefault((t.from_bus, ph), []).append((pk, qk, 1.0))
            pk, qk = _flow_keys("xt", t.id, ph)
            out.setdefault((t.to_bus, ph), []).append((pk, qk, 1.0))
    return out


def bus_demand(case: NetworkCase, loads: Mapping[str, Mapping[str, complex]]) -> dict[tuple[str, str], complex]:
    demand: dict[tuple[str, str], complex] = {}
    for d in case.loads:
        for ph in d.phases:
            demand[(d.bus, ph)] = demand.get((d.bus, ph), 0j) + complex(loads[d.id][ph])
    return demand


def build_power_flow(mb: ModelBuilder, case: NetworkCase, loads: Mapping[str, Mapping[str, complex]],
                     opts: PowerFlowOptions = PowerFlowOptions(), ramp_fraction: float | None = None) -> None:
    """Emit voltage, flow-limit, transformer and nodal-balance rows.

    In a master model the generator set-points ``pg``/``qg`` and the
    configuration binaries are variables; in a recourse model they are taken
    from ``mb.x_values`` and the balance rows gain adjustment variables
    ``o+``/``o-`` and balance slacks ``h+``/``h-``.  ``loads`` gives the
    per-phase complex demand of every load (nominal or scenario value).
    """
    recourse = mb.context != "MASTER"
    add_flow_vars(mb, case)
    blk = case.block_of_bus
    dirs = polygon_directions(opts.facets)
    cosk = polygon_rhs_factor(opts.facets)

    # voltage boxes gated by block energisation
    for bus in case.buses:
        zb = ("z_bl", blk[bus.id])
        for ph in bus.phases:
            w = ("w", bus.id, ph)
            mb.row({w: 1.0}, LE, 0.0, f"vmax[bus={bus.id},phase={ph}]", xterms={zb: -bus.v_max ** 2})
            mb.row({w: 1.0}, GE, 0.0, f"vmin[bus={bus.id},phase={ph}]", xterms={zb: -bus.v_min ** 2})

    # voltage drop on lines: w_from - w_to + Mp p + Mq q = 0
    for ln in case.lines:
        mp, mq = lindist_matrices(ln.phases, ln.r, ln.x)
        for a, pa in enumerate(ln.phases):
            terms = {("w", ln.from_bus, pa): 1.0, ("w", ln.to_bus, pa): -1.0}
            for b, pb in enumerate(ln.phases):
                pk, qk = _flow_keys("line", ln.id, pb)
                terms[pk] = terms.get(pk, 0.0) + mp[a, b]
                terms[qk] = terms.get(qk, 0.0) + mq[a, b]
            mb.row(terms, EQ, 0.0, f"voltdrop[line={ln.id},phase={pa}]")

    # apparent-power limits, polygon inner approximation
    def polygon(kind, eid, ph, smax, gate=None):
        pk, qk = _flow_keys(kind, eid, ph)
        for k, (c, s) in enumerate(dirs):
            if gate is None:
                mb.row({pk: c, qk: s}, LE, smax * cosk, f"smax[{kind}={eid},phase={ph},k={k}]")
            else:
                mb.row({pk: c, qk: s}, LE, 0.0, f"swsmax[switch={eid},phase={ph},k={k}]",
                       xterms={gate: -smax * cosk})

    for ln in case.lines:
        for ph in ln.phases:
            polygon("line", ln.id, ph, ln.s_max[ph])
    for t in case.transformers:
        for ph in t.phases:
            polygon("xf", t.id, ph, t.s_max[ph])
            polygon("xt", t.id, ph, t.s_max[ph])
    for sw in case.switches:
        gate = ("z_sw", sw.id)
        bus_map = case.bus_map
        for ph in sw.phases:
            polygon("sw", sw.id, ph, sw.s_max[ph], gate)
            big_m = max(bus_map[sw.from_bus].v_max, bus_map[sw.to_bus].v_max) ** 2
            wf, wt = ("w", sw.from_bus, ph), ("w", sw.to_bus, ph)
            mb.row({wf: 1.0, wt: -1.0}, LE, big_m, f"swvolt.tie[switch={sw.id},phase={ph},dir=+]",
                   xterms={gate: big_m})
            mb.row({wf: -1.0, wt: 1.0}, LE, big_m, f"swvolt.tie[switch={sw.id},phase={ph},dir=-]",
                   xterms={gate: big_m})

    # transformers
    for t in case.transformers:
        n2 = t.tap_ratio ** 2
        if t.connection == DELTA:
            for pa, pb in (("a", "b"), ("b", "c"), ("c", "a")):
                mb.row({("w", t.from_bus, pa): 3.0, ("w", t.from_bus, pb): 3.0, ("w", t.to_bus, pa): -2.0 * n2},
                       EQ, 0.0, f"deltav[xfmr={t.id},phase={pa}{pb}]")
            for pa, pb in (("a", "c"), ("b", "a"), ("c", "b")):
                pf, qf = _flow_keys("xf", t.id, pa)
                pta, qta = _flow_keys("xt", t.id, pa)
                ptb, qtb = _flow_keys("xt", t.id, pb)
                # 2 p_ij = -(p_ji,a + p_ji,b) + (q_ji,b - q_ji,a)/sqrt3
                mb.row({pf: 2.0, pta: 1.0, ptb: 1.0, qtb: -1.0 / SQRT3, qta: 1.0 / SQRT3}, EQ, 0.0,
                       f"deltap[xfmr={t.id},phase={pa}]")
                # 2 q_ij = (p_ji,a - p_ji,b)/sqrt3 - (q_ji,b + q_ji,a)
                mb.row({qf: 2.0, pta: -1.0 / SQRT3, ptb: 1.0 / SQRT3, qtb: 1.0, qta: 1.0}, EQ, 0.0,
                       f"deltaq[xfmr={t.id},phase={pa}]")
        else:
            for ph in t.phases:
                mb.row({("w", t.from_bus, ph): 1.0, ("w", t.to_bus, ph): -n2}, EQ, 0.0,
                       f"wyev[xfmr={t.id},phase={ph}]")
                for part in ("p", "q"):
                    mb.row({(f"{part}_xf", t.id, ph): 1.0, (f"{part}_xt", t.id, ph): 1.0}, EQ, 0.0,
                           f"wyes[xfmr={t.id},phase={ph},{part}]")

    # recourse variables
    gens_at: dict[str, list] = {}
    for g in case.generators:
        gens_at.setdefault(g.bus, []).append(g)
    if recourse:
        for g in case.generators:
            zb = ("z_bl", blk[g.bus])
            for ph in g.phases:
                if ramp_fraction is None:
                    lim = g.ramp_limit(ph, opts.ramp_fraction)
                else:
                    lim = complex(ramp_fraction * abs(g.s_max[ph].real), ramp_fraction * abs(g.s_max[ph].imag))
                for part, cap_hi, cap_lo, ramp in (("p", g.s_max[ph].real, g.s_min[ph].real, lim.real),
                                                   ("q", g.s_max[ph].imag, g.s_min[ph].imag, lim.imag)):
                    cost = g.c1 if (part == "p" and opts.adjustment_cost) else 0.0
                    mb.var((f"o+{part}", g.id, ph), 0.0, ramp, cost)
                    mb.var((f"o-{part}", g.id, ph), 0.0, ramp, cost)
                    sk = (f"{part}g", g.id, ph)
                    mb.row({(f"o+{part}", g.id, ph): 1.0}, LE, 0.0, f"adjup[gen={g.id},phase={ph},{part}]",
                           xterms={zb: -cap_hi, sk: 1.0})
                    mb.row({(f"o-{part}", g.id, ph): 1.0}, LE, 0.0, f"adjdown[gen={g.id},phase={ph},{part}]",
                           xterms={zb: cap_lo, sk: -1.0})
        for bus in case.buses:
            for ph in bus.phases:
                for part in ("p", "q"):
                    mb.var((f"h+{part}", bus.id, ph), 0.0, INF, opts.omega)
                    mb.var((f"h-{part}", bus.id, ph), 0.0, INF, opts.omega)

    # nodal balance: sum outflows (+h+ - h-) - sum gen (- o+ + o-) + shunt w = -z_bl * load
    outflows = _outflows(case)
    demand = bus_demand(case, loads)
    for bus in case.buses:
        zb = ("z_bl", blk[bus.id])
        for ph in bus.phases:
            shunt = complex(bus.shunt.get(ph, 0j))
            dem = demand.get((bus.id, ph), 0j)
            for part, idx in (("p", 0), ("q", 1)):
                terms: dict[tuple, float] = {}
                for pk, qk, sgn in outflows.get((bus.id, ph), ()):
                    key = pk if part == "p" else qk
                    terms[key] = terms.get(key, 0.0) + sgn
                sh = shunt.real if part == "p" else shunt.imag
                if sh:
                    terms[("w", bus.id, ph)] = terms.get(("w", bus.id, ph), 0.0) + sh
                xterms = {}
                for g in gens_at.get(bus.id, ()):
                    if ph not in g.phases:
                        continue
                    xterms[(f"{part}g", g.id, ph)] = -1.0
                    if recourse:
                        terms[(f"o+{part}", g.id, ph)] = -1.0
                        terms[(f"o-{part}", g.id, ph)] = 1.0
                if recourse:
                    terms[(f"h+{part}", bus.id, ph)] = 1.0
                    terms[(f"h-{part}", bus.id, ph)] = -1.0
                load_part = dem.real if part == "p" else dem.imag
                if load_part:
                    xterms[zb] = load_part
                mb.balance_rows[(bus.id, ph, part)] = mb.row(
                    terms, EQ, 0.0, f"balance[bus={bus.id},phase={ph},{part}]", xterms=xterms)


def slack_keys(mb: ModelBuilder) -> list[int]:
    return [mb[k] for k in mb.index.keys() if k[0] in ("h+p", "h-p", "h+q", "h-q")]
