"""Network-configuration rows: radiality and grid-forming DER colouring."""

from __future__ import annotations

import itertools

import networkx as nx

from ..lp_engine import GE, LE, EQ
from ..net_model import NetworkCase
from .indexer import ModelBuilder


def block_cycles(case: NetworkCase) -> list[tuple[str, ...]]:
    """Every simple cycle of the block multigraph as a sorted tuple of switch ids.

    Parallel switches between the same pair of blocks yield 2-cycles.
    """
    edges: dict[frozenset, list[str]] = {}
    for sw in case.switches:
        a, b = case.switch_blocks(sw)
        edges.setdefault(frozenset((a, b)), []).append(sw.id)
    cycles: set[tuple[str, ...]] = set()
    for ids in edges.values():
        for pair in itertools.combinations(sorted(ids), 2):
            cycles.add(pair)
    simple = nx.Graph()
    simple.add_nodes_from(b.id for b in case.blocks)
    simple.add_edges_from(tuple(k) for k in edges)
    for nodes in nx.simple_cycles(simple):
        if len(nodes) < 3:
            continue
        hops = [edges[frozenset((nodes[i], nodes[(i + 1) % len(nodes)]))] for i in range(len(nodes))]
        for choice in itertools.product(*hops):
            cycles.add(tuple(sorted(choice)))
    return sorted(cycles, key=lambda c: (len(c), c))


def add_switch_vars(mb: ModelBuilder, case: NetworkCase) -> None:
    for sw in case.switches:
        if not mb.has(("z_sw", sw.id)):
            mb.binary(("z_sw", sw.id))


def build_radiality(mb: ModelBuilder, case: NetworkCase) -> list[int]:
    """Forbid every cycle of closed switches in the block graph."""
    add_switch_vars(mb, case)
    rows = []
    for cyc in block_cycles(case):
        rows.append(mb.row({}, LE, len(cyc) - 1, f"radiality.cycle[{'+'.join(cyc)}]",
                           xterms={("z_sw", s): 1.0 for s in cyc}))
    return rows


def add_configuration_vars(mb: ModelBuilder, case: NetworkCase, block_costs: dict[int, float] | None = None) -> None:
    add_switch_vars(mb, case)
    for blk in case.blocks:
        if not mb.has(("z_bl", blk.id)):
            mb.binary(("z_bl", blk.id), cost=(block_costs or {}).get(blk.id, 0.0))
    for g in case.generators:
        if not mb.has(("z_inv", g.id)):
            mb.binary(("z_inv", g.id))


def build_coloring(mb: ModelBuilder, case: NetworkCase, k_der: int = 1) -> None:
    """Grid-forming DER and switch-colouring rows over the configuration binaries.

    A closed switch carries the colour of every block whose grid-forming DER
    energises its connected component; a multi-commodity flow on the block
    graph (one commodity per block, with unit "virtual" edges for blocks the
    commodity cannot reach) certifies that a colour really is connected.
    """
    if k_der < 1:
        raise ValueError("k_der must be at least 1")
    add_configuration_vars(mb, case)
    blocks = [b.id for b in case.blocks]
    nsw = len(case.switches)
    nbl = len(blocks)
    incident = {l: case.switches_of_block(l) for l in blocks}
    gens = {l: [g.id for g in case.generators_of_block(l)] for l in blocks}

    for sw in case.switches:
        for l in blocks:
            mb.binary(("y", sw.id, l))
    for l in blocks:
        for sw in case.switches:
            mb.var(("eta", sw.id, l), -nsw, nsw)
        for l2 in blocks:
            if l2 != l:
                mb.var(("xi", l, l2), 0.0, 1.0)

    def inv(l, scale=1.0):
        return {("z_inv", g): scale for g in gens[l]}

    # closed switch -> equal energisation
    for sw in case.switches:
        a, b = case.switch_blocks(sw)
        mb.row({}, LE, 1.0, f"connected[switch={sw.id},dir=+]",
               xterms={("z_bl", a): 1.0, ("z_bl", b): -1.0, ("z_sw", sw.id): 1.0})
        mb.row({}, LE, 1.0, f"connected[switch={sw.id},dir=-]",
               xterms={("z_bl", b): 1.0, ("z_bl", a): -1.0, ("z_sw", sw.id): 1.0})

    # grid-forming count per block
    for l in blocks:
        x = {("z_bl", l): 1.0, **inv(l, -1.0)}
        for sw in incident[l]:
            x[("z_sw", sw.id)] = x.get(("z_sw", sw.id), 0.0) - 1.0
        mb.row({}, LE, 0.0, f"genperblock.lo[block={l}]", xterms=x)
        mb.row({}, LE, 0.0, f"genperblock.hi[block={l}]", xterms={**inv(l), ("z_bl", l): -float(k_der)})

    # closed switch carries at most k_der colours, open switch none
    for sw in case.switches:
        mb.row({("y", sw.id, l): 1.0 for l in blocks}, LE, 0.0, f"switchcolor[switch={sw.id}]",
               xterms={("z_sw", sw.id): -float(k_der)})

    # closed switch at block l is coloured l iff l hosts a grid-forming DER
    for l in blocks:
        for sw in incident[l]:
            mb.row({("y", sw.id, l): 1.0}, LE, 1.0, f"colorgf.lo[block={l},switch={sw.id}]",
                   xterms={("z_sw", sw.id): 1.0, **inv(l, -1.0)})
            mb.row({("y", sw.id, l): -float(k_der)}, LE, float(k_der), f"colorgf.hi[block={l},switch={sw.id}]",
                   xterms={("z_sw", sw.id): float(k_der), **inv(l)})

    # closed switches sharing a block share colours
    seen = set()
    for l in blocks:
        for s1, s2 in itertools.combinations(incident[l], 2):
            pair = tuple(sorted((s1.id, s2.id)))
            if pair in seen:
                continue
            seen.add(pair)
            for c in blocks:
                z = {("z_sw", pair[0]): 1.0, ("z_sw", pair[1]): 1.0}
                mb.row({("y", pair[1], c): 1.0, ("y", pair[0], c): -1.0}, LE, 2.0,
                       f"samecolor[{pair[0]},{pair[1]},color={c}].a", xterms=z)
                mb.row({("y", pair[0], c): 1.0, ("y", pair[1], c): -1.0}, LE, 2.0,
                       f"samecolor[{pair[0]},{pair[1]},color={c}].b", xterms=z)

    # colour l requires a grid-forming DER in block l
    for l in blocks:
        for sw in case.switches:
            mb.row({("y", sw.id, l): 1.0}, LE, 0.0, f"noinvnocolor[block={l},switch={sw.id}]",
                   xterms=inv(l, -1.0))

    # energised block needs its own GF-DER or a coloured incident switch
    for l in blocks:
        terms = {}
        for sw in incident[l]:
            for c in blocks:
                terms[("y", sw.id, c)] = terms.get(("y", sw.id, c), 0.0) - 1.0
        mb.row(terms, LE, 0.0, f"energised[block={l}]", xterms={("z_bl", l): 1.0, **inv(l, -1.0)})

    # commodity flow only on closed switches
    for l in blocks:
        for sw in case.switches:
            mb.row({("eta", sw.id, l): 1.0}, LE, 0.0, f"flow.hi[switch={sw.id},commodity={l}]",
                   xterms={("z_sw", sw.id): -float(nsw)})
            mb.row({("eta", sw.id, l): -1.0}, LE, 0.0, f"flow.lo[switch={sw.id},commodity={l}]",
                   xterms={("z_sw", sw.id): -float(nsw)})

    # flow balance: source l emits |B|-1 units, every other block absorbs one
    for l in blocks:
        for node in blocks:
            terms: dict[tuple, float] = {}
            for sw in case.switches:
                a, b = case.switch_blocks(sw)
                if a == node:
                    terms[("eta", sw.id, l)] = terms.get(("eta", sw.id, l), 0.0) + 1.0
                if b == node:
                    terms[("eta", sw.id, l)] = terms.get(("eta", sw.id, l), 0.0) - 1.0
            if node == l:
                for l2 in blocks:
                    if l2 != l:
                        terms[("xi", l, l2)] = 1.0
                mb.row(terms, EQ, float(nbl - 1), f"source[commodity={l}]")
            else:
                terms[("xi", l, node)] = -1.0
                mb.row(terms, EQ, -1.0, f"sink[commodity={l},block={node}]")

    # virtual supply means disconnected: no colour l at that block's switches
    for l in blocks:
        for l2 in blocks:
            if l2 == l:
                continue
            for sw in incident[l2]:
                mb.row({("y", sw.id, l): 1.0, ("xi", l, l2): 1.0}, LE, 1.0,
                       f"virtualnocolor[color={l},block={l2},switch={sw.id}]")


def build_generation_limits(mb: ModelBuilder, case: NetworkCase) -> None:
    """Set-points gated by the host block's energisation."""
    for g in case.generators:
        l = case.block_of_bus[g.bus]
        for ph in g.phases:
            lo, hi = g.s_min[ph], g.s_max[ph]
            for part, lo_v, hi_v in (("pg", lo.real, hi.real), ("qg", lo.imag, hi.imag)):
                key = (part, g.id, ph)
                mb.row({}, LE, 0.0, f"genlimit.hi[gen={g.id},phase={ph},{part}]",
                       xterms={key: 1.0, ("z_bl", l): -hi_v})
                mb.row({}, GE, 0.0, f"genlimit.lo[gen={g.id},phase={ph},{part}]",
                       xterms={key: 1.0, ("z_bl", l): -lo_v})
