"""Multi-phase distribution network model, case loading and block decomposition.

All quantities are per unit on the bases declared in the case file.  A
*block* is a connected component of the network once every switch is open;
blocks are the unit of energisation and load shedding.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable, Mapping

import networkx as nx
import numpy as np

log = logging.getLogger(__name__)

PHASES = ("a", "b", "c")
WYE, DELTA = "WYE", "DELTA"

DEFAULT_ALPHA_BASE = 10.0
DEFAULT_ALPHA_PER_LOAD = 0.01


class CaseError(Exception):
    """Base class for problems with a case file."""


class CaseParseError(CaseError):
    pass


class CaseSchemaError(CaseError):
    pass


class CaseInvariantError(CaseError):
    def __init__(self, element: str, fld: str, message: str):
        super().__init__(f"{element}: field '{fld}': {message}")
        self.element = element
        self.field = fld


def make_phases(members: Iterable[str], where: str = "?") -> tuple[str, ...]:
    members = list(members)
    if not members:
        raise CaseInvariantError(where, "phases", "phase set is empty")
    if len(set(members)) != len(members):
        raise CaseInvariantError(where, "phases", f"duplicate phases in {members}")
    for ph in members:
        if ph not in PHASES:
            raise CaseInvariantError(where, "phases", f"unknown phase {ph!r}")
    return tuple(ph for ph in PHASES if ph in members)


@dataclass(frozen=True)
class Bus:
    id: str
    phases: tuple[str, ...]
    v_min: float = 0.95
    v_max: float = 1.05
    shunt: Mapping[str, complex] = field(default_factory=dict)
    kv_base: float | None = None


@dataclass(frozen=True, eq=False)
class LineSegment:
    id: str
    from_bus: str
    to_bus: str
    phases: tuple[str, ...]
    r: np.ndarray
    x: np.ndarray
    s_max: Mapping[str, float]


@dataclass(frozen=True)
class Switch:
    id: str
    from_bus: str
    to_bus: str
    phases: tuple[str, ...]
    s_max: Mapping[str, float]
    normally_closed: bool = True


@dataclass(frozen=True)
class Transformer:
    id: str
    from_bus: str
    to_bus: str
    connection: str
    tap_ratio: float
    phases: tuple[str, ...]
    s_max: Mapping[str, float]


@dataclass(frozen=True)
class Load:
    id: str
    bus: str
    phases: tuple[str, ...]
    s_nominal: Mapping[str, complex]
    s_lower: Mapping[str, complex]
    s_upper: Mapping[str, complex]
    uncertain: bool = False


@dataclass(frozen=True)
class Generator:
    id: str
    bus: str
    phases: tuple[str, ...]
    s_min: Mapping[str, complex]
    s_max: Mapping[str, complex]
    c1: float = 0.0
    c0: float = 0.0
    ramp_fraction: float | None = None

    def ramp_limit(self, phase: str, default_fraction: float) -> complex:
        """Recourse adjustment limit per phase (real and reactive parts)."""
        frac = self.ramp_fraction if self.ramp_fraction is not None else default_fraction
        cap = self.s_max[phase]
        return complex(frac * abs(cap.real), frac * abs(cap.imag))


@dataclass(frozen=True)
class Block:
    id: int
    buses: frozenset[str]
    loads: frozenset[str]
    generators: frozenset[str]
    weight: float


@dataclass(frozen=True)
class NetworkCase:
    name: str
    bases: Mapping[str, Any]
    buses: tuple[Bus, ...]
    lines: tuple[LineSegment, ...]
    switches: tuple[Switch, ...]
    transformers: tuple[Transformer, ...]
    loads: tuple[Load, ...]
    generators: tuple[Generator, ...]
    blocks: tuple[Block, ...] = ()
    block_of_bus: Mapping[str, int] = field(default_factory=dict)

    # -- lookups -------------------------------------------------------------
    @property
    def bus_map(self) -> dict[str, Bus]:
        return {b.id: b for b in self.buses}

    @property
    def switch_map(self) -> dict[str, Switch]:
        return {s.id: s for s in self.switches}

    @property
    def load_map(self) -> dict[str, Load]:
        return {d.id: d for d in self.loads}

    @property
    def generator_map(self) -> dict[str, Generator]:
        return {g.id: g for g in self.generators}

    @property
    def cost_scale(self) -> float:
        return float(self.bases.get("cost_scale", 1.0))

    def block_graph(self) -> nx.MultiGraph:
        """Blocks as nodes, one edge per switch (keyed by switch id)."""
        g = nx.MultiGraph()
        g.add_nodes_from(b.id for b in self.blocks)
        for sw in self.switches:
            g.add_edge(self.block_of_bus[sw.from_bus], self.block_of_bus[sw.to_bus], key=sw.id)
        return g

    def switch_blocks(self, sw: Switch) -> tuple[int, int]:
        return self.block_of_bus[sw.from_bus], self.block_of_bus[sw.to_bus]

    def switches_of_block(self, block: int) -> list[Switch]:
        return [sw for sw in self.switches if block in self.switch_blocks(sw)]

    def generators_of_block(self, block: int) -> list[Generator]:
        return [g for g in self.generators if self.block_of_bus[g.bus] == block]

    def loads_of_block(self, block: int) -> list[Load]:
        return [d for d in self.loads if self.block_of_bus[d.bus] == block]

    def uncertain_loads(self) -> list[Load]:
        return [d for d in self.loads if d.uncertain]

    def with_weights(self, alpha_base: float, alpha_per_load: float) -> "NetworkCase":
        blocks = tuple(replace(b, weight=alpha_base + alpha_per_load * len(b.loads)) for b in self.blocks)
        return replace(self, blocks=blocks)

    def with_loads(self, loads: Iterable[Load]) -> "NetworkCase":
        return replace(self, loads=tuple(loads))


# ---------------------------------------------------------------------------
# decomposition
# ---------------------------------------------------------------------------

def compute_blocks(case: NetworkCase, alpha_base: float = DEFAULT_ALPHA_BASE,
                   alpha_per_load: float = DEFAULT_ALPHA_PER_LOAD) -> list[Block]:
    """Connected components of the bus graph with every switch edge removed.

    Blocks are numbered by their smallest bus id; isolated buses become
    singleton blocks.
    """
    g = nx.Graph()
    g.add_nodes_from(b.id for b in case.buses)
    for e in (*case.lines, *case.transformers):
        g.add_edge(e.from_bus, e.to_bus)
    comps = sorted((frozenset(c) for c in nx.connected_components(g)), key=min)
    bus_block = {bus: k for k, comp in enumerate(comps) for bus in comp}
    blocks = []
    for k, comp in enumerate(comps):
        loads = frozenset(d.id for d in case.loads if bus_block[d.bus] == k)
        gens = frozenset(gn.id for gn in case.generators if bus_block[gn.bus] == k)
        blocks.append(Block(k, comp, loads, gens, alpha_base + alpha_per_load * len(loads)))
    return blocks


def connected_components(case: NetworkCase, closed_switches: Iterable[str]) -> list[frozenset[int]]:
    """Partition of the blocks induced by the closed switches."""
    closed = set(closed_switches)
    known = case.switch_map
    unknown = closed - known.keys()
    if unknown:
        raise KeyError(f"unknown switch id(s): {sorted(unknown)}")
    g = nx.Graph()
    g.add_nodes_from(b.id for b in case.blocks)
    for sid in closed:
        g.add_edge(*case.switch_blocks(known[sid]))
    return sorted((frozenset(c) for c in nx.connected_components(g)), key=min)


# ---------------------------------------------------------------------------
# parsing and validation
# ---------------------------------------------------------------------------

_TOP_KEYS = ("bases", "buses", "lines", "switches", "transformers", "loads", "generators")


def _require(obj: Mapping, key: str, where: str):
    if key not in obj:
        raise CaseSchemaError(f"{where}: missing required field '{key}'")
    return obj[key]


def _per_phase_real(value, phases, where, fld) -> dict[str, float]:
    if isinstance(value, (int, float)):
        return {ph: float(value) for ph in phases}
    if not isinstance(value, Mapping):
        raise CaseSchemaError(f"{where}: field '{fld}' must be a number or a per-phase mapping")
    out = {}
    for ph, v in value.items():
        if ph not in phases:
            raise CaseInvariantError(where, fld, f"entry for phase {ph!r} outside device phases {phases}")
        out[ph] = float(v)
    missing = set(phases) - out.keys()
    if missing:
        raise CaseInvariantError(where, fld, f"missing phases {sorted(missing)}")
    return out


def _complex(v, where, fld) -> complex:
    if isinstance(v, (int, float)):
        return complex(float(v), 0.0)
    if isinstance(v, (list, tuple)) and len(v) == 2:
        return complex(float(v[0]), float(v[1]))
    raise CaseSchemaError(f"{where}: field '{fld}' entries must be [p, q] pairs")


def _per_phase_complex(value, phases, where, fld, allow_missing=False) -> dict[str, complex]:
    if not isinstance(value, Mapping):
        raise CaseSchemaError(f"{where}: field '{fld}' must be a per-phase mapping of [p, q] pairs")
    out = {}
    for ph, v in value.items():
        if ph not in phases:
            raise CaseInvariantError(where, fld, f"entry for phase {ph!r} outside device phases {phases}")
        out[ph] = _complex(v, where, fld)
    if not allow_missing:
        missing = set(phases) - out.keys()
        if missing:
            raise CaseInvariantError(where, fld, f"missing phases {sorted(missing)}")
    return out


def _matrix(value, phases, where, fld) -> np.ndarray:
    k = len(phases)
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 1 and arr.size == k * k:
        arr = arr.reshape(k, k)
    if arr.shape != (k, k):
        raise CaseSchemaError(f"{where}: field '{fld}' must be a {k}x{k} matrix over phases {phases}")
    if not np.allclose(arr, arr.T, atol=1e-12):
        raise CaseInvariantError(where, fld, "matrix is not symmetric")
    if np.any(np.diag(arr) <= 0):
        raise CaseInvariantError(where, fld, "diagonal entries must be strictly positive")
    arr.setflags(write=False)
    return arr


def _parse_bus(d: Mapping) -> Bus:
    bid = str(_require(d, "id", "bus"))
    where = f"bus {bid}"
    phases = make_phases(_require(d, "phases", where), where)
    v_min, v_max = float(d.get("v_min", 0.95)), float(d.get("v_max", 1.05))
    if not 0 < v_min < v_max:
        raise CaseInvariantError(where, "v_min", f"require 0 < v_min < v_max, got {v_min}, {v_max}")
    shunt = _per_phase_complex(d.get("shunt", {}), phases, where, "shunt", allow_missing=True)
    kv = d.get("kv_base")
    return Bus(bid, phases, v_min, v_max, shunt, None if kv is None else float(kv))


def _edge_common(d: Mapping, kind: str):
    eid = str(_require(d, "id", kind))
    where = f"{kind} {eid}"
    fb = str(_require(d, "from_bus", where))
    tb = str(_require(d, "to_bus", where))
    phases = make_phases(_require(d, "phases", where), where)
    s_max = _per_phase_real(_require(d, "s_max", where), phases, where, "s_max")
    for ph, v in s_max.items():
        if not v > 0:
            raise CaseInvariantError(where, "s_max", f"phase {ph} limit must be positive, got {v}")
    return eid, where, fb, tb, phases, s_max


def _parse_line(d: Mapping) -> LineSegment:
    eid, where, fb, tb, phases, s_max = _edge_common(d, "line")
    r = _matrix(_require(d, "r", where), phases, where, "r")
    x = _matrix(_require(d, "x", where), phases, where, "x")
    return LineSegment(eid, fb, tb, phases, r, x, s_max)


def _parse_switch(d: Mapping) -> Switch:
    eid, where, fb, tb, phases, s_max = _edge_common(d, "switch")
    return Switch(eid, fb, tb, phases, s_max, bool(d.get("normally_closed", True)))


def _parse_transformer(d: Mapping) -> Transformer:
    eid, where, fb, tb, phases, s_max = _edge_common(d, "transformer")
    conn = str(d.get("connection", WYE)).upper()
    if conn not in (WYE, DELTA):
        raise CaseInvariantError(where, "connection", f"must be WYE or DELTA, got {conn!r}")
    if conn == DELTA and phases != PHASES:
        raise CaseInvariantError(where, "phases", "DELTA transformers require all three phases")
    n = float(d.get("tap_ratio", 1.0))
    if not n > 0:
        raise CaseInvariantError(where, "tap_ratio", f"must be positive, got {n}")
    return Transformer(eid, fb, tb, conn, n, phases, s_max)


def _parse_load(d: Mapping) -> Load:
    lid = str(_require(d, "id", "load"))
    where = f"load {lid}"
    bus = str(_require(d, "bus", where))
    phases = make_phases(_require(d, "phases", where), where)
    nominal = _per_phase_complex(_require(d, "s_nominal", where), phases, where, "s_nominal")
    uncertain = bool(d.get("uncertain", False))
    lower = _per_phase_complex(d["s_lower"], phases, where, "s_lower") if "s_lower" in d else dict(nominal)
    upper = _per_phase_complex(d["s_upper"], phases, where, "s_upper") if "s_upper" in d else dict(nominal)
    for ph in phases:
        lo, s0, hi = lower[ph], nominal[ph], upper[ph]
        if lo.real > s0.real + 1e-12 or lo.imag > s0.imag + 1e-12:
            raise CaseInvariantError(where, "s_lower", f"phase {ph}: lower bound {lo} exceeds nominal {s0}")
        if hi.real < s0.real - 1e-12 or hi.imag < s0.imag - 1e-12:
            raise CaseInvariantError(where, "s_upper", f"phase {ph}: upper bound {hi} below nominal {s0}")
        if not uncertain and (lo != s0 or hi != s0):
            raise CaseInvariantError(where, "uncertain", f"phase {ph}: certain load must have bounds equal to nominal")
    return Load(lid, bus, phases, nominal, lower, upper, uncertain)


def _parse_generator(d: Mapping) -> Generator:
    gid = str(_require(d, "id", "generator"))
    where = f"generator {gid}"
    bus = str(_require(d, "bus", where))
    phases = make_phases(_require(d, "phases", where), where)
    s_min = _per_phase_complex(d.get("s_min", {ph: [0.0, 0.0] for ph in phases}), phases, where, "s_min")
    s_max = _per_phase_complex(_require(d, "s_max", where), phases, where, "s_max")
    for ph in phases:
        if s_min[ph].real > s_max[ph].real or s_min[ph].imag > s_max[ph].imag:
            raise CaseInvariantError(where, "s_min", f"phase {ph}: s_min {s_min[ph]} exceeds s_max {s_max[ph]}")
    c1 = float(d.get("c1", 0.0))
    if c1 < 0:
        raise CaseInvariantError(where, "c1", f"must be non-negative, got {c1}")
    rf = d.get("ramp_fraction")
    if rf is not None:
        rf = float(rf)
        if not 0 < rf <= 1:
            raise CaseInvariantError(where, "ramp_fraction", f"must lie in (0, 1], got {rf}")
    return Generator(gid, bus, phases, s_min, s_max, c1, float(d.get("c0", 0.0)), rf)


def parse_case(data: Mapping, name: str = "case", alpha_base: float = DEFAULT_ALPHA_BASE,
               alpha_per_load: float = DEFAULT_ALPHA_PER_LOAD) -> NetworkCase:
    """Build and validate a :class:`NetworkCase` from a decoded JSON document."""
    if not isinstance(data, Mapping):
        raise CaseSchemaError("case document must be a JSON object")
    for key in _TOP_KEYS:
        if key not in data:
            raise CaseSchemaError(f"missing top-level key '{key}'")
    for key in _TOP_KEYS[1:]:
        if not isinstance(data[key], list):
            raise CaseSchemaError(f"top-level key '{key}' must be a list")
    try:
        buses = tuple(_parse_bus(d) for d in data["buses"])
        lines = tuple(_parse_line(d) for d in data["lines"])
        switches = tuple(_parse_switch(d) for d in data["switches"])
        transformers = tuple(_parse_transformer(d) for d in data["transformers"])
        loads = tuple(_parse_load(d) for d in data["loads"])
        generators = tuple(_parse_generator(d) for d in data["generators"])
    except (TypeError, ValueError, AttributeError) as exc:
        raise CaseSchemaError(f"malformed element: {exc}") from exc

    case = NetworkCase(str(data.get("name", name)), dict(data["bases"]), buses, lines, switches,
                       transformers, loads, generators)
    _validate(case)
    blocks = compute_blocks(case, alpha_base, alpha_per_load)
    block_of_bus = {bus: b.id for b in blocks for bus in b.buses}
    case = replace(case, blocks=tuple(blocks), block_of_bus=block_of_bus)
    _validate_blocks(case)
    return case


def _check_unique(items, kind):
    seen = set()
    for it in items:
        if it.id in seen:
            raise CaseInvariantError(f"{kind} {it.id}", "id", "duplicate id")
        seen.add(it.id)


def _validate(case: NetworkCase) -> None:
    for items, kind in ((case.buses, "bus"), (case.lines, "line"), (case.switches, "switch"),
                        (case.transformers, "transformer"), (case.loads, "load"),
                        (case.generators, "generator")):
        _check_unique(items, kind)
    buses = case.bus_map
    for kind, edges in (("line", case.lines), ("switch", case.switches), ("transformer", case.transformers)):
        for e in edges:
            for end in ("from_bus", "to_bus"):
                bid = getattr(e, end)
                if bid not in buses:
                    raise CaseInvariantError(f"{kind} {e.id}", end, f"unknown bus {bid!r}")
                missing = set(e.phases) - set(buses[bid].phases)
                if missing:
                    raise CaseInvariantError(f"{kind} {e.id}", "phases",
                                             f"phases {sorted(missing)} not present at bus {bid}")
            if e.from_bus == e.to_bus:
                raise CaseInvariantError(f"{kind} {e.id}", "to_bus", "edge connects a bus to itself")
    for kind, devs in (("load", case.loads), ("generator", case.generators)):
        for dv in devs:
            if dv.bus not in buses:
                raise CaseInvariantError(f"{kind} {dv.id}", "bus", f"unknown bus {dv.bus!r}")
            missing = set(dv.phases) - set(buses[dv.bus].phases)
            if missing:
                raise CaseInvariantError(f"{kind} {dv.id}", "phases",
                                         f"phases {sorted(missing)} not present at bus {dv.bus}")
    if not case.generators:
        raise CaseInvariantError("case", "generators", "at least one generator is required")
    g = nx.Graph()
    g.add_nodes_from(buses)
    for e in (*case.lines, *case.switches, *case.transformers):
        g.add_edge(e.from_bus, e.to_bus)
    if g.number_of_nodes() and not nx.is_connected(g):
        comps = sorted((sorted(c) for c in nx.connected_components(g)), key=lambda c: c[0])
        raise CaseInvariantError("case", "buses",
                                 f"network is not connected with all switches closed; island {comps[1][:5]}")


def _validate_blocks(case: NetworkCase) -> None:
    for sw in case.switches:
        a, b = case.switch_blocks(sw)
        if a == b:
            raise CaseInvariantError(f"switch {sw.id}", "to_bus",
                                     f"both ends lie in block {a}; a switch must join two blocks")
    for blk in case.blocks:
        if not blk.generators and not case.switches_of_block(blk.id):
            log.warning("block %d has no generator and no switch; it can never be energised", blk.id)


def load_case(path: str | Path, alpha_base: float = DEFAULT_ALPHA_BASE,
              alpha_per_load: float = DEFAULT_ALPHA_PER_LOAD) -> NetworkCase:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise CaseParseError(f"cannot read {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CaseParseError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return parse_case(data, name=path.stem, alpha_base=alpha_base, alpha_per_load=alpha_per_load)


def bundled_case_path(name: str) -> Path:
    p = Path(__file__).parent / "cases" / f"{name}.json"
    if not p.exists():
        raise FileNotFoundError(f"no bundled case named {name!r}")
    return p


def load_bundled(name: str, **kw) -> NetworkCase:
    return load_case(bundled_case_path(name), **kw)


def case_to_dict(case: NetworkCase) -> dict:
    """Inverse of :func:`parse_case` (derived structures omitted)."""
    def cpx(m):
        return {ph: [v.real, v.imag] for ph, v in m.items()}

    return {
        "name": case.name,
        "bases": dict(case.bases),
        "buses": [{"id": b.id, "phases": list(b.phases), "v_min": b.v_min, "v_max": b.v_max,
                   "shunt": cpx(b.shunt), **({"kv_base": b.kv_base} if b.kv_base is not None else {})}
                  for b in case.buses],
        "lines": [{"id": e.id, "from_bus": e.from_bus, "to_bus": e.to_bus, "phases": list(e.phases),
                   "r": e.r.tolist(), "x": e.x.tolist(), "s_max": dict(e.s_max)} for e in case.lines],
        "switches": [{"id": e.id, "from_bus": e.from_bus, "to_bus": e.to_bus, "phases": list(e.phases),
                      "s_max": dict(e.s_max), "normally_closed": e.normally_closed} for e in case.switches],
        "transformers": [{"id": e.id, "from_bus": e.from_bus, "to_bus": e.to_bus, "phases": list(e.phases),
                          "connection": e.connection, "tap_ratio": e.tap_ratio, "s_max": dict(e.s_max)}
                         for e in case.transformers],
        "loads": [{"id": d.id, "bus": d.bus, "phases": list(d.phases), "s_nominal": cpx(d.s_nominal),
                   "s_lower": cpx(d.s_lower), "s_upper": cpx(d.s_upper), "uncertain": d.uncertain}
                  for d in case.loads],
        "generators": [{"id": g.id, "bus": g.bus, "phases": list(g.phases), "s_min": cpx(g.s_min),
                        "s_max": cpx(g.s_max), "c1": g.c1, "c0": g.c0,
                        **({"ramp_fraction": g.ramp_fraction} if g.ramp_fraction is not None else {})}
                       for g in case.generators],
    }
