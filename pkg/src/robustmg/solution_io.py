"""Solution files: JSON serialisation, reload and DOT rendering."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Mapping

from .config import RunConfig
from .formulation import MasterSolution
from .net_model import NetworkCase
from .robust_solver import RpopSolution

SCHEMA = "robustmg.solution/1"
REQUIRED_KEYS = ("schema", "case", "status", "objective", "blocks", "switches", "generators")


class SolutionFormatError(ValueError):
    pass


def _pq(v: complex | tuple) -> list[float]:
    if isinstance(v, complex):
        return [v.real, v.imag]
    return [float(v[0]), float(v[1])]


def _clean(x: float) -> float:
    # keeps files free of -0.0 and 1e-17 noise so reruns diff cleanly
    x = float(x)
    return 0.0 if abs(x) < 1e-12 else x


def solution_to_dict(sol: RpopSolution, cfg: RunConfig | None = None) -> dict[str, Any]:
    case: NetworkCase = sol.case
    ms = sol.master
    scale = case.cost_scale
    currency = case.bases.get("currency", "")
    gf = set(ms.grid_forming)
    blocks = []
    for b in case.blocks:
        blocks.append({"id": b.id, "energized": bool(ms.z_bl[b.id]), "buses": sorted(b.buses),
                       "loads": sorted(b.loads), "generators": sorted(b.generators), "weight": b.weight})
    switches = []
    for sw in case.switches:
        a, c = case.switch_blocks(sw)
        switches.append({"id": sw.id, "from_block": a, "to_block": c, "closed": bool(ms.z_sw[sw.id]),
                         "normally_closed": sw.normally_closed})
    gens = []
    for g in case.generators:
        gens.append({"id": g.id, "bus": g.bus, "block": case.block_of_bus[g.bus], "grid_forming": g.id in gf,
                     "setpoint": {ph: [_clean(ms.pg[(g.id, ph)]), _clean(ms.qg[(g.id, ph)])] for ph in g.phases}})
    unc = sol.uncertainty
    uncertainty = None
    if unc is not None:
        uncertainty = {"level": unc.level,
                       "loads": [{"id": u.load_id, "block": u.block,
                                  "lower": {ph: _pq(v) for ph, v in u.s_lower.items()},
                                  "upper": {ph: _pq(v) for ph, v in u.s_upper.items()}} for u in unc.loads]}
    scenarios = []
    for sc in sol.scenarios:
        pol = sol.policies.get(sc.id, {})
        adj: dict[str, dict[str, dict[str, float]]] = {}
        for kind, vals in pol.get("adjustments", {}).items():
            for (gid, ph), v in vals.items():
                if abs(v) > 1e-12:
                    adj.setdefault(gid, {}).setdefault(ph, {})[kind] = v
        scenarios.append({"id": sc.id, "label": sc.label(), "zeta_plus": dict(sc.zeta_plus),
                          "zeta_minus": dict(sc.zeta_minus), "recourse_cost": _clean(pol.get("V2", 0.0)),
                          "slack": _clean(pol.get("slack", 0.0)), "adjustments": adj})
    cert = sol.certificate
    out = {
        "schema": SCHEMA,
        "case": case.name,
        "status": sol.status.value,
        "objective": {
            "total": sol.objective,
            "lower_bound": sol.lower_bound,
            "generation_cost": ms.gen_cost,
            "load_shed_cost": ms.shed_cost,
            "worst_case_recourse": sol.worst_V2,
            "theta": ms.theta,
            "currency": currency,
            "cost_scale": scale,
            "total_in_currency": sol.objective * scale,
        },
        "energized_blocks": ms.energized_blocks,
        "closed_switches": ms.closed_switches,
        "grid_forming": ms.grid_forming,
        "blocks": blocks,
        "switches": switches,
        "generators": gens,
        "uncertainty": uncertainty,
        "iterations": [{"k": e.k, "master_objective": e.master_objective, "theta": e.theta,
                        "worst_scenario": e.worst_scenario, "V2": e.V2, "slack": e.total_slack,
                        "max_slack": e.max_slack, "omega": e.omega, "subproblem_solves": e.subproblem_solves}
                       for e in sol.logs],
        "n_cuts": len(sol.cuts),
        "certificate": None if cert is None else {"max_slack": cert.max_slack, "n_scenarios": cert.n_scenarios,
                                                  "epsilon": cert.epsilon, "omega": cert.omega,
                                                  "passed": cert.passed},
        "scenarios": scenarios,
    }
    if cfg is not None:
        out["config"] = cfg.as_dict()
    return out


def dumps(data: Mapping[str, Any]) -> str:
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def write_solution(sol: RpopSolution, path: str | Path, cfg: RunConfig | None = None) -> dict[str, Any]:
    data = solution_to_dict(sol, cfg)
    Path(path).write_text(dumps(data))
    return data


def check_solution(data: Any) -> dict[str, Any]:
    if not isinstance(data, dict):
        raise SolutionFormatError("solution document must be a JSON object")
    missing = [k for k in REQUIRED_KEYS if k not in data]
    if missing:
        raise SolutionFormatError(f"solution is missing keys {missing}")
    if data["schema"] != SCHEMA:
        raise SolutionFormatError(f"unsupported solution schema {data['schema']!r}")
    return data


def read_solution(path: str | Path) -> dict[str, Any]:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise SolutionFormatError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SolutionFormatError(f"{path}: invalid JSON: {exc.msg} (line {exc.lineno})") from exc
    return check_solution(data)


def master_from_dict(data: Mapping[str, Any]) -> MasterSolution:
    """Rebuild the first-stage plan stored in a solution file."""
    z_sw = {s["id"]: int(s["closed"]) for s in data["switches"]}
    z_bl = {int(b["id"]): int(b["energized"]) for b in data["blocks"]}
    z_inv = {g["id"]: int(g["grid_forming"]) for g in data["generators"]}
    pg, qg = {}, {}
    for g in data["generators"]:
        for ph, (p, q) in g["setpoint"].items():
            pg[(g["id"], ph)] = float(p)
            qg[(g["id"], ph)] = float(q)
    obj = data["objective"]
    return MasterSolution(z_sw, z_bl, z_inv, {}, pg, qg, float(obj.get("theta", 0.0)),
                          float(obj["generation_cost"]) + float(obj["load_shed_cost"]) + float(obj.get("theta", 0.0)),
                          float(obj["load_shed_cost"]), float(obj["generation_cost"]))


def plan_matches_case(data: Mapping[str, Any], case: NetworkCase) -> list[str]:
    """Reasons the solution cannot be applied to ``case`` (empty when it can)."""
    problems = []
    if data["case"] != case.name:
        problems.append(f"solution was computed for case {data['case']!r}, not {case.name!r}")
    if {s["id"] for s in data["switches"]} != set(case.switch_map):
        problems.append("switch ids differ between solution and case")
    if {g["id"] for g in data["generators"]} != set(case.generator_map):
        problems.append("generator ids differ between solution and case")
    if {int(b["id"]) for b in data["blocks"]} != {b.id for b in case.blocks}:
        problems.append("block numbering differs between solution and case")
    return problems


def to_dot(data: Mapping[str, Any]) -> str:
    """Blocks as nodes (filled by energisation), switches as edges (dashed when open)."""
    gf_by_block: dict[int, list[str]] = {}
    for g in data["generators"]:
        if g["grid_forming"]:
            gf_by_block.setdefault(int(g["block"]), []).append(g["id"])
    lines = [f'graph "{data["case"]}" {{', '  node [shape=box, style=filled];']
    for b in data["blocks"]:
        on = bool(b["energized"])
        label = f"block {b['id']}\\nbuses: {', '.join(b['buses'])}"
        gfs = gf_by_block.get(int(b["id"]))
        if gfs:
            label += f"\\nGF: {', '.join(gfs)}"
        lines.append(f'  B{b["id"]} [label="{label}", energized="{str(on).lower()}", '
                     f'fillcolor="{"palegreen" if on else "lightgrey"}"{", penwidth=2" if gfs else ""}];')
    for s in data["switches"]:
        closed = bool(s["closed"])
        lines.append(f'  B{s["from_block"]} -- B{s["to_block"]} [label="{s["id"]}", '
                     f'closed="{str(closed).lower()}", style={"solid" if closed else "dashed"}];')
    lines.append("}")
    return "\n".join(lines) + "\n"
