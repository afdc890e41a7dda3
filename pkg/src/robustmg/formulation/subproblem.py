"""Second-stage recourse model for one load realisation, and cut extraction."""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from ..lp_engine import LinearProgram, LpSolution
from ..net_model import Load, NetworkCase
from .indexer import RECOURSE, ModelBuilder, XKey
from .master import CutRecord, MasterSolution, nominal_loads
from .power_flow import PowerFlowOptions, build_power_flow, bus_demand

SLACK_KINDS = ("h+p", "h-p", "h+q", "h-q")


@dataclass(frozen=True)
class ExtremeScenario:
    """A vertex of the load box: one (zeta+, zeta-) pair per uncertain load.

    Loads absent from both maps sit at their nominal value.
    """

    id: int
    zeta_plus: Mapping[str, int] = field(default_factory=dict)
    zeta_minus: Mapping[str, int] = field(default_factory=dict)

    def load_value(self, load: Load, phase: str) -> complex:
        s0 = load.s_nominal[phase]
        up = self.zeta_plus.get(load.id, 0)
        dn = self.zeta_minus.get(load.id, 0)
        return s0 + up * (load.s_upper[phase] - s0) - dn * (s0 - load.s_lower[phase])

    def loads(self, case: NetworkCase) -> dict[str, dict[str, complex]]:
        return {d.id: {ph: self.load_value(d, ph) for ph in d.phases} for d in case.loads}

    def label(self) -> str:
        parts = []
        for k in sorted(set(self.zeta_plus) | set(self.zeta_minus)):
            s = "+" if self.zeta_plus.get(k) else "-" if self.zeta_minus.get(k) else "0"
            parts.append(f"{k}{s}")
        return " ".join(parts) or "nominal"


NOMINAL = ExtremeScenario(-1)


@dataclass
class SubproblemModel:
    case: NetworkCase
    builder: ModelBuilder
    scenario: ExtremeScenario | None

    @property
    def lp(self) -> LinearProgram:
        return self.builder.lp

    def with_loads(self, loads: Mapping[str, Mapping[str, complex]],
                   scenario: ExtremeScenario | None = None) -> "SubproblemModel":
        """Same model with different demand; only balance right-hand sides change."""
        mb = self.builder
        lp = mb.lp.copy()
        couplings = {i: dict(c) for i, c in mb.couplings.items()}
        demand = bus_demand(self.case, loads)
        blk = self.case.block_of_bus
        for (bus, ph, part), i in mb.balance_rows.items():
            zkey = ("z_bl", blk[bus])
            s = demand.get((bus, ph), 0j)
            load_part = s.real if part == "p" else s.imag
            old = -couplings.get(i, {}).get(zkey, 0.0)
            lp.rhs[i] -= (load_part - old) * mb.x_value(zkey)
            if load_part:
                couplings.setdefault(i, {})[zkey] = -load_part
            elif i in couplings:
                couplings[i].pop(zkey, None)
        clone = copy.copy(mb)
        clone.lp = lp
        clone.couplings = couplings
        return SubproblemModel(self.case, clone, scenario)

    def slack_indices(self) -> list[int]:
        mb = self.builder
        return [mb[k] for k in mb.index.keys() if k[0] in SLACK_KINDS]

    def total_slack(self, sol: LpSolution) -> float:
        return float(np.sum(sol.primal[self.slack_indices()]))

    def adjustments(self, sol: LpSolution) -> dict[str, dict[tuple[str, str], float]]:
        """Recourse set-point changes keyed by kind (o+p, o-p, o+q, o-q)."""
        mb = self.builder
        out: dict[str, dict] = {k: {} for k in ("o+p", "o-p", "o+q", "o-q")}
        for key in mb.index.keys():
            if key[0] in out:
                out[key[0]][(key[1], key[2])] = float(sol.primal[mb[key]])
        return out

    def slacks(self, sol: LpSolution) -> dict[str, dict[tuple[str, str], float]]:
        mb = self.builder
        out: dict[str, dict] = {k: {} for k in SLACK_KINDS}
        for key in mb.index.keys():
            if key[0] in out:
                out[key[0]][(key[1], key[2])] = float(sol.primal[mb[key]])
        return out


def first_stage_values(x_star) -> dict[XKey, float]:
    if isinstance(x_star, MasterSolution):
        return x_star.x_values()
    return dict(x_star)


def build_subproblem(case: NetworkCase, x_star, scenario: ExtremeScenario | None = None,
                     opts: PowerFlowOptions = PowerFlowOptions(),
                     loads: Mapping[str, Mapping[str, complex]] | None = None,
                     ramp_fraction: float | None = None) -> SubproblemModel:
    """Recourse LP at first-stage point ``x_star``.

    ``scenario=None`` with ``loads=None`` means nominal demand; an explicit
    ``loads`` mapping (used for sampled realisations) wins over both.
    """
    x = first_stage_values(x_star)
    sid = "nominal" if scenario is None else scenario.id
    mb = ModelBuilder(f"recourse[{case.name},scenario={sid}]", RECOURSE, x)
    if loads is None:
        loads = nominal_loads(case) if scenario is None else scenario.loads(case)
    build_power_flow(mb, case, loads, opts, ramp_fraction=ramp_fraction)
    return SubproblemModel(case, mb, scenario)


def extract_cut(model: SubproblemModel, sol: LpSolution, x_star=None) -> CutRecord:
    """Sub-gradient cut of the recourse value at ``x_star``."""
    if not sol.optimal:
        raise ValueError("cuts can only be extracted from optimal recourse solutions")
    mb = model.builder
    x = first_stage_values(x_star) if x_star is not None else dict(mb.x_values)
    pi, A, tags = {}, {}, {}
    for i, coeffs in mb.couplings.items():
        tag = mb.lp.row_tags[i]
        if not tag:
            raise RuntimeError(f"x-coupled row {i} has no tag")
        p = float(sol.duals[i])
        if p != 0.0:
            pi[i] = p
            A[i] = dict(coeffs)
            tags[i] = tag
    sid = None if model.scenario is None else model.scenario.id
    return CutRecord(float(sol.objective_value), pi, A, x, sid, tags)
