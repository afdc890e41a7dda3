"""Box uncertainty, extreme-scenario search and the cutting-plane loop."""

from __future__ import annotations

import enum
import itertools
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping

from .config import RunConfig
from .lp_engine import LpSolution, dual_check, solve_lp
from .milp_engine import MipOptions
from .net_model import NetworkCase
from .formulation import (CutRecord, ExtremeScenario, MasterOptions, MasterSolution, PowerFlowOptions,
                          SubproblemModel, build_master, build_subproblem, extract_cut, solve_master)

log = logging.getLogger(__name__)


class ScenarioCapError(ValueError):
    pass


# ---------------------------------------------------------------------------
# uncertainty
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class UncertainLoad:
    load_id: str
    block: int
    s_lower: Mapping[str, complex]
    s_nominal: Mapping[str, complex]
    s_upper: Mapping[str, complex]

    @property
    def zero_width(self) -> bool:
        return all(self.s_lower[ph] == self.s_upper[ph] for ph in self.s_nominal)


def _scaled_bounds(s0: complex, level: float) -> tuple[complex, complex]:
    a, b = s0 * (1 - level), s0 * (1 + level)
    return (complex(min(a.real, b.real), min(a.imag, b.imag)),
            complex(max(a.real, b.real), max(a.imag, b.imag)))


@dataclass(frozen=True)
class UncertaintySet:
    """Per-load boxes ``s_lower <= s <= s_upper`` around the nominal demand."""

    loads: tuple[UncertainLoad, ...]
    level: float | None = None

    @classmethod
    def from_case(cls, case: NetworkCase) -> "UncertaintySet":
        return cls(tuple(UncertainLoad(d.id, case.block_of_bus[d.bus], dict(d.s_lower), dict(d.s_nominal),
                                       dict(d.s_upper)) for d in case.uncertain_loads()))

    @classmethod
    def from_level(cls, case: NetworkCase, level: float) -> "UncertaintySet":
        """Boxes ``s_nominal * (1 +/- level)`` for every load flagged uncertain."""
        if not 0 <= level < 1:
            raise ValueError("uncertainty level must lie in [0, 1)")
        entries = []
        for d in case.uncertain_loads():
            lo, hi = {}, {}
            for ph in d.phases:
                lo[ph], hi[ph] = _scaled_bounds(d.s_nominal[ph], level)
            entries.append(UncertainLoad(d.id, case.block_of_bus[d.bus], lo, dict(d.s_nominal), hi))
        return cls(tuple(entries), level)

    def apply(self, case: NetworkCase) -> NetworkCase:
        """Case whose load bounds are the boxes of this set."""
        by_id = {u.load_id: u for u in self.loads}
        new = []
        for d in case.loads:
            u = by_id.get(d.id)
            if u is None:
                new.append(replace(d, s_lower=dict(d.s_nominal), s_upper=dict(d.s_nominal), uncertain=False))
            else:
                new.append(replace(d, s_lower=dict(u.s_lower), s_upper=dict(u.s_upper), uncertain=True))
        return case.with_loads(new)

    def contains(self, loads: Mapping[str, Mapping[str, complex]], case: NetworkCase, tol: float = 1e-12) -> bool:
        by_id = {u.load_id: u for u in self.loads}
        for d in case.loads:
            u = by_id.get(d.id)
            for ph in d.phases:
                s = loads[d.id][ph]
                lo = u.s_lower[ph] if u else d.s_nominal[ph]
                hi = u.s_upper[ph] if u else d.s_nominal[ph]
                if s.real < lo.real - tol or s.real > hi.real + tol or s.imag < lo.imag - tol or s.imag > hi.imag + tol:
                    return False
        return True


def enumerate_extremes(uncertainty: UncertaintySet, z_bl: Mapping[int, int], cap: int = 20) -> list[ExtremeScenario]:
    """All vertices over the uncertain loads of energised blocks.

    Order is lexicographic over loads in case order with the lower vertex
    first; loads of de-energised blocks and zero-width loads stay nominal.
    """
    active = [u for u in uncertainty.loads if z_bl.get(u.block, 0) and not u.zero_width]
    if len(active) > cap:
        raise ScenarioCapError(f"{len(active)} uncertain loads would need 2^{len(active)} scenarios; "
                               f"raise scenario_cap (currently {cap}) to allow this")
    out = []
    for k, signs in enumerate(itertools.product((0, 1), repeat=len(active))):
        plus = {u.load_id: s for u, s in zip(active, signs)}
        minus = {u.load_id: 1 - s for u, s in zip(active, signs)}
        out.append(ExtremeScenario(k, plus, minus))
    return out


# ---------------------------------------------------------------------------
# worst case
# ---------------------------------------------------------------------------

@dataclass
class ScenarioResult:
    scenario: ExtremeScenario
    model: SubproblemModel
    solution: LpSolution
    value: float
    slack: float


@dataclass
class WorstCase:
    scenario: ExtremeScenario
    V2: float
    solution: LpSolution
    model: SubproblemModel
    results: list[ScenarioResult]

    @property
    def n_solves(self) -> int:
        return len(self.results)

    @property
    def max_slack(self) -> float:
        return max(r.slack for r in self.results)

    @property
    def slack(self) -> float:
        return next(r.slack for r in self.results if r.scenario.id == self.scenario.id)


def _pf_options(cfg: RunConfig, omega: float | None = None) -> PowerFlowOptions:
    return PowerFlowOptions(facets=cfg.polygon_facets, omega=cfg.omega if omega is None else omega,
                            ramp_fraction=cfg.ramp_fraction)


def recourse_template(case: NetworkCase, x_star, cfg: RunConfig, omega: float | None = None) -> SubproblemModel:
    """Nominal-demand recourse model; scenarios only swap right-hand sides."""
    return build_subproblem(case, x_star, None, _pf_options(cfg, omega))


def solve_scenario(case: NetworkCase, x_star, scenario: ExtremeScenario | None, cfg: RunConfig,
                   omega: float | None = None, template: SubproblemModel | None = None) -> ScenarioResult:
    if template is None:
        template = recourse_template(case, x_star, cfg, omega)
    loads = None if scenario is None else scenario.loads(case)
    model = template if loads is None else template.with_loads(loads, scenario)
    sol = solve_lp(model.lp, backend=cfg.lp_backend)
    if not sol.optimal:
        raise RuntimeError(f"recourse LP for scenario {scenario and scenario.id} ended {sol.status.value}")
    if cfg.check_duals:
        rep = dual_check(model.lp, sol)
        if not rep.passed:
            raise RuntimeError(f"dual check failed on scenario {scenario and scenario.id}: {rep.messages}")
    return ScenarioResult(scenario, model, sol, sol.objective_value, model.total_slack(sol))


SolveCounter = Callable[[int], None]


def worst_case(case: NetworkCase, x_star: MasterSolution, uncertainty: UncertaintySet, cfg: RunConfig = RunConfig(),
               omega: float | None = None, on_solve: SolveCounter | None = None) -> WorstCase:
    """Solve the recourse LP at every vertex and keep the most expensive one.

    Ties (within 1e-9 relative) go to the lowest scenario id, so the result
    does not depend on the order in which concurrent solves finish.
    """
    case = uncertainty.apply(case)
    scenarios = enumerate_extremes(uncertainty, x_star.z_bl, cfg.scenario_cap)
    template = recourse_template(case, x_star, cfg, omega)

    def run(sc):
        r = solve_scenario(case, x_star, sc, cfg, omega, template)
        if on_solve:
            on_solve(sc.id)
        return r

    if cfg.workers > 1 and len(scenarios) > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(run, scenarios))
    else:
        results = [run(sc) for sc in scenarios]
    results.sort(key=lambda r: r.scenario.id)
    log.debug("worst-case search: %d subproblem solves", len(results))
    best = results[0]
    for r in results[1:]:
        if r.value > best.value + 1e-9 * max(1.0, abs(best.value)):
            best = r
    return WorstCase(best.scenario, best.value, best.solution, best.model, results)


# ---------------------------------------------------------------------------
# cutting-plane loop
# ---------------------------------------------------------------------------

class RpopStatus(str, enum.Enum):
    CONVERGED = "Converged"
    ITERATION_LIMIT = "IterationLimit"


@dataclass
class IterationLog:
    k: int
    master_objective: float
    theta: float
    worst_scenario: int
    V2: float
    total_slack: float
    seconds: float
    omega: float = 705.0
    subproblem_solves: int = 0
    max_slack: float = 0.0
    energized_blocks: tuple[int, ...] = ()

    def line(self) -> str:
        return (f"k={self.k} master_obj={self.master_objective:.9g} theta={self.theta:.9g} "
                f"worst_scenario={self.worst_scenario} V2={self.V2:.9g} slack={self.total_slack:.3e} "
                f"solves={self.subproblem_solves} omega={self.omega:g} seconds={self.seconds:.3f}")


@dataclass
class Certificate:
    max_slack: float
    n_scenarios: int
    epsilon: float
    omega: float

    @property
    def passed(self) -> bool:
        return self.max_slack <= self.epsilon


@dataclass
class RpopSolution:
    status: RpopStatus
    master: MasterSolution
    objective: float
    lower_bound: float
    worst_V2: float
    cuts: list[CutRecord]
    logs: list[IterationLog]
    policies: dict[int, dict] = field(default_factory=dict)
    scenarios: list[ExtremeScenario] = field(default_factory=list)
    certificate: Certificate | None = None
    uncertainty: UncertaintySet | None = None
    case: NetworkCase | None = None

    @property
    def converged(self) -> bool:
        return self.status is RpopStatus.CONVERGED

    @property
    def first_stage_cost(self) -> float:
        return self.master.shed_cost + self.master.gen_cost


def prepare_case(case: NetworkCase, cfg: RunConfig, uncertainty: UncertaintySet | None = None
                 ) -> tuple[NetworkCase, UncertaintySet]:
    """Apply block weights and the uncertainty boxes selected by ``cfg``."""
    case = case.with_weights(cfg.alpha_base, cfg.alpha_per_load)
    if uncertainty is None:
        uncertainty = (UncertaintySet.from_case(case) if cfg.uncertainty_level is None
                       else UncertaintySet.from_level(case, cfg.uncertainty_level))
    return uncertainty.apply(case), uncertainty


def master_options(case: NetworkCase, cfg: RunConfig) -> MasterOptions:
    fixed: dict[str, int] = {}
    if cfg.fixed_topology:
        fixed.update({sw.id: int(sw.normally_closed) for sw in case.switches})
    known = case.switch_map
    for sid in cfg.open_switches:
        if sid not in known:
            raise KeyError(f"unknown switch id {sid!r} in open_switches")
        fixed[sid] = 0
    mip = MipOptions(abs_gap=cfg.mip_gap, rel_gap=cfg.mip_gap, node_limit=cfg.node_limit,
                     lp_backend=cfg.lp_backend)
    return MasterOptions(k_der=cfg.k_der, facets=cfg.polygon_facets, master_nominal_pf=cfg.master_nominal_pf,
                         fixed_switches=fixed or None, mip=mip)


def solve_rpop(case: NetworkCase, uncertainty: UncertaintySet | None = None, cfg: RunConfig = RunConfig(),
               log_fn: Callable[[IterationLog], None] | None = None,
               dump_dir=None) -> RpopSolution:
    """Cutting-plane solution of the two-stage robust problem.

    Each iteration solves the master, searches every load vertex for the
    most expensive recourse, and appends that vertex's sub-gradient cut.
    The loop stops once the master's epigraph variable matches the worst
    recourse value and no vertex needs balance slack beyond ``epsilon``.
    If the epigraph gap closes while slack is still needed, the slack
    penalty is too weak to steer the master; it is then multiplied by
    ``omega_growth`` (earlier cuts stay valid because the recourse value
    only grows with the penalty).
    """
    case, uncertainty = prepare_case(case, cfg, uncertainty)
    mopts = master_options(case, cfg)
    cuts: list[CutRecord] = [CutRecord.trivial()]
    logs: list[IterationLog] = []
    omega = cfg.omega
    status = RpopStatus.ITERATION_LIMIT
    ms: MasterSolution | None = None
    wc: WorstCase | None = None
    for k in range(1, cfg.max_iterations + 1):
        t0 = time.perf_counter()
        model = build_master(case, cuts, mopts)
        if dump_dir is not None:
            model.builder.lp.dump(f"{dump_dir}/master_k{k}.lp")
        ms = solve_master(model)
        if ms is None:
            raise RuntimeError("master problem is infeasible; check fixed switch states")
        wc = worst_case(case, ms, uncertainty, cfg, omega)
        if dump_dir is not None:
            wc.model.lp.dump(f"{dump_dir}/recourse_k{k}_s{wc.scenario.id}.lp")
        cut = extract_cut(wc.model, wc.solution, ms)
        entry = IterationLog(k, ms.objective, ms.theta, wc.scenario.id, wc.V2, wc.slack,
                             time.perf_counter() - t0, omega, wc.n_solves, wc.max_slack,
                             tuple(ms.energized_blocks))
        logs.append(entry)
        if log_fn:
            log_fn(entry)
        log.info(entry.line())
        gap_closed = ms.theta >= wc.V2 - cfg.gap_tolerance * (1.0 + abs(ms.objective))
        if gap_closed and wc.max_slack <= cfg.epsilon:
            status = RpopStatus.CONVERGED
            break
        cuts.append(cut)
        if gap_closed:
            if omega * cfg.omega_growth > cfg.omega_max:
                log.warning("slack penalty reached omega_max with slack %.3e; stopping", wc.max_slack)
                break
            omega *= cfg.omega_growth
            log.info("raising slack penalty to %g", omega)

    assert ms is not None and wc is not None
    sol = RpopSolution(status, ms, ms.objective - ms.theta + wc.V2, ms.objective, wc.V2, cuts, logs,
                       uncertainty=uncertainty, case=case)
    recheck(sol, cfg, omega)
    return sol


def recheck(sol: RpopSolution, cfg: RunConfig, omega: float | None = None) -> Certificate:
    """Re-solve every vertex at the final plan and attach recourse policies."""
    case, ms = sol.case, sol.master
    scenarios = enumerate_extremes(sol.uncertainty, ms.z_bl, cfg.scenario_cap)
    worst = 0.0
    policies = {}
    om = cfg.omega if omega is None else omega
    template = recourse_template(case, ms, cfg, om)
    for sc in scenarios:
        r = solve_scenario(case, ms, sc, cfg, om, template)
        worst = max(worst, r.slack)
        policies[sc.id] = {"adjustments": r.model.adjustments(r.solution), "slack": r.slack, "V2": r.value}
    sol.policies = policies
    sol.scenarios = scenarios
    sol.certificate = Certificate(worst, len(scenarios), cfg.epsilon, om)
    if sol.converged and not sol.certificate.passed:
        log.error("post-hoc check found slack %.3e above epsilon", worst)
    return sol.certificate


def interior_check(sol: RpopSolution, n: int, seed: int, cfg: RunConfig = RunConfig()) -> float:
    """Largest balance slack over ``n`` uniform samples of the load box."""
    from .feasibility_lab import sample_loads

    worst = 0.0
    omega = sol.certificate.omega if sol.certificate is not None else None
    template = recourse_template(sol.case, sol.master, cfg, omega)
    for loads in sample_loads(sol.uncertainty, n, seed, sol.case):
        model = template.with_loads(loads)
        r = solve_lp(model.lp, backend=cfg.lp_backend)
        worst = max(worst, model.total_slack(r))
    return worst


__all__ = ["UncertainLoad", "UncertaintySet", "ScenarioCapError", "enumerate_extremes", "worst_case",
           "WorstCase", "ScenarioResult", "RpopStatus", "IterationLog", "Certificate", "RpopSolution",
           "solve_rpop", "recheck", "prepare_case", "master_options", "interior_check", "solve_scenario"]
