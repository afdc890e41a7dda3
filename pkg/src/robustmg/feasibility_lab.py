"""Out-of-sample feasibility of a fixed plan under random load draws."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .formulation import MasterSolution, PowerFlowOptions, SubproblemModel, build_subproblem
from .lp_engine import solve_lp
from .net_model import NetworkCase
from .robust_solver import UncertaintySet


@dataclass(frozen=True)
class SamplingPlan:
    n_samples: int = 10_000
    seed: int = 0
    levels: tuple[float, ...] = (0.10, 0.15, 0.25)
    der_window: float = 0.30
    epsilon: float = 1e-6
    lp_backend: str = "auto"
    facets: int = 8
    keep_residuals: bool = False

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be at least 1")
        if not 0 < self.der_window <= 1:
            raise ValueError("der_window must lie in (0, 1]")
        for lv in self.levels:
            if not 0 <= lv < 1:
                raise ValueError(f"level {lv} outside [0, 1)")


@dataclass
class LevelResult:
    level: float
    n_samples: int
    n_feasible: int
    residuals: list[float] = field(default_factory=list)

    @property
    def fraction(self) -> float:
        return self.n_feasible / self.n_samples


@dataclass
class FeasibilityReport:
    case: str
    seed: int
    der_window: float
    levels: list[LevelResult]

    def fractions(self) -> dict[float, float]:
        return {r.level: r.fraction for r in self.levels}

    def to_json(self) -> str:
        data = {"case": self.case, "seed": self.seed, "der_window": self.der_window,
                "levels": [{**asdict(r), "fraction": r.fraction} for r in self.levels]}
        for entry in data["levels"]:
            if not entry["residuals"]:
                del entry["residuals"]
        return json.dumps(data, indent=2, sort_keys=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["level", "n_samples", "n_feasible", "fraction"])
        for r in self.levels:
            w.writerow([r.level, r.n_samples, r.n_feasible, f"{r.fraction:.6f}"])
        return buf.getvalue()

    def write(self, stem: str | Path) -> tuple[Path, Path]:
        stem = Path(stem)
        pj, pc = stem.with_suffix(".json"), stem.with_suffix(".csv")
        pj.write_text(self.to_json() + "\n")
        pc.write_text(self.to_csv())
        return pj, pc


def sample_loads(uncertainty: UncertaintySet, n: int, seed: int, case: NetworkCase
                 ) -> list[dict[str, dict[str, complex]]]:
    """Uniform draws from the load box, one scalar per load shared by its phases.

    Each uncertain load gets ``t ~ U[0, 1]`` and sits at
    ``s_lower + t (s_upper - s_lower)`` on every phase; other loads stay
    nominal.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.default_rng(seed)
    t = rng.random((n, len(uncertainty.loads)))
    by_id = {u.load_id: k for k, u in enumerate(uncertainty.loads)}
    out = []
    for row in t:
        sample = {}
        for d in case.loads:
            k = by_id.get(d.id)
            if k is None:
                sample[d.id] = dict(d.s_nominal)
            else:
                u = uncertainty.loads[k]
                sample[d.id] = {ph: u.s_lower[ph] + row[k] * (u.s_upper[ph] - u.s_lower[ph]) for ph in d.phases}
        out.append(sample)
    return out


def _window_model(case: NetworkCase, plan: MasterSolution, der_window: float, facets: int) -> SubproblemModel:
    opts = PowerFlowOptions(facets=facets, omega=1.0, adjustment_cost=False)
    return build_subproblem(case, plan, None, opts, ramp_fraction=der_window)


def _verdict(model: SubproblemModel, epsilon: float, lp_backend: str) -> tuple[bool, float]:
    sol = solve_lp(model.lp, backend=lp_backend)
    residual = model.total_slack(sol)
    return residual <= epsilon, residual


def check_feasible(case: NetworkCase, plan: MasterSolution, der_window: float,
                   loads: Mapping[str, Mapping[str, complex]], epsilon: float = 1e-6,
                   lp_backend: str = "auto", facets: int = 8) -> tuple[bool, float]:
    """Is there a dispatch within the DER window that balances ``loads``?

    The DERs may move at most ``der_window`` of their capacity away from the
    plan's set-points.  Returns the verdict and the minimal total balance
    slack.
    """
    model = _window_model(case, plan, der_window, facets).with_loads(loads)
    return _verdict(model, epsilon, lp_backend)


def run_study(case: NetworkCase, plan: MasterSolution, sampling: SamplingPlan) -> FeasibilityReport:
    """Sample each uncertainty level and count feasible draws."""
    base = _window_model(case, plan, sampling.der_window, sampling.facets)
    results = []
    for level in sampling.levels:
        unc = UncertaintySet.from_level(case, level)
        n_ok = 0
        residuals = []
        for loads in sample_loads(unc, sampling.n_samples, sampling.seed, case):
            ok, res = _verdict(base.with_loads(loads), sampling.epsilon, sampling.lp_backend)
            n_ok += ok
            if sampling.keep_residuals:
                residuals.append(res)
        results.append(LevelResult(level, sampling.n_samples, n_ok, residuals))
    return FeasibilityReport(case.name, sampling.seed, sampling.der_window, results)
