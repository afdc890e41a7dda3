"""Command-line entry point.

Exit codes: 0 success, 1 solver did not converge, 2 unreadable input,
3 invalid input, 4 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from .config import ConfigError, RunConfig, load_config, render_toml
from .feasibility_lab import SamplingPlan, run_study
from .net_model import CaseInvariantError, CaseParseError, CaseSchemaError, NetworkCase, bundled_case_path, \
    connected_components, load_case
from .robust_solver import RpopStatus, prepare_case, solve_rpop, worst_case
from .solution_io import SolutionFormatError, dumps, master_from_dict, plan_matches_case, read_solution, \
    solution_to_dict, to_dot

EXIT_OK, EXIT_NONCONVERGED, EXIT_PARSE, EXIT_INVALID, EXIT_INTERNAL = 0, 1, 2, 3, 4

log = logging.getLogger("robustmg")


class InvalidInput(Exception):
    pass


def _open_case(ref: str, cfg: RunConfig) -> NetworkCase:
    """A path, or the name of a bundled case."""
    path = Path(ref)
    if not path.exists() and path.suffix == "":
        try:
            path = bundled_case_path(ref)
        except FileNotFoundError:
            pass
    return load_case(path, alpha_base=cfg.alpha_base, alpha_per_load=cfg.alpha_per_load)


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
        log.info("wrote %s", out)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_validate(args, cfg: RunConfig) -> int:
    case = _open_case(args.case, cfg)
    n_blocks, n_sw = len(case.blocks), len(case.switches)
    print(f"{case.name}: valid, {len(case.buses)} buses, {n_blocks} blocks, {n_sw} switches, "
          f"{len(case.generators)} DERs, {len(case.loads)} loads ({len(case.uncertain_loads())} uncertain)")
    for b in case.blocks:
        print(f"  block {b.id}: buses {', '.join(sorted(b.buses))}; loads {len(b.loads)}; "
              f"DERs {', '.join(sorted(b.generators)) or '-'}")
    for sw in case.switches:
        a, c = case.switch_blocks(sw)
        state = "closed" if sw.normally_closed else "open"
        print(f"  switch {sw.id}: block {a} -- block {c} (normally {state})")
    base = connected_components(case, [sw.id for sw in case.switches if sw.normally_closed])
    print(f"  base configuration: {len(base)} connected component(s)")
    return EXIT_OK


def _solve_cfg(args, cfg: RunConfig) -> RunConfig:
    changes = {}
    if getattr(args, "level", None) is not None:
        changes["uncertainty_level"] = args.level
    if getattr(args, "fixed_topology", False):
        changes["fixed_topology"] = True
    if getattr(args, "open", None):
        changes["open_switches"] = tuple(args.open)
    return cfg.replace(**changes) if changes else cfg


def cmd_solve(args, cfg: RunConfig) -> int:
    cfg = _solve_cfg(args, cfg)
    case = _open_case(args.case, cfg)
    if args.config is None:
        log.info("no --config given; using defaults")
    dump = args.dump_models
    if dump:
        Path(dump).mkdir(parents=True, exist_ok=True)
    timing: list[str] = []
    t0 = time.perf_counter()
    sol = solve_rpop(case, cfg=cfg, log_fn=lambda e: timing.append(e.line()), dump_dir=dump)
    elapsed = time.perf_counter() - t0
    data = solution_to_dict(sol, cfg)
    _emit(dumps(data), args.out)
    if args.out:
        # wall-clock times stay out of the solution so reruns are byte-identical
        Path(args.out).with_suffix(".log").write_text("\n".join(timing + [f"total_seconds={elapsed:.3f}"]) + "\n")
    obj = data["objective"]
    print(f"{sol.status.value}: total {obj['total']:.6f} (generation {obj['generation_cost']:.6f}, "
          f"load shed {obj['load_shed_cost']:.6f}, worst recourse {obj['worst_case_recourse']:.6f}); "
          f"energized blocks {data['energized_blocks']}; {len(sol.logs)} iterations, {elapsed:.1f}s",
          file=sys.stderr)
    return EXIT_OK if sol.status is RpopStatus.CONVERGED else EXIT_NONCONVERGED


def _plan(args, cfg):
    case = _open_case(args.case, cfg)
    data = read_solution(args.solution)
    problems = plan_matches_case(data, case)
    if problems:
        raise InvalidInput("; ".join(problems))
    return case, data, master_from_dict(data)


def cmd_worstcase(args, cfg: RunConfig) -> int:
    cfg = _solve_cfg(args, cfg)
    case, data, ms = _plan(args, cfg)
    case, unc = prepare_case(case, cfg)
    counter = []
    wc = worst_case(case, ms, unc, cfg, on_solve=counter.append)
    out = {"case": case.name, "worst_scenario": wc.scenario.id, "label": wc.scenario.label(),
           "recourse_cost": wc.V2, "slack": wc.slack, "max_slack": wc.max_slack,
           "subproblem_solves": len(counter),
           "scenarios": [{"id": r.scenario.id, "label": r.scenario.label(), "recourse_cost": r.value,
                          "slack": r.slack} for r in wc.results]}
    _emit(json.dumps(out, indent=2, sort_keys=True) + "\n", args.out)
    log.info("worst-case search made %d subproblem solves", len(counter))
    return EXIT_OK


def cmd_sample(args, cfg: RunConfig) -> int:
    case, data, ms = _plan(args, cfg)
    levels = tuple(args.levels) if args.levels else (0.10, 0.15, 0.25)
    plan = SamplingPlan(n_samples=args.n_samples or cfg.n_samples, seed=cfg.seed, levels=levels,
                        der_window=args.der_window or cfg.der_window, epsilon=cfg.sample_epsilon,
                        lp_backend=cfg.lp_backend, facets=cfg.polygon_facets)
    report = run_study(case.with_weights(cfg.alpha_base, cfg.alpha_per_load), ms, plan)
    if args.out:
        pj, pc = report.write(args.out)
        log.info("wrote %s and %s", pj, pc)
    else:
        sys.stdout.write(report.to_json() + "\n")
    for lv, frac in report.fractions().items():
        print(f"level {lv:.2f}: feasible fraction {frac:.4f}", file=sys.stderr)
    return EXIT_OK


def cmd_export(args, cfg: RunConfig) -> int:
    data = read_solution(args.solution)
    if args.format == "dot":
        _emit(to_dot(data), args.out)
    else:
        _emit(dumps(data), args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _common(suppress: bool) -> argparse.ArgumentParser:
    # subcommands accept the same flags; their copies must not reset values given before the command
    d = {"default": argparse.SUPPRESS} if suppress else {}
    c = argparse.ArgumentParser(add_help=False)
    c.add_argument("--config", help="TOML file with run settings", **d)
    c.add_argument("--seed", type=int, help="random seed (overrides the config)", **d)
    c.add_argument("--verbose", "-v", action="count", help="more logging (repeatable)",
                   **(d or {"default": 0}))
    c.add_argument("--dump-models", metavar="DIR", help="write every master and recourse LP to DIR", **d)
    c.add_argument("--print-config", action="store_true", help="print the effective configuration and exit", **d)
    return c


def build_parser() -> argparse.ArgumentParser:
    top, common = _common(False), _common(True)

    p = argparse.ArgumentParser(prog="robustmg", parents=[top],
                                description="Robust microgrid formation and dispatch under load uncertainty.")
    sub = p.add_subparsers(dest="command")

    v = sub.add_parser("validate", parents=[common], help="check a case file and summarise its blocks")
    v.add_argument("case")

    s = sub.add_parser("solve", parents=[common], help="run the robust cutting-plane solver")
    s.add_argument("case")
    s.add_argument("--out", "-o", help="solution JSON path (default: stdout)")
    s.add_argument("--level", type=float, help="uncertainty level, e.g. 0.25 for +/-25%%")
    s.add_argument("--fixed-topology", action="store_true", help="keep every switch at its normal state")
    s.add_argument("--open", action="append", metavar="SWITCH", help="force a switch open (repeatable)")

    w = sub.add_parser("worstcase", parents=[common], help="worst load vertex for a stored plan")
    w.add_argument("case")
    w.add_argument("solution")
    w.add_argument("--level", type=float)
    w.add_argument("--out", "-o")

    m = sub.add_parser("sample", parents=[common], help="out-of-sample feasibility study of a stored plan")
    m.add_argument("case")
    m.add_argument("solution")
    m.add_argument("--levels", type=float, nargs="+")
    m.add_argument("--n-samples", type=int)
    m.add_argument("--der-window", type=float)
    m.add_argument("--out", "-o", help="output stem; writes STEM.json and STEM.csv")

    e = sub.add_parser("export", parents=[common], help="render a solution as DOT or canonical JSON")
    e.add_argument("solution")
    e.add_argument("--format", "-f", choices=("dot", "json"), default="dot")
    e.add_argument("--out", "-o")
    return p


COMMANDS = {"validate": cmd_validate, "solve": cmd_solve, "worstcase": cmd_worstcase, "sample": cmd_sample,
            "export": cmd_export}


def _configure_logging(verbosity: int) -> None:
    level = logging.WARNING if verbosity == 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr, force=True)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _configure_logging(args.verbose)
    try:
        cfg = load_config(args.config, {"seed": args.seed})
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    if args.print_config:
        sys.stdout.write(render_toml(cfg))
        return EXIT_OK
    if args.command is None:
        parser.print_help(sys.stderr)
        return EXIT_PARSE
    try:
        return COMMANDS[args.command](args, cfg)
    except (CaseParseError, CaseSchemaError, SolutionFormatError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (CaseInvariantError, InvalidInput, KeyError, ValueError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001
        log.debug("internal error", exc_info=True)
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
