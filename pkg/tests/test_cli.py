import json
import subprocess
import sys

import pytest

from robustmg.cli import EXIT_INVALID, EXIT_OK, EXIT_PARSE, main
from robustmg.net_model import bundled_case_path, load_bundled
from robustmg.solution_io import (SCHEMA, SolutionFormatError, check_solution, dumps, master_from_dict,
                                  plan_matches_case, read_solution, solution_to_dict, to_dot)


@pytest.fixture(scope="module")
def tiny_solution(tmp_path_factory):
    out = tmp_path_factory.mktemp("sol") / "tiny3.json"
    assert main(["solve", "tiny3", "--level", "0.1", "--out", str(out)]) == EXIT_OK
    return out


def test_validate_ieee37(capsys):
    assert main(["validate", str(bundled_case_path("ieee37_like"))]) == EXIT_OK
    first = capsys.readouterr().out.splitlines()[0]
    assert "7 blocks, 10 switches" in first


def test_validate_accepts_bundled_name(capsys):
    assert main(["validate", "fig1"]) == EXIT_OK
    assert "3 blocks" in capsys.readouterr().out


def test_malformed_case_exits_2(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text("{")
    assert main(["validate", str(p)]) == EXIT_PARSE
    assert "error" in capsys.readouterr().err


def test_invariant_violation_exits_3(tmp_path, capsys):
    data = json.loads(bundled_case_path("tiny3").read_text())
    data["lines"][0]["to_bus"] = "nowhere"
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(data))
    assert main(["validate", str(p)]) == EXIT_INVALID
    assert "nowhere" in capsys.readouterr().err


def test_bad_config_exits_2(tmp_path):
    p = tmp_path / "c.toml"
    p.write_text("nonsense_key = 1\n")
    assert main(["--config", str(p), "validate", "tiny3"]) == EXIT_PARSE


def test_print_config(capsys):
    assert main(["--print-config", "validate", "tiny3"]) == EXIT_OK
    assert capsys.readouterr().out.startswith("[run]\n")


def test_solve_writes_schema_and_log(tiny_solution):
    data = read_solution(tiny_solution)
    assert data["schema"] == SCHEMA and data["status"] == "Converged"
    assert data["certificate"]["passed"]
    assert "total_seconds=" in tiny_solution.with_suffix(".log").read_text()


def test_solve_is_byte_identical(tmp_path, tiny_solution):
    again = tmp_path / "again.json"
    assert main(["solve", "tiny3", "--level", "0.1", "--out", str(again)]) == EXIT_OK
    assert again.read_bytes() == tiny_solution.read_bytes()


def test_unknown_open_switch_exits_3(tmp_path):
    assert main(["solve", "tiny3", "--open", "nope", "--out", str(tmp_path / "x.json")]) == EXIT_INVALID


def test_export_dot(tiny_solution, capsys):
    assert main(["export", str(tiny_solution)]) == EXIT_OK
    dot = capsys.readouterr().out
    assert dot.startswith("graph")
    assert sum(1 for line in dot.splitlines() if line.strip().startswith("B") and "--" not in line) == 3


def test_export_json_round_trip(tiny_solution, capsys):
    assert main(["export", str(tiny_solution), "--format", "json"]) == EXIT_OK
    assert capsys.readouterr().out == tiny_solution.read_text()


def test_worstcase_and_mismatch(tiny_solution, tmp_path, capsys):
    out = tmp_path / "wc.json"
    assert main(["worstcase", "tiny3", str(tiny_solution), "--level", "0.1", "--out", str(out)]) == EXIT_OK
    wc = json.loads(out.read_text())
    assert wc["subproblem_solves"] == len(wc["scenarios"])
    assert main(["worstcase", "fig1", str(tiny_solution)]) == EXIT_INVALID


def test_sample_writes_json_and_csv(tiny_solution, tmp_path):
    stem = tmp_path / "study"
    assert main(["sample", "tiny3", str(tiny_solution), "--levels", "0.1", "--n-samples", "20",
                 "--out", str(stem)]) == EXIT_OK
    assert stem.with_suffix(".json").exists() and stem.with_suffix(".csv").exists()


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "robustmg", "validate", "tiny3"], capture_output=True, text=True)
    assert r.returncode == 0 and "valid" in r.stdout


def test_no_command_exits_2():
    assert main([]) == EXIT_PARSE


# -- solution_io ----------------------------------------------------------------------------

def test_all_dead_plan_renders_unenergised(solved):
    sol, cfg = solved("tiny3", uncertainty_level=0.0)
    data = solution_to_dict(sol, cfg)
    for blk in data["blocks"]:
        blk["energized"] = False
    for g in data["generators"]:
        g["grid_forming"] = False
    dot = to_dot(data)
    assert dot.count('energized="false"') == len(data["blocks"]) == 3
    assert "palegreen" not in dot and "GF:" not in dot


def test_dict_round_trip_to_master(solved):
    sol, cfg = solved("fig1", uncertainty_level=0.1)
    data = json.loads(dumps(solution_to_dict(sol, cfg)))
    ms = master_from_dict(data)
    assert ms.z_sw == sol.master.z_sw and ms.z_bl == sol.master.z_bl and ms.z_inv == sol.master.z_inv
    for k, v in sol.master.pg.items():
        assert ms.pg[k] == pytest.approx(v, abs=1e-12)
    assert plan_matches_case(data, sol.case) == []
    assert plan_matches_case(data, load_bundled("tiny3"))


def test_check_solution_rejects_bad_documents():
    with pytest.raises(SolutionFormatError):
        check_solution([])
    with pytest.raises(SolutionFormatError):
        check_solution({"schema": SCHEMA})
    good = {k: None for k in ("case", "status", "objective", "blocks", "switches", "generators")}
    with pytest.raises(SolutionFormatError):
        check_solution({**good, "schema": "other/1"})
