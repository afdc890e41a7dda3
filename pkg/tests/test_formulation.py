import itertools
import math
import random

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from casegen import small_case
from oracles import ConfigurationRows, admissible, all_configurations, forest, radiality_feasible
from robustmg.config import RunConfig
from robustmg.formulation import (MASTER, CutRecord, ExtremeScenario, ModelBuilder,
                                  build_master, build_power_flow, build_subproblem, extract_cut,
                                  lindist_matrices, polygon_directions, solve_master)
from robustmg.formulation.master import MasterOptions, nominal_loads
from robustmg.formulation.power_flow import polygon_rhs_factor
from robustmg.formulation.topology import add_configuration_vars, block_cycles
from robustmg.lp_engine import solve_lp
from robustmg.net_model import load_bundled, parse_case
from robustmg.robust_solver import enumerate_extremes, prepare_case, solve_scenario


def row_by_tag(lp, prefix):
    hits = [i for i, t in enumerate(lp.row_tags) if t.startswith(prefix)]
    assert hits, prefix
    return hits


def row_coeffs(mb, i):
    A = mb.lp.matrix().tocsr()
    return {mb.index.key_of(int(j)): float(a) for j, a in zip(A.indices[A.indptr[i]:A.indptr[i + 1]],
                                                             A.data[A.indptr[i]:A.indptr[i + 1]])}


def two_bus(connection=None, tap=2.0):
    buses = [{"id": "i", "phases": ["a"], "v_min": 0.5, "v_max": 2.5},
             {"id": "j", "phases": ["a"], "v_min": 0.5, "v_max": 2.5}]
    data = {"name": "two", "bases": {}, "buses": buses, "lines": [], "switches": [], "transformers": [],
            "loads": [{"id": "D", "bus": "i", "phases": ["a"], "s_nominal": {"a": [0.5, 0.0]}}],
            "generators": [{"id": "G", "bus": "j", "phases": ["a"], "s_min": {"a": [0, -1]},
                            "s_max": {"a": [0.3, 1]}, "c1": 1.0, "c0": 0.0}]}
    if connection:
        data["transformers"] = [{"id": "T", "from_bus": "i", "to_bus": "j", "phases": ["a"],
                                 "connection": connection, "tap_ratio": tap, "s_max": 1.0}]
    else:
        data["lines"] = [{"id": "L", "from_bus": "i", "to_bus": "j", "phases": ["a"], "r": [[0.01]],
                          "x": [[0.02]], "s_max": 1.0}]
    return parse_case(data)


# -- power flow -------------------------------------------------------------------

def test_voltage_drop_single_phase_example():
    case = two_bus()
    mb = ModelBuilder("m", MASTER)
    add_configuration_vars(mb, case)
    for g in case.generators:
        mb.var(("pg", g.id, "a"), -10, 10)
        mb.var(("qg", g.id, "a"), -10, 10)
    build_power_flow(mb, case, nominal_loads(case))
    coeffs = row_coeffs(mb, row_by_tag(mb.lp, "voltdrop[line=L")[0])
    # solve the row for w_i with w_j = 1, p = -0.1, q = -0.05
    rest = coeffs[("w", "j", "a")] * 1.0 + coeffs[("p_line", "L", "a")] * -0.1 + coeffs[("q_line", "L", "a")] * -0.05
    w_i = -rest / coeffs[("w", "i", "a")]
    assert w_i == pytest.approx(0.996)


def test_wye_transformer_scales_squared_voltage():
    case = two_bus("WYE", tap=2.0)
    mb = ModelBuilder("m", MASTER)
    add_configuration_vars(mb, case)
    mb.var(("pg", "G", "a"), -10, 10)
    mb.var(("qg", "G", "a"), -10, 10)
    build_power_flow(mb, case, nominal_loads(case))
    coeffs = row_coeffs(mb, row_by_tag(mb.lp, "wyev")[0])
    assert -coeffs[("w", "j", "a")] / coeffs[("w", "i", "a")] == pytest.approx(4.0)


def test_lindist_matrix_diagonals_and_symmetry_pattern():
    r = np.full((3, 3), 0.1) + np.eye(3) * 0.2
    x = np.full((3, 3), 0.2) + np.eye(3) * 0.3
    mp, mq = lindist_matrices(("a", "b", "c"), r, x)
    np.testing.assert_allclose(np.diag(mp), -2 * np.diag(r))
    np.testing.assert_allclose(np.diag(mq), -2 * np.diag(x))
    s3 = math.sqrt(3)
    assert mp[0, 1] == pytest.approx(r[0, 1] - s3 * x[0, 1])
    assert mp[1, 0] == pytest.approx(r[1, 0] + s3 * x[1, 0])
    assert mq[0, 1] == pytest.approx(x[0, 1] + s3 * r[0, 1])
    # restricting phases drops rows and columns
    mp2, _ = lindist_matrices(("a", "c"), r[np.ix_([0, 2], [0, 2])], x[np.ix_([0, 2], [0, 2])])
    assert mp2.shape == (2, 2) and mp2[1, 0] == pytest.approx(mp[2, 0])


@given(st.integers(4, 24), st.floats(0, 2 * math.pi), st.floats(0, 1.2))
def test_polygon_is_inner_and_tight(K, angle, radius):
    p, q = radius * math.cos(angle), radius * math.sin(angle)
    admitted = all(c * p + s * q <= polygon_rhs_factor(K) + 1e-12 for c, s in polygon_directions(K))
    if admitted:
        assert math.hypot(p, q) <= 1.0 + 1e-9
    if math.hypot(p, q) <= math.cos(math.pi / K):
        assert admitted


def test_polygon_needs_four_facets():
    with pytest.raises(ValueError):
        polygon_directions(3)


def test_zero_flow_gives_flat_voltage():
    case = load_bundled("tiny3")
    x = {("z_bl", b.id): 1.0 for b in case.blocks}
    x.update({("z_sw", s.id): 1.0 for s in case.switches})
    sub = build_subproblem(case, x, loads={d.id: {ph: 0j for ph in d.phases} for d in case.loads})
    sol = solve_lp(sub.lp)
    mb = sub.builder
    flows = [sol.primal[mb[k]] for k in mb.index.keys() if k[0].startswith(("p_", "q_"))]
    assert sub.total_slack(sol) == pytest.approx(0.0, abs=1e-9)
    if max(abs(f) for f in flows) < 1e-9:
        ws = [sol.primal[mb[("w", b.id, "a")]] for b in case.buses]
        assert max(ws) - min(ws) < 1e-9


# -- gating and the recourse model ----------------------------------------------------

def tiny3_plan(z_bl=(1, 1, 1), z_sw=(0, 0), pg=None, qg=None):
    case = load_bundled("tiny3")
    x = {("z_bl", b): float(v) for b, v in enumerate(z_bl)}
    x.update({("z_sw", s.id): float(v) for s, v in zip(case.switches, z_sw)})
    x.update({("z_inv", g.id): 1.0 for g in case.generators})
    for g in case.generators:
        x[("pg", g.id, "a")] = (pg or {}).get(g.id, 0.0)
        x[("qg", g.id, "a")] = (qg or {}).get(g.id, 0.0)
    return case, x


def test_de_energised_block_is_dead():
    case, x = tiny3_plan(z_bl=(1, 0, 1), pg={"G1": 0.3, "G5": 0.32})
    sub = build_subproblem(case, x)
    sol = solve_lp(sub.lp)
    mb = sub.builder
    for bus in ("3", "4"):
        assert sol.primal[mb[("w", bus, "a")]] == pytest.approx(0.0, abs=1e-12)
    for key in mb.index.keys():
        if key[0] in ("p_sw", "q_sw"):
            assert sol.primal[mb[key]] == pytest.approx(0.0, abs=1e-12)


def test_dead_block_generator_cannot_adjust():
    case, x = tiny3_plan(z_bl=(1, 1, 0), pg={"G1": 0.55})
    sub = build_subproblem(case, x)
    sol = solve_lp(sub.lp)
    adj = sub.adjustments(sol)
    assert all(v == pytest.approx(0.0, abs=1e-12) for kind in adj.values() for (g, _), v in kind.items() if g == "G5")


def test_deficit_becomes_slack():
    case = two_bus()
    x = {("z_bl", 0): 1.0, ("z_inv", "G"): 1.0, ("pg", "G", "a"): 0.3, ("qg", "G", "a"): 0.0}
    sub = build_subproblem(case, x)
    sol = solve_lp(sub.lp)
    # generator already at capacity: the whole 0.2 shortfall is slack
    assert sub.total_slack(sol) == pytest.approx(0.2, abs=1e-9)
    assert sol.objective_value == pytest.approx(705.0 * 0.2, rel=1e-9)


def test_headroom_means_no_slack():
    case, x = tiny3_plan(z_bl=(1, 1, 1), z_sw=(1, 1), pg={"G1": 0.55, "G5": 0.37}, qg={"G1": 0.2, "G5": 0.1})
    sub = build_subproblem(case, x)
    sol = solve_lp(sub.lp)
    assert sub.total_slack(sol) == pytest.approx(0.0, abs=1e-9)


def test_with_loads_matches_a_fresh_build():
    case, x = tiny3_plan(z_bl=(1, 1, 1), z_sw=(1, 1), pg={"G1": 0.5, "G5": 0.3})
    template = build_subproblem(case, x)
    rng = np.random.default_rng(0)
    for _ in range(5):
        loads = {d.id: {ph: complex(rng.uniform(0, 0.5), rng.uniform(0, 0.2)) for ph in d.phases}
                 for d in case.loads}
        a = template.with_loads(loads)
        b = build_subproblem(case, x, loads=loads)
        np.testing.assert_allclose(a.lp.rhs, b.lp.rhs)
        assert a.builder.couplings == b.builder.couplings
        assert solve_lp(a.lp).objective_value == pytest.approx(solve_lp(b.lp).objective_value)


# -- radiality --------------------------------------------------------------------------

def test_tree_allows_everything():
    case = small_case(random.Random(1), 3, 2, 1)
    _, feas = radiality_feasible(case)
    assert all(feas.values())


def test_parallel_pair_cuts_only_both_closed():
    case = small_case(random.Random(2), 2, 2, 1)
    ids, feas = radiality_feasible(case)
    assert feas == {(0, 0): True, (0, 1): True, (1, 0): True, (1, 1): False}


def test_triangle_excludes_only_all_closed():
    for seed in range(50):
        case = small_case(random.Random(seed), 3, 3, 1)
        pairs = {frozenset(case.switch_blocks(s)) for s in case.switches}
        if len(pairs) == 3:
            break
    _, feas = radiality_feasible(case)
    assert sum(feas.values()) == 7 and not feas[(1, 1, 1)]


@pytest.mark.parametrize("name", ["tiny3", "fig1", "ieee37_like"])
def test_radiality_matches_forest_on_bundled_cases(name):
    case = load_bundled(name)
    ids, feas = radiality_feasible(case)
    for bits, ok in feas.items():
        assert ok == forest(case, dict(zip(ids, bits)))


def test_block_cycles_of_ieee37_like():
    case = load_bundled("ieee37_like")
    cycles = block_cycles(case)
    assert cycles and all(len(c) >= 2 for c in cycles)


# -- colouring ----------------------------------------------------------------------------

def test_isolated_block_with_two_ders_needs_exactly_one_gf():
    rng = random.Random(4)
    case = small_case(rng, 1, 0, 2)
    rows = ConfigurationRows(case, k_der=1)
    got = {bits: rows.feasible({}, {0: 1}, dict(zip(("G0", "G1"), bits))) for bits in itertools.product((0, 1), repeat=2)}
    assert got == {(0, 0): False, (0, 1): True, (1, 0): True, (1, 1): False}


def test_closed_switch_carries_the_colour_of_the_gf_block():
    data_case = None
    for seed in range(100):
        c = small_case(random.Random(seed), 2, 1, 1)
        if c.block_of_bus[c.generators[0].bus] == 0:
            data_case = c
            break
    rows = ConfigurationRows(data_case)
    cfg = ({"S0": 1}, {0: 1, 1: 1}, {"G0": 1})
    assert rows.feasible(*cfg)
    assert not rows.feasible(*cfg, extra={("y", "S0", 0): 0})
    assert rows.feasible(*cfg, extra={("y", "S0", 0): 1})


def test_all_dead_is_feasible_with_zero_auxiliaries():
    case = load_bundled("fig1")
    rows = ConfigurationRows(case)
    zeros = {("y", s.id, b.id): 0 for s in case.switches for b in case.blocks}
    assert rows.feasible({s.id: 0 for s in case.switches}, {b.id: 0 for b in case.blocks},
                         {g.id: 0 for g in case.generators}, extra=zeros)


@given(st.integers(0, 2**31), st.integers(1, 3), st.integers(0, 3), st.integers(1, 3))
def test_coloring_matches_declarative_rule(seed, nb, ns, nd):
    case = small_case(random.Random(seed), nb, max(ns, nb - 1), nd)
    rows = ConfigurationRows(case)
    for config in all_configurations(case):
        assert rows.feasible(*config) == admissible(case, *config)


def test_coloring_with_two_gf_allowed_is_looser_than_the_rule():
    # with k_der = 2 the rows bound grid-forming blocks per island, not DERs
    case = None
    for seed in range(200):
        c = small_case(random.Random(seed), 2, 1, 3)
        blocks = [c.block_of_bus[g.bus] for g in c.generators]
        if sorted(blocks).count(1) == 2 and blocks.count(0) == 1:
            case = c
            break
    assert case is not None
    rows = ConfigurationRows(case, k_der=2)
    cfg = ({"S0": 1}, {0: 1, 1: 1}, {g.id: 1 for g in case.generators})
    assert rows.feasible(*cfg) and not admissible(case, *cfg, k_der=2)
    for config in all_configurations(case):
        if admissible(case, *config, k_der=2):
            assert rows.feasible(*config)


# -- master ---------------------------------------------------------------------------------

def test_master_energises_self_sufficient_block():
    case = two_bus()
    case = case.with_loads([type(case.loads[0])(**{**case.loads[0].__dict__,
                                                   "s_nominal": {"a": 0.2 + 0j}, "s_lower": {"a": 0.2 + 0j},
                                                   "s_upper": {"a": 0.2 + 0j}})])
    ms = solve_master(build_master(case, [CutRecord.trivial()]))
    assert ms.z_bl == {0: 1} and ms.theta == 0.0 and ms.z_inv == {"G": 1}


def test_constant_cut_lifts_theta():
    case = load_bundled("tiny3")
    base = solve_master(build_master(case, [CutRecord.trivial()]))
    cut = CutRecord(5.0, {}, {}, {}, 0)
    ms = solve_master(build_master(case, [cut]))
    assert ms.theta == pytest.approx(5.0)
    assert ms.objective == pytest.approx(base.objective + 5.0)


def test_large_alpha_energises_everything_possible():
    case = load_bundled("tiny3").with_weights(1000.0, 0.0)
    ms = solve_master(build_master(case, [CutRecord.trivial()]))
    assert ms.energized_blocks == [0, 1, 2]


def test_fixed_switches_are_respected():
    case = load_bundled("tiny3")
    opts = MasterOptions(fixed_switches={"S23": 0, "S45": 0})
    ms = solve_master(build_master(case, [CutRecord.trivial()], opts))
    assert ms.closed_switches == []


def test_master_without_power_flow_is_smaller():
    case = load_bundled("tiny3")
    a = build_master(case, options=MasterOptions(master_nominal_pf=False)).builder.lp
    b = build_master(case).builder.lp
    assert a.num_rows < b.num_rows


# -- cuts --------------------------------------------------------------------------------------

def test_cut_is_exact_at_its_own_point():
    case, x = tiny3_plan(z_bl=(1, 1, 1), z_sw=(1, 1), pg={"G1": 0.2, "G5": 0.1})
    sub = build_subproblem(case, x)
    sol = solve_lp(sub.lp)
    cut = extract_cut(sub, sol, x)
    assert cut.evaluate(x) == pytest.approx(sol.objective_value, abs=1e-9)
    assert all(cut.row_tags[i] for i in cut.pi)


def test_cut_from_a_slack_free_point_bounds_a_short_point():
    case, x = tiny3_plan(z_bl=(1, 1, 1), z_sw=(1, 1), pg={"G1": 0.55, "G5": 0.37}, qg={"G1": 0.2, "G5": 0.1})
    sub = build_subproblem(case, x)
    sol = solve_lp(sub.lp)
    assert sol.objective_value == pytest.approx(0.0, abs=1e-9)
    cut = extract_cut(sub, sol, x)
    short = {**x, ("pg", "G1", "a"): 0.1}
    truth = solve_lp(build_subproblem(case, short).lp).objective_value
    assert 0.0 < cut.evaluate(short) <= truth + 1e-9


def test_cut_rejects_non_optimal():
    case, x = tiny3_plan()
    sub = build_subproblem(case, x)
    sol = solve_lp(sub.lp)
    sol.status = type(sol.status)("Infeasible")
    with pytest.raises(ValueError):
        extract_cut(sub, sol, x)


@given(st.integers(0, 2**31), st.integers(0, 3))
def test_cut_under_estimates_on_tiny3(seed, sc_index):
    cfg = RunConfig(uncertainty_level=0.25)
    case, unc = prepare_case(load_bundled("tiny3"), cfg)
    rng = np.random.default_rng(seed)
    z = {("z_bl", b.id): 1.0 for b in case.blocks}
    scs = enumerate_extremes(unc, {b.id: 1 for b in case.blocks})
    sc = scs[sc_index % len(scs)]

    def point():
        x = dict(z)
        x.update({("z_sw", "S23"): 1.0, ("z_sw", "S45"): 0.0, ("z_inv", "G1"): 1.0, ("z_inv", "G5"): 1.0})
        for g in case.generators:
            x[("pg", g.id, "a")] = rng.uniform(g.s_min["a"].real, g.s_max["a"].real)
            x[("qg", g.id, "a")] = rng.uniform(g.s_min["a"].imag, g.s_max["a"].imag)
        return x

    x1, x2 = point(), point()
    r1 = solve_scenario(case, x1, sc, cfg)
    cut = extract_cut(r1.model, r1.solution, x1)
    r2 = solve_scenario(case, x2, sc, cfg)
    assert cut.evaluate(x2) <= r2.value + 1e-7


def test_scenario_loads_follow_zeta():
    case = load_bundled("tiny3")
    d = case.load_map["D4"]
    up = ExtremeScenario(0, {"D4": 1}, {"D4": 0}).load_value(d, "a")
    dn = ExtremeScenario(1, {"D4": 0}, {"D4": 1}).load_value(d, "a")
    assert up == d.s_upper["a"] and dn == d.s_lower["a"]
    assert ExtremeScenario(2).load_value(d, "a") == d.s_nominal["a"]
