import pytest
import tomli

from robustmg.config import ConfigError, RunConfig, config_from_mapping, load_config, render_toml


def test_defaults():
    cfg = RunConfig()
    assert cfg.epsilon == 1e-4 and cfg.omega == 705.0 and cfg.k_der == 1 and cfg.polygon_facets == 8


def test_flat_and_table_forms(tmp_path):
    flat = tmp_path / "flat.toml"
    flat.write_text("epsilon = 1e-5\nuncertainty_levels = [0.0, 0.2]\n")
    table = tmp_path / "table.toml"
    table.write_text("[run]\nepsilon = 1e-5\nuncertainty_levels = [0.0, 0.2]\n")
    a, b = load_config(flat), load_config(table)
    assert a == b and a.epsilon == 1e-5 and a.uncertainty_levels == (0.0, 0.2)


def test_overrides_win_and_none_is_ignored(tmp_path):
    p = tmp_path / "c.toml"
    p.write_text("seed = 3\n")
    cfg = load_config(p, {"seed": 9, "omega": None})
    assert cfg.seed == 9 and cfg.omega == 705.0


def test_unknown_key():
    with pytest.raises(ConfigError, match="bogus"):
        config_from_mapping({"bogus": 1})


@pytest.mark.parametrize("bad", [{"epsilon": 0}, {"k_der": 0}, {"polygon_facets": 3}, {"omega_growth": 1.0},
                                 {"lp_backend": "cplex"}, {"uncertainty_level": 1.2}, {"der_window": 2}])
def test_validation(bad):
    with pytest.raises(ConfigError):
        config_from_mapping(bad)


def test_bad_toml(tmp_path):
    p = tmp_path / "x.toml"
    p.write_text("epsilon = = 1")
    with pytest.raises(ConfigError, match="TOML"):
        load_config(p)
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.toml")


def test_render_round_trip(tmp_path):
    cfg = RunConfig(uncertainty_level=0.1, open_switches=("S1", "S2"), lp_backend="highs")
    text = render_toml(cfg)
    assert tomli.loads(text)["run"]["open_switches"] == ["S1", "S2"]
    p = tmp_path / "r.toml"
    p.write_text(text)
    assert load_config(p) == cfg


def test_unset_level_survives_round_trip(tmp_path):
    p = tmp_path / "r.toml"
    p.write_text(render_toml(RunConfig()))
    assert load_config(p).uncertainty_level is None
