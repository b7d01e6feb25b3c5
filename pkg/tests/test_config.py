import json

import pytest

from owfccd.config import (CONFIG_DIR_ENV, Config, ConfigError, RunManifest, config_from_dict,
                           default_config_path, load_config, load_run_manifest)
from owfccd.core import CABLE_RATE_PER_MW_KM


def test_defaults():
    cfg = config_from_dict({})
    assert cfg.poi == "WCASCADE" and cfg.farm.rated_power_mw == 1500.0
    assert cfg.scengen.shape == (1, 20, 5, 1, 1, 1)
    assert cfg.freq.trip_mw == 2182.3


def test_poi_table_sets_rating_and_route():
    cfg = config_from_dict({"poi": "TESLA"})
    assert cfg.farm.rated_power_mw == 2640.0 and cfg.farm.poi_name == "TESLA"
    assert cfg.cable.distance_km == pytest.approx(603.598)
    assert cfg.econ.cable_unit_cost == pytest.approx(CABLE_RATE_PER_MW_KM * 603.598)


def test_explicit_fields_win():
    cfg = config_from_dict({"poi": "TESLA", "farm": {"rated_power_mw": 1000.0},
                            "econ": {"rate_per_mw_km": 100.0}})
    assert cfg.farm.rated_power_mw == 1000.0
    assert cfg.econ.cable_unit_cost == pytest.approx(100.0 * 603.598)


def test_sections_override_fields():
    cfg = config_from_dict({"solver": {"max_outer_iters": 5}, "scengen": {"shape": [1, 2, 2]},
                            "freqcheck": {"inertia_2h": 10.0, "trip_mw": 100.0}})
    assert cfg.solver.max_outer_iters == 5
    assert cfg.scengen.shape == (1, 2, 2)
    assert cfg.freq_grid.inertia_2h == 10.0 and cfg.freq.trip_mw == 100.0


@pytest.mark.parametrize("doc,match", [
    ({"colour": 1}, "unknown config keys"),
    ({"ess": {"size": 3}}, r"\[ess\]"),
    ({"schema": "owfccd.config/9"}, "schema"),
    ({"ess": {"eta_ch": 2.0}}, "eta"),
    ({"solver": {"penalty": -1}}, "penalty"),
    ({"scengen": {"pool_size": 0}}, "pool_size"),
])
def test_bad_config(doc, match):
    with pytest.raises(ConfigError, match=match):
        config_from_dict(doc)


def test_load_config_file(tmp_path):
    (tmp_path / "c.json").write_text(json.dumps({"year": 2021}))
    assert load_config(tmp_path / "c.json").year == 2021
    (tmp_path / "bad.json").write_text("{")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "bad.json")


def test_default_config_dir(tmp_path, monkeypatch):
    monkeypatch.delenv(CONFIG_DIR_ENV, raising=False)
    assert default_config_path() is None
    monkeypatch.setenv(CONFIG_DIR_ENV, str(tmp_path))
    assert default_config_path() is None
    (tmp_path / "config.json").write_text("{}")
    assert default_config_path() == str(tmp_path / "config.json")


def test_run_manifest(tmp_path):
    (tmp_path / "run.json").write_text(json.dumps({"config": "c.json", "cases": ["ccd"],
                                                   "seed": 3}))
    m = load_run_manifest(tmp_path / "run.json")
    assert m.config == str(tmp_path / "c.json") and m.cases == ("ccd",) and m.seed == 3
    assert m.output_dir == str(tmp_path / "out")
    with pytest.raises(ConfigError, match="not found"):
        m.check_paths()


def test_run_manifest_validation(tmp_path):
    with pytest.raises(ConfigError, match="unknown cases"):
        RunManifest(cases=("ccd", "cheap"))
    (tmp_path / "run.json").write_text(json.dumps({"outdir": "x"}))
    with pytest.raises(ConfigError, match="unknown run manifest keys"):
        load_run_manifest(tmp_path / "run.json")


def test_model_kwargs():
    kw = Config().model_kwargs()
    assert set(kw) == {"farm", "econ", "ess", "cable", "reserve"}
