import json
from pathlib import Path

import pytest

from smallgain.config import (
    ConfigError,
    build_plan,
    load_config,
    map_from_spec,
    parse_config,
    set_by_path,
)

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


def chemostat_doc():
    return json.loads((CONFIG_DIR / "chemostat_point_delay.json").read_text())


class TestParse:
    def test_canonical_configs_parse(self):
        for name in (
            "chemostat_point_delay",
            "chemostat_window_min",
            "chemostat_window_max",
            "ex31",
            "ex32",
        ):
            cfg = load_config(CONFIG_DIR / f"{name}.json")
            assert cfg.scenario in (
                "chemostat", "ex31_comparison", "ex32_sampled"
            )

    def test_round_trip_identity(self):
        cfg = parse_config(chemostat_doc())
        again = parse_config(json.loads(cfg.to_json()))
        assert again.doc == cfg.doc

    def test_unknown_scenario(self):
        with pytest.raises(ConfigError):
            parse_config({"scenario": "pendulum"})

    def test_all_violations_listed(self):
        doc = chemostat_doc()
        doc["params"]["S_s"] = 12.0  # above the feed concentration
        doc["checks"].append({"name": "bogus"})
        with pytest.raises(ConfigError) as exc:
            parse_config(doc)
        msgs = exc.value.errors
        assert any("S(t) in (0, S_i)" in m for m in msgs)
        assert any("bogus" in m for m in msgs)
        assert len(msgs) >= 2

    def test_uncertainty_range_enforced(self):
        doc = chemostat_doc()
        doc["disturbance"] = {"kind": "constant", "value": 1.5}
        with pytest.raises(ConfigError, match="inside \\[0, 1\\]"):
            parse_config(doc)

    def test_ex32_eps_limit(self):
        doc = json.loads((CONFIG_DIR / "ex32.json").read_text())
        doc["params"]["eps"] = 0.8
        with pytest.raises(ConfigError, match="1/sqrt"):
            parse_config(doc)


class TestResolution:
    def test_auto_step_and_period(self):
        cfg = parse_config(chemostat_doc())
        plan = build_plan(cfg)
        assert plan.h == pytest.approx(5.0 / 50.0)
        assert plan.functional.tau == 5.0
        assert plan.disturbance.period == pytest.approx(11.0)

    def test_auto_step_zero_delay(self):
        doc = chemostat_doc()
        doc["params"]["r"] = 0.0
        doc["delay_functional"] = {"kind": "window_min"}
        plan = build_plan(parse_config(doc))
        assert plan.h == pytest.approx(1e-2)

    def test_ex32_auto_constants(self):
        cfg = load_config(CONFIG_DIR / "ex32.json")
        plan = build_plan(cfg)
        assert plan.ex32_params.M == 60.0
        assert plan.ex32_params.r == 0.005
        assert plan.h == pytest.approx(0.0005)

    def test_history_profiles(self):
        doc = chemostat_doc()
        doc["initial"]["S_history"] = {"kind": "affine", "start": 1.0, "end": 9.0}
        plan = build_plan(parse_config(doc))
        assert plan.history(-5.0) == pytest.approx(1.0)
        assert plan.history(0.0) == pytest.approx(9.0)
        doc["initial"]["S_history"] = {
            "kind": "sinusoid", "center": 2.0, "amplitude": 1.0, "period": 5.0
        }
        plan = build_plan(parse_config(doc))
        assert plan.history(0.0) == pytest.approx(2.0)
        assert plan.history(-1.25) == pytest.approx(1.0)


class TestSetByPath:
    def test_nested_assignment(self):
        doc = chemostat_doc()
        set_by_path(doc, "params.r", 1.0)
        assert doc["params"]["r"] == 1.0

    def test_missing_path(self):
        with pytest.raises(KeyError):
            set_by_path(chemostat_doc(), "params.nope", 1.0)


class TestMapFromSpec:
    def test_two_by_two(self):
        gmap = map_from_spec({
            "entries": [
                [None, {"kind": "linear", "slope": 0.5}],
                [{"kind": "linear", "slope": 0.5}, None],
            ]
        })
        assert gmap.n == 2
        assert gmap.entry(0, 1)(2.0) == 1.0
        assert gmap.entry(0, 0)(2.0) == 0.0

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            map_from_spec({"entries": []})
