import numpy as np
import pytest
import yaml

from vczsynth.errors import ScenarioError
from vczsynth.scenario import (
    build_scenario,
    dump_scenario,
    load_scenario,
    normalized,
    parse_scenario_text,
)


def doc_text(scenario_dir, name="pendulum.yaml", **edits):
    raw = yaml.safe_load((scenario_dir / name).read_text())
    for path, value in edits.items():
        node = raw
        keys = path.split("__")
        for k in keys[:-1]:
            node = node[k]
        if value is None:
            node.pop(keys[-1])
        else:
            node[keys[-1]] = value
    return yaml.safe_dump(raw)


@pytest.mark.parametrize("name", ["pendulum.yaml", "scara.yaml", "agents.yaml"])
def test_shipped_scenarios_load_and_pass(scenario_dir, name):
    scn = load_scenario(scenario_dir / name)
    assert scn.feasibility().passed


def test_unknown_key_rejected(scenario_dir):
    with pytest.raises(ScenarioError, match="colour"):
        parse_scenario_text(doc_text(scenario_dir, plant__colour="red"))


def test_missing_key_and_bad_schema(scenario_dir):
    with pytest.raises(ScenarioError):
        parse_scenario_text(doc_text(scenario_dir, bounds__tau_bar=None))
    with pytest.raises(ScenarioError):
        parse_scenario_text(doc_text(scenario_dir, schema=2))
    with pytest.raises(ScenarioError):
        parse_scenario_text("- just\n- a list\n")
    with pytest.raises(ScenarioError):
        parse_scenario_text("a: [unclosed\n")


def test_bad_values(scenario_dir):
    with pytest.raises(ScenarioError):
        build_scenario(parse_scenario_text(doc_text(scenario_dir, funnel__q_v=0.5)))
    with pytest.raises(ScenarioError):
        build_scenario(parse_scenario_text(doc_text(scenario_dir, plant__params={"mass": 1.0})))
    with pytest.raises(ScenarioError):
        load_scenario(scenario_dir / "missing.yaml")


def test_roundtrip(scenario_dir):
    doc = parse_scenario_text((scenario_dir / "scara.yaml").read_text())
    again = parse_scenario_text(dump_scenario(doc))
    assert normalized(again) == normalized(doc)


def test_auto_lambda(scenario_dir):
    scn = build_scenario(parse_scenario_text(doc_text(scenario_dir, vcz__lam="auto:most-efficient")))
    assert scn.vcz_mode == "auto:most-efficient"
    assert np.allclose(scn.vcz.u_bar, scn.bounds.v_bar)
    assert scn.feasibility().torque_slack[0] == pytest.approx(0.0, abs=1e-12)
    scn = build_scenario(parse_scenario_text(doc_text(scenario_dir, vcz__lam="auto:least-conservative",
                                                      vcz__u_bar=0.05)))
    assert scn.feasibility().passed and scn.vcz.lam < 0.018


def test_overrides(scenario_dir):
    scn = load_scenario(scenario_dir / "pendulum.yaml", seed_override=9, dt=0.001)
    assert scn.sim.seed == 9 and scn.dt == 0.001


def test_infeasible_scenario_loads_with_warning(scenario_dir, caplog):
    doc = parse_scenario_text(doc_text(scenario_dir, bounds__tau_bar=1.5))
    scn = build_scenario(doc)
    assert not scn.feasibility().passed
    assert "confinement inequalities" in caplog.text
