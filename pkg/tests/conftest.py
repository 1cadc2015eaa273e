import os
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

ROOT = Path(__file__).resolve().parents[1]
SCENARIOS = ROOT / "scenarios"

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def scenario_dir():
    return SCENARIOS


@pytest.fixture(scope="session")
def pendulum():
    from vczsynth.scenario import load_scenario

    return load_scenario(SCENARIOS / "pendulum.yaml")


@pytest.fixture(scope="session")
def pendulum_synth(pendulum):
    from vczsynth.sim import synthesize

    return synthesize(pendulum)


@pytest.fixture(scope="session")
def scara():
    from vczsynth.scenario import load_scenario

    return load_scenario(SCENARIOS / "scara.yaml")


@pytest.fixture(scope="session")
def agents():
    from vczsynth.scenario import load_scenario

    return load_scenario(SCENARIOS / "agents.yaml")


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[k])
