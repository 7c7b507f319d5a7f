from __future__ import annotations

from datetime import datetime
from pathlib import Path

import pytest
from hypothesis import settings

from pvdaq.cli.simulate import SCENARIOS, build_report, run_simulation, sim_layout
from pvdaq.clock import SimClock, to_seconds
from pvdaq.config import RunConfig
from pvdaq.hal import Hal
from pvdaq.hal.environment import ConstantEnvironment
from pvdaq.hal.faults import FaultScript
from pvdaq.hal.sim import Simulator

settings.register_profile("default", deadline=None)
settings.load_profile("default")

DAY = datetime(2025, 3, 10)
SITE_TZ = "America/Costa_Rica"


def at(hhmmss: str, day: datetime = DAY) -> float:
    """Local seconds for a time of day on the test date."""
    h, m, *s = (int(x) for x in hhmmss.split(":"))
    return to_seconds(day.replace(hour=h, minute=m, second=s[0] if s else 0))


def make_hal(t0: float | None = None, env=None, faults=None, *, record_calls=True,
             initialize=True, **sim_kwargs):
    clock = SimClock(at("12:00") if t0 is None else t0)
    backend = Simulator(clock, env or ConstantEnvironment(), faults, **sim_kwargs)
    hal = Hal(backend, clock, record_calls=record_calls)
    if initialize:
        hal.initialize()
    return clock, backend, hal


def script(*records, day=DAY.date()) -> FaultScript:
    return FaultScript.from_records(records, day)


def sim_config(out: Path, **changes) -> RunConfig:
    base = RunConfig(Path("data"), Path("state"), Path("logs"), timezone=SITE_TZ, **changes)
    return sim_layout(base, out)


def play(name_or_scenario, out: Path, *, seed=1, **kwargs):
    scenario = SCENARIOS[name_or_scenario] if isinstance(name_or_scenario, str) else name_or_scenario
    cfg = sim_config(out)
    run = run_simulation(cfg, scenario, seed=seed, **kwargs)
    return cfg, run, build_report(run)


@pytest.fixture(scope="session")
def scenario_outputs(tmp_path_factory):
    """Run each built-in scenario at most once per test session."""
    cache = {}

    def get(name):
        if name not in cache:
            out = tmp_path_factory.mktemp(name)
            cache[name] = play(name, out)
        return cache[name]

    return get
