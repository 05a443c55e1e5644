"""Shared fixtures and small builders used across the suite."""

# One line per acceptance criterion, printed after the run so the verdicts
# survive pytest's output capture.
CRITERION_RESULTS = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if CRITERION_RESULTS:
        terminalreporter.write_sep("-", "acceptance criteria")
        for line in CRITERION_RESULTS:
            terminalreporter.write_line(line)

import numpy as np
import pytest

from mmwv2v.config import DEG, config_from_dict
from mmwv2v.geometry import VTX, Vehicle


def make_vehicle(vid, x, y, role=VTX, lane=0, length=4.5, width=1.8,
                 speed=100.0):
    return Vehicle(id=vid, role=role, lane=lane, x=x, y=y, speed=speed,
                   length=length, width=width, kind="car")


def small_cfg(**sim_overrides):
    """A desk-scale configuration: short horizon, default physics."""
    sim = {"total_time": 200.0, "scheduling_slot": 50.0, "method": "waf",
           "seed": 1}
    sim.update(sim_overrides)
    return config_from_dict({"sim": sim})


def cfg_with(sections: dict, **sim_overrides):
    sim = {"total_time": 200.0, "scheduling_slot": 50.0, "method": "waf",
           "seed": 1}
    sim.update(sim_overrides)
    data = {"sim": sim}
    data.update(sections)
    return config_from_dict(data)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def cfg():
    return small_cfg()
