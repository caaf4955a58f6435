import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from minigrid import presets  # noqa: E402
from minigrid.netmodel import CableSpec, Edge, NetworkModel, default_catalog, star_network  # noqa: E402
from minigrid.scenario import DesignScenario, Economics  # noqa: E402

SCENARIO_DIR = Path(__file__).resolve().parents[1] / "scenarios"


@pytest.fixture(scope="session")
def catalog():
    return default_catalog()


def toy_cable(y_pu: float = 10.0, v_base: float = 400.0, s_base: float = 100.0) -> CableSpec:
    """Purely resistive cable whose 1 km series admittance is ``y_pu`` per unit."""
    z_base = v_base ** 2 / (s_base * 1000.0)
    return CableSpec(1.0, complex(y_pu / z_base, 0.0), 0.0)


def toy_line(y_pu: float = 10.0) -> NetworkModel:
    return NetworkModel(2, (Edge(0, 1, toy_cable(y_pu), 1.0),))


def small_scenario(cable_mm2=95, distance_km=0.1, hours=24, leaves=2, load_scale=1.0,
                   **kwargs) -> DesignScenario:
    """Case-study shape on a one-day horizon, for fast solves."""
    net = star_network(leaves, default_catalog()[cable_mm2], distance_km)
    loads = np.vstack([load_scale * presets.village_load(hours)] * net.node_count)
    tech = presets.default_tech(hours)
    return DesignScenario(net, loads, tech, Economics(), name="small", **kwargs)


@pytest.fixture
def small():
    return small_scenario()


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    if acceptance is None or not acceptance.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(acceptance.RESULTS):
        terminalreporter.write_line(acceptance.RESULTS[n])
