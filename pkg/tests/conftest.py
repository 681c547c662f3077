import pytest

from tepgrid.compliance import scenario_sweep
from tepgrid.network import apply_scenario, load_network
from tepgrid.powerflow import solve


@pytest.fixture(scope="session")
def net():
    return load_network()


@pytest.fixture(scope="session")
def peak_case(net):
    return apply_scenario(net, "peak")


@pytest.fixture(scope="session")
def peak(peak_case):
    return solve(peak_case)


@pytest.fixture(scope="session")
def dominant(net):
    return solve(apply_scenario(net, "dominant"))


@pytest.fixture(scope="session")
def sweep(net):
    return scenario_sweep(net, ["peak", "dominant", "light"])


_CRITERIA = {}


@pytest.fixture(scope="session")
def criteria_log():
    return _CRITERIA


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        terminalreporter.write_line(_CRITERIA[n])
