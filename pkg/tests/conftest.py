import pytest

from hardrods.measures import VelocityLengthMeasure, macro_params

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def bench_mu():
    """rho = 1, velocities +-1 with equal weight, unit rods."""
    return VelocityLengthMeasure.from_dict([
        {"weight": 0.5, "velocity": {"atom": 1.0}, "length": {"atom": 1.0}},
        {"weight": 0.5, "velocity": {"atom": -1.0}, "length": {"atom": 1.0}},
    ])


@pytest.fixture(scope="session")
def bench(bench_mu):
    return macro_params(1.0, bench_mu)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
