import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

from cryospdc.config import load_run_config  # noqa: E402

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def run_config():
    return load_run_config()


@pytest.fixture(scope="session")
def crystal(run_config):
    return run_config.crystal


@pytest.fixture(scope="session")
def pump(run_config):
    return run_config.pump


@pytest.fixture(scope="session")
def solver(run_config):
    return run_config.solver


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    lines = getattr(acceptance, "RESULTS", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
