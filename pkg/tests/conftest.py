import json
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from cellplan.cli import bundled_instances

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def load_bundled(name: str) -> dict:
    return json.loads(Path(bundled_instances()[name]).read_text(encoding="utf-8"))


@pytest.fixture
def bundled_data():
    return load_bundled


ACCEPTANCE_LINES = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE_LINES] = []


@pytest.fixture
def acceptance_log(request) -> list:
    return request.config.stash[ACCEPTANCE_LINES]


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
