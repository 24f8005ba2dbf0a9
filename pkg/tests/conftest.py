import pytest

from pedxing.config import load_config

# filled by the criterion() helper in test_acceptance.py
checklist_lines = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if checklist_lines:
        terminalreporter.section("acceptance checklist")
        for line in checklist_lines:
            terminalreporter.line(line)


@pytest.fixture(scope="session")
def config():
    return load_config()


@pytest.fixture(scope="session")
def geometry(config):
    return config.geometry


@pytest.fixture(scope="session")
def params(config):
    return config.controller
