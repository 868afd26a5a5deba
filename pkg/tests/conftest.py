"""Shared fixtures and the acceptance scoreboard.

Synthetic fixtures are expensive to render, so the on-disk layouts are
built once per session.  Acceptance tests record one line per criterion
through the `scoreboard` fixture; the terminal-summary hook prints them at
the end of the run so the suite output doubles as a checklist.
"""

import pytest

from herdtrack.synth import easy_scenario, generate, hard_scenario, write_fixture

_SCOREBOARD_LINES = []


@pytest.fixture
def scoreboard():
    def record(name: str, detail: str) -> None:
        _SCOREBOARD_LINES.append(f"PASS {name}: {detail}")

    return record


@pytest.fixture(scope="session")
def easy_fixture(tmp_path_factory):
    root = tmp_path_factory.mktemp("easy_fixture")
    paths = dict(write_fixture(root, easy_scenario()))
    paths["root"] = root
    return paths


@pytest.fixture(scope="session")
def hard_fixture(tmp_path_factory):
    root = tmp_path_factory.mktemp("hard_fixture")
    paths = dict(write_fixture(root, hard_scenario()))
    paths["root"] = root
    return paths


@pytest.fixture(scope="session")
def easy_scene():
    """In-memory easy scenario: (sequence, masks, edges, truth)."""
    return generate(easy_scenario())


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    failed = [
        rep.nodeid.split("::")[-1]
        for rep in terminalreporter.stats.get("failed", [])
        if "test_acceptance" in rep.nodeid
    ]
    if not _SCOREBOARD_LINES and not failed:
        return
    terminalreporter.section("acceptance criteria")
    for line in _SCOREBOARD_LINES:
        terminalreporter.write_line(line)
    for name in failed:
        terminalreporter.write_line(f"FAIL {name}")
