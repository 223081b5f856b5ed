import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from roadgame.config import load_config  # noqa: E402
from roadgame.fixtures import FIXTURE_DIR, load_fixture  # noqa: E402
from roadgame.game import build_game, solve_safety  # noqa: E402

GOLDEN = Path(__file__).parent / "golden"

# criterion lines collected by test_acceptance, echoed at the end of the run
ACCEPTANCE_LINES = []


class SynthCache:
    """Scenario, config, grid and corners-mode strategy per fixture, built once."""

    def __init__(self):
        self._store = {}

    def get(self, name):
        if name not in self._store:
            sc = load_fixture(name)
            cfg = load_config(FIXTURE_DIR / f"{name}.ini")
            g = cfg.grid_spec(sc)
            gg = build_game(sc, g, cfg.dynamics, "corners")
            ps = solve_safety(gg)
            self._store[name] = (sc, cfg, g, ps)
        return self._store[name]


@pytest.fixture(scope="session")
def synth():
    return SynthCache()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
