import json
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from foragelab.ablation import MockController  # noqa: E402
from foragelab.channels import ChannelGroup  # noqa: E402
from foragelab.simulation import TrialConfig  # noqa: E402
from foragelab.world import ArenaConfig  # noqa: E402

REPO = Path(__file__).resolve().parent.parent
FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def short_trial() -> TrialConfig:
    return TrialConfig(arena=ArenaConfig(trial_ticks=300))


@pytest.fixture
def mock_controller() -> MockController:
    return MockController({ChannelGroup.HOLDING_FOOD: 10, ChannelGroup.NEST_LIGHT: 10})


@pytest.fixture
def mock_path() -> Path:
    return FIXTURES / "mock_controller.json"


@pytest.fixture
def tiny_config(tmp_path) -> Path:
    """Run config small enough for CLI round trips in well under a second."""
    path = tmp_path / "tiny.json"
    path.write_text(json.dumps({
        "arena": {"trial_ticks": 300},
        "evolution": {"population_size": 8, "generations": 2},
        "ablation": {"seeds": 5},
        "io": {"output_dir": str(tmp_path / "default_out")},
    }))
    return path


def _criterion(report) -> int:
    return int(dict(report.user_properties).get("criterion", 0))


def pytest_terminal_summary(terminalreporter):
    """One PASS/FAIL line per acceptance criterion, after the normal report."""
    reports = [r for key in ("passed", "failed", "error") for r in terminalreporter.stats.get(key, [])
               if "test_acceptance" in r.nodeid and (r.when == "call" or r.failed)]
    if not reports:
        return
    terminalreporter.section("acceptance criteria")
    for r in sorted(reports, key=_criterion):
        props = dict(r.user_properties)
        status = "PASS" if r.passed else "FAIL"
        terminalreporter.write_line(
            f"{status} criterion {props.get('criterion', '?')}: {props.get('title', r.nodeid)}"
            f" | {props.get('detail', 'no detail recorded')}"
        )
