"""
Test configuration and fixtures

Provides scenario fixture paths, loaded scenarios and small builders shared
by the test modules.
"""

from pathlib import Path

import pytest

from vanetsim.schemas import Detector, Phase, PhaseProgram, RadioConfig
from vanetsim.services.netmodel import load_scenario_file

FIXTURES = Path(__file__).parent / "fixtures"


def fixture_path(name: str) -> Path:
    return FIXTURES / name


@pytest.fixture
def fixtures_dir():
    return FIXTURES


@pytest.fixture
def cross_path():
    return FIXTURES / "cross.scenario.xml"


@pytest.fixture
def heavy_path():
    return FIXTURES / "cross_heavy.scenario.xml"


@pytest.fixture
def symmetric_path():
    return FIXTURES / "cross_symmetric.scenario.xml"


@pytest.fixture
def straight_path():
    return FIXTURES / "straight.scenario.xml"


@pytest.fixture
def tjunction_path():
    return FIXTURES / "tjunction.scenario.xml"


@pytest.fixture
def cross_scenario(cross_path):
    return load_scenario_file(cross_path)


@pytest.fixture
def heavy_scenario(heavy_path):
    return load_scenario_file(heavy_path)


@pytest.fixture
def straight_scenario(straight_path):
    return load_scenario_file(straight_path)


@pytest.fixture
def tjunction_scenario(tjunction_path):
    return load_scenario_file(tjunction_path)


@pytest.fixture
def two_phase_program():
    """The 31 s green / 9 s yellow two-link program."""
    return PhaseProgram(
        tl_id="1274361397",
        phases=(Phase(duration=31, state="GG"), Phase(duration=9, state="yy")),
    )


@pytest.fixture
def cross_template():
    return PhaseProgram(
        tl_id="C",
        phases=(
            Phase(duration=31, state="GggGggrrrrrr"),
            Phase(duration=9, state="yyyyyyrrrrrr"),
            Phase(duration=31, state="rrrrrrGggGgg"),
            Phase(duration=9, state="rrrrrryyyyyy"),
        ),
    )


@pytest.fixture
def radio_config():
    return RadioConfig(range=250, per_hop_latency=0.01, packet_size=4096, cbr_rate=4, rreq_ttl=16)


@pytest.fixture
def zone_detector():
    return Detector(id="d0", lane="road_0", pos=1000, window=60, queue_zone=50)


@pytest.fixture
def scenario_copy(tmp_path):
    """Copy a fixture scenario and its inputs into a temporary directory for editing."""

    def _copy(scenario_name: str) -> Path:
        for source in FIXTURES.iterdir():
            if source.is_file():
                (tmp_path / source.name).write_text(source.read_text(encoding="utf-8"), encoding="utf-8")
        return tmp_path / scenario_name

    return _copy
