"""
Tests for the Signal Service

Tests tlLogic parsing (including the bundled static and dynamic program
listings), schedule evaluation, the signal controller and detectors.
"""

import pytest

from vanetsim.exceptions import (
    InvalidStateCharacterError,
    ScenarioValidationError,
    SchemaError,
    SignalError,
    StateLengthError,
)
from vanetsim.schemas import LengthMode, LinkPermission, Phase, PhaseProgram
from vanetsim.services.mobility import SimState, Vehicle
from vanetsim.services.signals import (
    SignalController,
    link_permission,
    parse_detectors,
    parse_tl_programs,
    queue_length,
    read_detector,
    serialize_tl_programs,
    state_at,
    validate_programs,
)

from tests.conftest import fixture_path


def _listing(name: str) -> str:
    return fixture_path(name).read_text(encoding="utf-8")


class TestParsePrograms:
    """Test suite for tlLogic parsing."""

    def test_static_first_block(self):
        """The first static block parses to two phases."""
        programs = parse_tl_programs(_listing("tjunction_static.tll.xml"), length_mode=LengthMode.PERMISSIVE)

        first = programs[0]
        assert first.tl_id == "1274361397"
        assert [(p.duration, p.state) for p in first.phases] == [(31, "GG"), (9, "yy")]

    def test_static_t_junction_block(self):
        programs = parse_tl_programs(_listing("tjunction_static.tll.xml"), length_mode=LengthMode.PERMISSIVE)
        block = next(p for p in programs if p.tl_id == "1284510665")

        assert len(block.phases) == 4
        assert block.cycle == 80
        assert state_at(block, 45) == "rrrggg"

    def test_static_strict_rejects_inconsistent_block(self):
        """Strict mode names the light and both lengths."""
        with pytest.raises(StateLengthError) as excinfo:
            parse_tl_programs(_listing("tjunction_static.tll.xml"), source="tjunction_static")

        error = excinfo.value
        assert error.tl_id == "1274361418"
        assert error.expected == 10
        assert error.actual == 9
        assert "rrrryyggg" in str(error)

    def test_static_permissive_pads_with_red(self):
        programs = parse_tl_programs(_listing("tjunction_static.tll.xml"), length_mode=LengthMode.PERMISSIVE)
        block = next(p for p in programs if p.tl_id == "1274361418")

        assert block.state_length == 10
        assert block.phases[1].state == "rrrryygggr"
        assert block.cycle == 95

    def test_dynamic_strict_and_permissive(self):
        text = _listing("tjunction_dynamic.tll.xml")

        with pytest.raises(StateLengthError) as excinfo:
            parse_tl_programs(text)
        assert excinfo.value.tl_id == "1274361418"
        assert excinfo.value.actual == 11

        programs = parse_tl_programs(text, length_mode=LengthMode.PERMISSIVE)
        assert [p.tl_id for p in programs] == [
            "1274361397",
            "1284510665",
            "1284510687",
            "1274361418",
            "748825800",
        ]
        assert next(p for p in programs if p.tl_id == "1274361418").state_length == 11

    def test_invalid_state_character(self):
        """A state with 'x' is rejected naming the character."""
        text = '<tlLogic id="t"><phase duration="5" state="Gx"/></tlLogic>'

        with pytest.raises(SchemaError, match="'x'"):
            parse_tl_programs(text)

    def test_no_phases(self):
        with pytest.raises(SchemaError, match="no phases"):
            parse_tl_programs('<tlLogic id="t" programID="0"/>')

    def test_duplicate_program(self):
        text = (
            '<tlLogic id="t" programID="0"><phase duration="5" state="G"/></tlLogic>'
            '<tlLogic id="t" programID="0"><phase duration="5" state="r"/></tlLogic>'
        )

        with pytest.raises(SchemaError, match="duplicate program"):
            parse_tl_programs(text)

    def test_serialized_programs_parse_back(self, cross_template):
        assert parse_tl_programs(serialize_tl_programs([cross_template])) == [cross_template]


class TestValidatePrograms:
    """Test suite for fitting programs to link counts."""

    def test_strict_unknown_light(self, two_phase_program):
        with pytest.raises(ScenarioValidationError, match="unknown traffic light"):
            validate_programs([two_phase_program], {"other": 2})

    def test_permissive_truncates_and_pads(self, two_phase_program):
        fitted, warnings = validate_programs(
            [two_phase_program], {"1274361397": 3}, LengthMode.PERMISSIVE
        )

        assert fitted[0].phases[0].state == "GGr"
        assert len(warnings) == 1

        fitted, _ = validate_programs([two_phase_program], {"1274361397": 1}, LengthMode.PERMISSIVE)
        assert fitted[0].phases[1].state == "y"


class TestStateAt:
    """Test suite for schedule evaluation."""

    @pytest.mark.parametrize(
        "t, expected",
        [(0, "GG"), (30.99, "GG"), (31, "yy"), (39.5, "yy"), (40, "GG"), (71, "yy"), (1000, "GG")],
    )
    def test_two_phase_schedule(self, two_phase_program, t, expected):
        """Intervals are half-open and the schedule repeats every cycle."""
        assert state_at(two_phase_program, t) == expected

    def test_offset_shifts_schedule(self, two_phase_program):
        shifted = two_phase_program.model_copy(update={"offset": 31.0})

        assert state_at(shifted, 0) == "yy"


class TestLinkPermission:
    def test_mapping(self):
        assert link_permission("G") is LinkPermission.GREEN_PRIORITY
        assert link_permission("g") is LinkPermission.GREEN_YIELD
        assert link_permission("y") is LinkPermission.YELLOW
        assert link_permission("r") is LinkPermission.RED

    def test_out_of_alphabet(self):
        with pytest.raises(InvalidStateCharacterError):
            link_permission("q")


class TestSignalController:
    """Test suite for program switching and overrides."""

    def _alt(self):
        return PhaseProgram(
            tl_id="1274361397",
            program_id="alt",
            phases=(Phase(duration=10, state="rr"), Phase(duration=10, state="GG")),
        )

    def test_select_program_waits_for_cycle_boundary(self, two_phase_program):
        controller = SignalController([two_phase_program, self._alt()])

        switch_at = controller.select_program("1274361397", "alt", 12.0)

        assert switch_at == pytest.approx(40.0)
        controller.update(39.9)
        assert controller.active_program("1274361397").program_id == "0"
        controller.update(40.0)
        assert controller.active_program("1274361397").program_id == "alt"
        assert controller.state("1274361397", 40.0) == "rr"
        assert controller.state("1274361397", 50.0) == "GG"

    def test_select_at_boundary_is_immediate(self, two_phase_program):
        controller = SignalController([two_phase_program, self._alt()])

        assert controller.select_program("1274361397", "alt", 80.0) == pytest.approx(80.0)

    def test_unknown_program_and_light(self, two_phase_program):
        controller = SignalController([two_phase_program])

        with pytest.raises(SignalError, match="no program 'alt'"):
            controller.select_program("1274361397", "alt", 0.0)
        with pytest.raises(SignalError, match="unknown traffic light"):
            controller.state("nope", 0.0)

    def test_override_and_clear(self, two_phase_program):
        controller = SignalController([two_phase_program])

        controller.set_state("1274361397", "rr")
        assert controller.state("1274361397", 0.0) == "rr"
        controller.clear_override("1274361397")
        assert controller.state("1274361397", 0.0) == "GG"

    def test_override_validation(self, two_phase_program):
        controller = SignalController([two_phase_program])

        with pytest.raises(InvalidStateCharacterError):
            controller.set_state("1274361397", "Gx")
        with pytest.raises(StateLengthError):
            controller.set_state("1274361397", "GGG")

    def test_schedule_rejects_wrong_length(self, two_phase_program):
        controller = SignalController([two_phase_program])
        wrong = PhaseProgram(tl_id="1274361397", program_id="w", phases=(Phase(duration=5, state="G"),))

        with pytest.raises(StateLengthError):
            controller.schedule(wrong, 0.0)


def _state_with(network_scenario, vehicles):
    state = SimState(
        network=network_scenario.network,
        lane_plans=network_scenario.lane_plans,
        vehicle_types=network_scenario.vehicle_types,
        begin=0.0,
        step_length=0.1,
        seed=1,
    )
    plan = network_scenario.lane_plans["r0"]
    vtype = network_scenario.vehicle_types["DEFAULT_VEHTYPE"]
    for vid, pos, speed in vehicles:
        vehicle = Vehicle(id=vid, plan=plan, vtype=vtype, lane="road_0", pos=pos, speed=speed)
        state.vehicles[vid] = vehicle
        state.lanes["road_0"].append(vehicle)
    return state


class TestDetectors:
    """Test suite for detector parsing and readings."""

    def test_parse_detector_tags(self):
        text = """<additional>
            <detector id="a" lane="e_0" pos="10"/>
            <e1Detector id="b" lane="e_0" pos="20" period="30"/>
            <inductionLoop id="c" lane="e_0" pos="30" window="15" queueZone="25"/>
        </additional>"""

        a, b, c = parse_detectors(text)

        assert a.window == 60
        assert b.window == 30
        assert (c.window, c.queue_zone) == (15, 25)

    def test_empty_lane(self, straight_scenario, zone_detector):
        reading = read_detector(zone_detector, _state_with(straight_scenario, []))

        assert (reading.count, reading.mean_speed, reading.occupancy, reading.queue_length) == (0, 0, 0, 0)

    def test_stopped_vehicles_in_zone(self, straight_scenario, zone_detector):
        """Four stopped 5 m vehicles in a 50 m zone give occupancy 0.4."""
        vehicles = [(f"v{i}", 1000 - 7.5 * i, 0.0) for i in range(4)]
        reading = read_detector(zone_detector, _state_with(straight_scenario, vehicles))

        assert reading.occupancy == pytest.approx(0.4)
        assert reading.queue_length == 4
        assert reading.mean_speed == 0

    def test_count_window(self, straight_scenario, zone_detector):
        state = _state_with(straight_scenario, [])
        state.add_detectors([zone_detector])
        state.record_crossing(zone_detector, 10.0, "v0", 12.0)

        state.clock = 30.0
        assert read_detector(zone_detector, state).count == 1
        state.clock = 75.0
        assert read_detector(zone_detector, state).count == 0

    def test_queue_length_zone(self, straight_scenario):
        vehicles = [("front", 1995.0, 0.0), ("mid", 1960.0, 0.05), ("far", 500.0, 0.0), ("moving", 1990.0, 5.0)]
        state = _state_with(straight_scenario, vehicles)

        assert queue_length("road_0", state) == 2
        assert queue_length("road_0", state, zone=None) == 3
