"""
Tests for the Control Service

Tests command parsing, session responses and error codes, transcript
determinism and the single-client TCP server.
"""

import asyncio

import pytest

from vanetsim.exceptions import ControlError, ControlServerError
from vanetsim.schemas import ControlObject, Verb
from vanetsim.services.control import ControlServer, ControlSession, handle_command, parse_command
from vanetsim.services.netmodel import load_scenario_file
from vanetsim.services.simulation import CoSimulation

SCRIPT = [
    "GET SIM_TIME",
    "STEP 10",
    "GET TL_STATE C",
    "GET DETECTOR dW",
    "SET TL_STATE C GGGGGGrrrrrr",
    "GET TL_STATE C",
    "SET TL_STATE C GGG",
    "SET TL_STATE C GGGGGGrrrrrx",
    "GET TL_STATE X",
    "GET DETECTOR nope",
    "FLY",
    "SET TL_PROGRAM C ew_priority",
    "SET TL_PROGRAM C nope",
    "STEP 100",
    "GET VEHICLES",
    "GET METRICS",
    "STEP 500",
    "STEP",
    "BYE",
]


@pytest.fixture
def short_cross(cross_path):
    """The cross scenario cut to 20 s (200 steps)."""
    return load_scenario_file(cross_path, end=20)


def _transcript(scenario):
    session = ControlSession(CoSimulation(scenario))
    return [session.handle_line(line) for line in SCRIPT], session


class TestParseCommand:
    """Test suite for command parsing."""

    def test_step_defaults_to_one(self):
        cmd = parse_command("STEP")

        assert cmd.verb is Verb.STEP
        assert cmd.args == ("1",)

    def test_get_with_argument(self):
        cmd = parse_command("GET TL_STATE C")

        assert cmd.object is ControlObject.TL_STATE
        assert cmd.args == ("C",)

    @pytest.mark.parametrize(
        "line",
        ["", "STEP 0", "STEP x", "STEP 1 2", "GET", "GET TL_STATE", "SET SIM_TIME 1", "GET WEATHER", "BYE now"],
    )
    def test_malformed(self, line):
        with pytest.raises(ControlError) as excinfo:
            parse_command(line)

        assert excinfo.value.code == ControlError.MALFORMED


class TestHandleCommand:
    """Test suite for applying single commands."""

    def test_step_past_horizon_stops_at_end(self, short_cross):
        sim = CoSimulation(short_cross)

        response = handle_command(parse_command("STEP 300"), sim)

        assert response.err_code == ControlError.END_REACHED
        assert response.render() == "ERR 4 end reached at 20.000"
        assert sim.finished

    def test_unknown_light(self, short_cross):
        sim = CoSimulation(short_cross)

        response = handle_command(parse_command("GET TL_STATE X"), sim)

        assert response.err_code == ControlError.UNKNOWN_ID
        assert sim.clock == 0.0

    def test_bye_and_time(self, short_cross):
        sim = CoSimulation(short_cross)

        assert handle_command(parse_command("BYE"), sim).render() == "OK"
        assert handle_command(parse_command("GET SIM_TIME"), sim).render() == "OK 0.000"


class TestControlSession:
    """Test suite for the command loop."""

    def test_scripted_session(self, short_cross):
        responses, session = _transcript(short_cross)
        by_line = dict(zip(SCRIPT, responses))

        assert by_line["GET SIM_TIME"] == "OK 0.000"
        assert by_line["STEP 10"] == "OK 1.000"
        assert responses[2] == "OK GggGggrrrrrr"
        assert by_line["GET DETECTOR dW"].startswith("OK count=0 ")
        assert by_line["SET TL_STATE C GGGGGGrrrrrr"] == "OK"
        assert responses[5] == "OK GGGGGGrrrrrr"
        assert by_line["SET TL_STATE C GGG"] == (
            "ERR 3 traffic light 'C': state length 3 does not match expected length 12"
        )
        assert by_line["SET TL_STATE C GGGGGGrrrrrx"].startswith("ERR 1 ")
        assert by_line["GET TL_STATE X"] == "ERR 2 unknown traffic light 'X'"
        assert by_line["GET DETECTOR nope"] == "ERR 2 unknown detector 'nope'"
        assert by_line["FLY"] == "ERR 1 unknown verb 'FLY'"
        assert by_line["SET TL_PROGRAM C ew_priority"] == "OK 80.000"
        assert by_line["SET TL_PROGRAM C nope"].startswith("ERR 2 ")
        assert by_line["STEP 100"] == "OK 11.000"
        assert by_line["GET VEHICLES"].startswith("OK ")
        assert by_line["GET METRICS"].startswith("OK sent=")
        assert by_line["STEP 500"] == "ERR 4 end reached at 20.000"
        assert by_line["STEP"] == "ERR 4 end reached at 20.000"
        assert by_line["BYE"] == "OK"
        assert session.closed
        assert session.commands == len(SCRIPT)

    def test_vehicle_listing_format(self, short_cross):
        session = ControlSession(CoSimulation(short_cross))
        session.handle_line("STEP 50")

        payload = session.handle_line("GET VEHICLES").split()

        assert payload[0] == "OK"
        count = int(payload[1])
        assert count == len(payload) - 2 > 0
        vehicle_id, edge, lane, pos, speed = payload[2].split(":")
        assert lane.startswith(edge + "_")
        assert float(pos) > 0

    def test_transcripts_are_identical(self, cross_path):
        """Three sessions on the same scenario and seed answer byte for byte alike."""
        runs = [_transcript(load_scenario_file(cross_path, end=20))[0] for _ in range(3)]

        assert runs[0] == runs[1] == runs[2]

    def test_gets_do_not_change_state(self, cross_path):
        queried = ControlSession(CoSimulation(load_scenario_file(cross_path, end=20)))
        plain = ControlSession(CoSimulation(load_scenario_file(cross_path, end=20)))

        queried.handle_line("STEP 50")
        for line in ["GET SIM_TIME", "GET TL_STATE C", "GET DETECTOR dW", "GET VEHICLES", "GET METRICS"] * 3:
            queried.handle_line(line)
        queried.handle_line("STEP 50")
        plain.handle_line("STEP 100")

        for line in ["GET VEHICLES", "GET METRICS", "GET DETECTOR dN"]:
            assert queried.handle_line(line) == plain.handle_line(line)


class TestControlServer:
    """Test suite for the TCP transport."""

    @pytest.mark.asyncio
    async def test_single_client_session(self, short_cross):
        server = ControlServer(CoSimulation(short_cross), "127.0.0.1", 0)
        host, port = await server.start()
        reader, writer = await asyncio.open_connection(host, port)

        writer.write(b"STEP 5\n")
        await writer.drain()
        assert (await reader.readline()).decode() == "OK 0.500\n"

        with pytest.raises(OSError):
            await asyncio.open_connection(host, port)

        writer.write(b"BYE\n")
        await writer.drain()
        assert (await reader.readline()).decode() == "OK\n"
        result = await asyncio.wait_for(server.wait_closed(), timeout=5)
        writer.close()

        assert result.ended_by == "BYE"
        assert result.commands == 2
        assert result.clock == pytest.approx(0.5)

    @pytest.mark.asyncio
    async def test_disconnect_ends_session(self, short_cross):
        server = ControlServer(CoSimulation(short_cross), "127.0.0.1", 0)
        host, port = await server.start()
        _, writer = await asyncio.open_connection(host, port)

        writer.close()
        result = await asyncio.wait_for(server.wait_closed(), timeout=5)

        assert result.ended_by == "disconnect"
        assert result.commands == 0

    @pytest.mark.asyncio
    async def test_busy_session_is_refused(self, short_cross, mocker):
        server = ControlServer(CoSimulation(short_cross), "127.0.0.1", 0)
        server._busy = True
        writer = mocker.MagicMock()
        writer.drain = mocker.AsyncMock()

        await server._handle(mocker.MagicMock(), writer)

        writer.write.assert_called_once_with(b"ERR 5 session busy\n")
        writer.close.assert_called_once()

    @pytest.mark.asyncio
    async def test_port_in_use(self, short_cross):
        first = ControlServer(CoSimulation(short_cross), "127.0.0.1", 0)
        _, port = await first.start()
        try:
            with pytest.raises(ControlServerError) as excinfo:
                await ControlServer(CoSimulation(short_cross), "127.0.0.1", port).start()
            assert excinfo.value.port == port
        finally:
            first._server.close()
            await first._server.wait_closed()
