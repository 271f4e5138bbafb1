"""
Control Service

Newline-delimited text protocol that lets one external client step the
co-simulation, read signal and detector state and command traffic lights.
ControlSession handles lines independently of the transport; ControlServer
serves a single client over TCP with asyncio streams.
"""

import asyncio
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

from vanetsim.config import CONTROL_HOST, CONTROL_LOG_FILE, CONTROL_PORT, LOG_LEVEL
from vanetsim.exceptions import (
    ControlError,
    ControlServerError,
    InvalidStateCharacterError,
    SignalError,
    StateLengthError,
)
from vanetsim.logger import setup_logger
from vanetsim.schemas import Command, ControlObject, Response, ResponseStatus, Verb
from vanetsim.services.signals import read_detector
from vanetsim.services.simulation import CoSimulation

logger = setup_logger(__name__, level=LOG_LEVEL, log_file=CONTROL_LOG_FILE)

# (verb, object) -> number of arguments
COMMAND_TABLE: Dict[Tuple[Verb, Optional[ControlObject]], int] = {
    (Verb.STEP, None): 1,
    (Verb.GET, ControlObject.SIM_TIME): 0,
    (Verb.GET, ControlObject.TL_STATE): 1,
    (Verb.SET, ControlObject.TL_STATE): 2,
    (Verb.SET, ControlObject.TL_PROGRAM): 2,
    (Verb.GET, ControlObject.DETECTOR): 1,
    (Verb.GET, ControlObject.VEHICLES): 0,
    (Verb.GET, ControlObject.METRICS): 0,
    (Verb.BYE, None): 0,
}


def _ok(payload: str = "") -> Response:
    return Response(status=ResponseStatus.OK, payload=payload)


def _err(code: int, message: str) -> Response:
    return Response(status=ResponseStatus.ERR, payload=message, err_code=code)


def parse_command(line: str) -> Command:
    """
    Parse one command line.

    ``STEP`` without a count steps once.

    Raises:
        ControlError: Code 1 for anything outside the command table
    """
    tokens = line.split()
    if not tokens:
        raise ControlError(ControlError.MALFORMED, "empty command")
    try:
        verb = Verb(tokens[0])
    except ValueError:
        raise ControlError(ControlError.MALFORMED, f"unknown verb '{tokens[0]}'") from None

    if verb is Verb.STEP:
        args = tuple(tokens[1:]) or ("1",)
        if len(args) != 1 or not args[0].isdigit() or int(args[0]) < 1:
            raise ControlError(ControlError.MALFORMED, "usage: STEP [n] with n >= 1")
        return Command(verb=verb, args=args)
    if verb is Verb.BYE:
        if len(tokens) != 1:
            raise ControlError(ControlError.MALFORMED, "BYE takes no arguments")
        return Command(verb=verb)

    if len(tokens) < 2:
        raise ControlError(ControlError.MALFORMED, f"{verb.value} needs an object")
    try:
        obj = ControlObject(tokens[1])
    except ValueError:
        raise ControlError(ControlError.MALFORMED, f"unknown object '{tokens[1]}'") from None
    arity = COMMAND_TABLE.get((verb, obj))
    if arity is None:
        raise ControlError(ControlError.MALFORMED, f"{verb.value} {obj.value} is not supported")
    args = tuple(tokens[2:])
    if len(args) != arity:
        raise ControlError(
            ControlError.MALFORMED, f"{verb.value} {obj.value} takes {arity} argument(s)"
        )
    return Command(verb=verb, object=obj, args=args)


def _vehicles_payload(sim: CoSimulation) -> str:
    vehicles = list(sim.state.vehicles.values())
    parts = [str(len(vehicles))]
    parts.extend(f"{v.id}:{v.edge}:{v.lane}:{v.pos:.3f}:{v.speed:.3f}" for v in vehicles)
    return " ".join(parts)


def _metrics_payload(sim: CoSimulation) -> str:
    m = sim.net_metrics()
    return (
        f"sent={m.sent} received={m.received} pdf={m.pdf:.3f} "
        f"avg_pkts_s={m.avg_packets_per_s:.3f} avg_bits_s={m.avg_bits_per_s:.3f}"
    )


def handle_command(cmd: Command, sim: CoSimulation) -> Response:
    """
    Apply one command to the simulation and build its response.

    GET commands never change state. STEP beyond the horizon runs the steps
    that remain and answers ERR 4.
    """
    if cmd.verb is Verb.BYE:
        return _ok()

    if cmd.verb is Verb.STEP:
        requested = int(cmd.args[0])
        if sim.finished:
            return _err(ControlError.END_REACHED, f"end reached at {sim.clock:.3f}")
        taken = sim.advance(requested)
        if taken < requested:
            return _err(ControlError.END_REACHED, f"end reached at {sim.clock:.3f}")
        return _ok(f"{sim.clock:.3f}")

    obj = cmd.object
    if obj is ControlObject.SIM_TIME:
        return _ok(f"{sim.clock:.3f}")

    if obj is ControlObject.DETECTOR:
        detector = sim.scenario.detectors.get(cmd.args[0])
        if detector is None:
            return _err(ControlError.UNKNOWN_ID, f"unknown detector '{cmd.args[0]}'")
        r = read_detector(detector, sim.state)
        return _ok(
            f"count={r.count} mean_speed={r.mean_speed:.3f} "
            f"occupancy={r.occupancy:.3f} queue={r.queue_length}"
        )

    if obj is ControlObject.VEHICLES:
        return _ok(_vehicles_payload(sim))
    if obj is ControlObject.METRICS:
        return _ok(_metrics_payload(sim))

    tl_id = cmd.args[0]
    if not sim.signals.has_light(tl_id):
        return _err(ControlError.UNKNOWN_ID, f"unknown traffic light '{tl_id}'")

    if cmd.verb is Verb.GET:
        return _ok(sim.signals.state(tl_id, sim.clock))

    if obj is ControlObject.TL_STATE:
        try:
            sim.signals.set_state(tl_id, cmd.args[1])
        except InvalidStateCharacterError as exc:
            return _err(ControlError.MALFORMED, str(exc))
        except StateLengthError as exc:
            return _err(ControlError.LENGTH_MISMATCH, exc.reason)
        return _ok()

    try:
        switch_at = sim.signals.select_program(tl_id, cmd.args[1], sim.clock)
    except SignalError as exc:
        return _err(ControlError.UNKNOWN_ID, str(exc))
    return _ok(f"{switch_at:.3f}")


class ControlSession:
    """Transport-independent command loop state for one client."""

    def __init__(self, sim: CoSimulation):
        self.sim = sim
        self.closed = False
        self.commands = 0

    def handle_line(self, line: str) -> str:
        """Handle one line and return the response line (without newline)."""
        self.commands += 1
        try:
            cmd = parse_command(line)
        except ControlError as exc:
            return _err(exc.code, exc.message).render()
        if cmd.verb is Verb.BYE:
            self.closed = True
        return handle_command(cmd, self.sim).render()


@dataclass
class SessionResult:
    commands: int
    ended_by: str
    clock: float


class ControlServer:
    """
    Serves exactly one client.

    The listener is closed as soon as a client connects; a client that slips
    in before that is answered ``ERR 5 session busy``.
    """

    def __init__(self, sim: CoSimulation, host: str = CONTROL_HOST, port: int = CONTROL_PORT):
        self.sim = sim
        self.host = host
        self.port = port
        self.session = ControlSession(sim)
        self._server: Optional[asyncio.AbstractServer] = None
        self._busy = False
        self._done: Optional[asyncio.Event] = None
        self._ended_by = "disconnect"

    async def start(self) -> Tuple[str, int]:
        """
        Bind the listener.

        Returns:
            The bound host and port (useful when port 0 was requested)

        Raises:
            ControlServerError: If the endpoint cannot be bound
        """
        self._done = asyncio.Event()
        try:
            self._server = await asyncio.start_server(self._handle, self.host, self.port)
        except OSError as exc:
            raise ControlServerError(self.host, self.port, exc.strerror or str(exc)) from exc
        host, port = self._server.sockets[0].getsockname()[:2]
        self.port = port
        logger.info(f"Control server listening on {host}:{port}")
        return host, port

    async def _handle(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        if self._busy:
            writer.write(f"ERR {ControlError.BUSY} session busy\n".encode("utf-8"))
            await writer.drain()
            writer.close()
            return
        self._busy = True
        self._server.close()
        peer = writer.get_extra_info("peername")
        logger.info(f"Control session started with {peer}")
        try:
            while True:
                raw = await reader.readline()
                if not raw:
                    break
                line = raw.decode("utf-8", errors="replace").strip()
                response = self.session.handle_line(line)
                writer.write((response + "\n").encode("utf-8"))
                await writer.drain()
                if self.session.closed:
                    self._ended_by = "BYE"
                    break
        except (ConnectionError, asyncio.IncompleteReadError) as exc:
            logger.warning(f"Control client dropped: {exc}")
        finally:
            writer.close()
            logger.info(
                f"Control session ended by {self._ended_by} after {self.session.commands} "
                f"command(s) at t={self.sim.clock:.3f}"
            )
            self._done.set()

    async def wait_closed(self) -> SessionResult:
        await self._done.wait()
        if self._server is not None:
            self._server.close()
            await self._server.wait_closed()
        return SessionResult(self.session.commands, self._ended_by, self.sim.clock)

    async def serve_one(self) -> SessionResult:
        await self.start()
        return await self.wait_closed()


def serve(sim: CoSimulation, host: str = CONTROL_HOST, port: int = CONTROL_PORT) -> SessionResult:
    """Serve one control session and block until it ends."""
    return asyncio.run(ControlServer(sim, host, port).serve_one())
