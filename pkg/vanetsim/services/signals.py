"""
Signal Service

Traffic-light phase programs (parsing, fitting to the network, cyclic
schedule evaluation), the per-simulation SignalController that applies
overrides and program switches, and lane detectors.
"""

import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from typing import TYPE_CHECKING, Dict, List, Mapping, Optional, Sequence, Tuple

from vanetsim.config import DETECTOR_QUEUE_ZONE, LOG_LEVEL, SIM_LOG_FILE, WAITING_SPEED
from vanetsim.exceptions import (
    InvalidStateCharacterError,
    SchemaError,
    ScenarioValidationError,
    SignalError,
    StateLengthError,
)
from vanetsim.logger import setup_logger
from vanetsim.schemas import (
    STATE_ALPHABET,
    Detector,
    DetectorReading,
    LengthMode,
    LinkPermission,
    Phase,
    PhaseProgram,
)
from vanetsim.services.xmlio import (
    build_model,
    fmt,
    parse_document,
    read_number,
    require_attr,
    to_document,
)

if TYPE_CHECKING:
    from vanetsim.services.mobility import SimState

logger = setup_logger(__name__, level=LOG_LEVEL, log_file=SIM_LOG_FILE)

DETECTOR_TAGS = ("detector", "e1Detector", "inductionLoop")
_EPS = 1e-9


# ============================================================
# PROGRAMS
# ============================================================


def _pad(state: str, length: int) -> str:
    return state[:length] if len(state) >= length else state + "r" * (length - len(state))


def parse_tl_programs(
    text: str, source: str = "tllogic", length_mode: LengthMode = LengthMode.STRICT
) -> List[PhaseProgram]:
    """
    Parse tlLogic elements, with or without an enclosing root element.

    In strict mode every phase of a program must have the same state length;
    in permissive mode shorter states are padded with 'r' to the longest one.

    Raises:
        XMLParseError: Malformed document
        SchemaError: Missing attribute, empty phase list, bad state character or
            duplicate (id, programID)
        StateLengthError: Phase state lengths disagree (strict mode)
    """
    root = parse_document(text, source, fragment=True)
    programs: List[PhaseProgram] = []
    seen = set()
    for element in root.iter("tlLogic"):
        tl_id = require_attr(element, "id", source)
        program_id = element.get("programID", "0")
        if (tl_id, program_id) in seen:
            raise SchemaError(
                "tlLogic",
                "programID",
                f"duplicate program '{program_id}' for traffic light '{tl_id}'",
                source,
            )
        seen.add((tl_id, program_id))

        phases = [
            build_model(
                Phase,
                "phase",
                source,
                duration=read_number(p, "duration", source, required=True),
                state=require_attr(p, "state", source),
            )
            for p in element.findall("phase")
        ]
        if not phases:
            raise SchemaError("tlLogic", "phase", f"traffic light '{tl_id}' has no phases", source)

        lengths = [len(p.state) for p in phases]
        if len(set(lengths)) > 1:
            if length_mode is LengthMode.STRICT:
                index = next(i for i, n in enumerate(lengths) if n != lengths[0])
                raise StateLengthError(
                    tl_id,
                    lengths[0],
                    lengths[index],
                    source,
                    detail=f"phase {index} state '{phases[index].state}'",
                )
            width = max(lengths)
            logger.warning(
                f"{source}: traffic light '{tl_id}' has phase states of lengths {lengths}; "
                f"padding to {width}"
            )
            phases = [Phase(duration=p.duration, state=_pad(p.state, width)) for p in phases]

        programs.append(
            build_model(
                PhaseProgram,
                "tlLogic",
                source,
                {"program_id": "programID"},
                tl_id=tl_id,
                program_id=program_id,
                type=element.get("type", "static"),
                offset=read_number(element, "offset", source, default=0.0),
                phases=tuple(phases),
            )
        )
    return programs


def serialize_tl_programs(programs: Sequence[PhaseProgram]) -> str:
    children = []
    for program in programs:
        element = ET.Element(
            "tlLogic",
            {
                "id": program.tl_id,
                "type": program.type,
                "programID": program.program_id,
                "offset": fmt(program.offset),
            },
        )
        for phase in program.phases:
            ET.SubElement(element, "phase", {"duration": fmt(phase.duration), "state": phase.state})
        children.append(element)
    return to_document("additional", children)


def validate_programs(
    programs: Sequence[PhaseProgram],
    link_counts: Mapping[str, int],
    mode: LengthMode = LengthMode.STRICT,
    source: Optional[str] = None,
) -> Tuple[List[PhaseProgram], List[str]]:
    """
    Fit programs to the network's link counts.

    Strict mode rejects programs for unknown lights and state strings whose
    length differs from the light's link count. Permissive mode skips unknown
    lights and pads with 'r' or truncates, reporting each change as a warning.

    Returns:
        Fitted programs and the warnings raised while fitting
    """
    fitted: List[PhaseProgram] = []
    warnings: List[str] = []
    for program in programs:
        expected = link_counts.get(program.tl_id)
        if expected is None:
            if mode is LengthMode.STRICT:
                raise ScenarioValidationError(
                    f"signal program for unknown traffic light '{program.tl_id}'", source
                )
            warnings.append(f"skipping program for unknown traffic light '{program.tl_id}'")
            continue
        if program.state_length == expected:
            fitted.append(program)
            continue
        if mode is LengthMode.STRICT:
            raise StateLengthError(program.tl_id, expected, program.state_length, source)
        warnings.append(
            f"traffic light '{program.tl_id}': state length {program.state_length} "
            f"fitted to {expected}"
        )
        phases = tuple(Phase(duration=p.duration, state=_pad(p.state, expected)) for p in program.phases)
        fitted.append(program.model_copy(update={"phases": phases}))
    for warning in warnings:
        logger.warning(f"{source or 'tllogic'}: {warning}")
    return fitted, warnings


def state_at(program: PhaseProgram, t: float) -> str:
    """
    State string of a program at time ``t``.

    Phases cover half-open intervals ``[start, end)`` of the cycle, evaluated
    at ``(t + offset) mod cycle``.
    """
    cycle = program.cycle
    u = math.fmod(t + program.offset, cycle)
    if u < 0:
        u += cycle
    start = 0.0
    for phase in program.phases:
        end = start + phase.duration
        if u < end - _EPS:
            return phase.state
        start = end
    return program.phases[0].state


def link_permission(char: str) -> LinkPermission:
    """
    Map a state character to its permission.

    Raises:
        InvalidStateCharacterError: Character outside G, g, y, r
    """
    if len(char) != 1 or char not in STATE_ALPHABET:
        raise InvalidStateCharacterError(char)
    return LinkPermission(char)


# ============================================================
# CONTROLLER
# ============================================================


@dataclass
class _Installed:
    program: PhaseProgram
    anchor: float


class SignalController:
    """
    Owns the active signal program of every light during one run.

    Switches requested while a cycle is running wait for the next cycle
    boundary of the active program; state overrides replace schedule
    evaluation until cleared.
    """

    def __init__(self, programs: Sequence[PhaseProgram]):
        self._library: Dict[str, Dict[str, PhaseProgram]] = {}
        self._active: Dict[str, _Installed] = {}
        self._pending: Dict[str, Tuple[PhaseProgram, float]] = {}
        self._overrides: Dict[str, str] = {}
        for program in programs:
            self._library.setdefault(program.tl_id, {})[program.program_id] = program
            if program.tl_id not in self._active:
                self._active[program.tl_id] = _Installed(program, 0.0)

    @property
    def tl_ids(self) -> List[str]:
        return list(self._active)

    def has_light(self, tl_id: str) -> bool:
        return tl_id in self._active

    def link_count(self, tl_id: str) -> int:
        return self._installed(tl_id).program.state_length

    def active_program(self, tl_id: str) -> PhaseProgram:
        return self._installed(tl_id).program

    def pending_program(self, tl_id: str) -> Optional[Tuple[PhaseProgram, float]]:
        return self._pending.get(tl_id)

    def program_ids(self, tl_id: str) -> List[str]:
        self._installed(tl_id)
        return list(self._library[tl_id])

    def _installed(self, tl_id: str) -> _Installed:
        try:
            return self._active[tl_id]
        except KeyError:
            raise SignalError(f"unknown traffic light '{tl_id}'") from None

    def next_cycle_boundary(self, tl_id: str, t: float) -> float:
        """First instant at or after ``t`` where the active program restarts its cycle."""
        installed = self._installed(tl_id)
        cycle = installed.program.cycle
        u = math.fmod(t - installed.anchor + installed.program.offset, cycle)
        if u < 0:
            u += cycle
        if u < _EPS or cycle - u < _EPS:
            return t
        return t + (cycle - u)

    def update(self, t: float) -> None:
        """Install pending programs whose switch time has been reached."""
        for tl_id in list(self._pending):
            program, switch_at = self._pending[tl_id]
            if t + _EPS >= switch_at:
                del self._pending[tl_id]
                self._active[tl_id] = _Installed(program, switch_at + program.offset)
                logger.info(
                    f"Traffic light '{tl_id}': program '{program.program_id}' "
                    f"({program.origin.value}) active from t={switch_at:.2f}"
                )

    def state(self, tl_id: str, t: float) -> str:
        override = self._overrides.get(tl_id)
        if override is not None:
            return override
        installed = self._installed(tl_id)
        return state_at(installed.program, t - installed.anchor)

    def states(self, t: float) -> Dict[str, str]:
        return {tl_id: self.state(tl_id, t) for tl_id in self._active}

    def set_state(self, tl_id: str, state: str) -> None:
        """
        Override a light's state string until cleared or a program is selected.

        Raises:
            SignalError: Unknown light
            InvalidStateCharacterError: Character outside the alphabet
            StateLengthError: Length differs from the light's link count
        """
        expected = self.link_count(tl_id)
        for char in state:
            link_permission(char)
        if len(state) != expected:
            raise StateLengthError(tl_id, expected, len(state))
        self._overrides[tl_id] = state

    def clear_override(self, tl_id: str) -> None:
        self._overrides.pop(tl_id, None)

    def select_program(self, tl_id: str, program_id: str, t: float) -> float:
        """
        Switch to a library program at the next cycle boundary; clears any override.

        Returns:
            The switch time

        Raises:
            SignalError: Unknown light or program id
        """
        self._installed(tl_id)
        program = self._library[tl_id].get(program_id)
        if program is None:
            raise SignalError(f"traffic light '{tl_id}' has no program '{program_id}'")
        self.clear_override(tl_id)
        return self.schedule(program, t)

    def schedule(self, program: PhaseProgram, t: float) -> float:
        """Add a program to the library and switch to it at the next cycle boundary."""
        current = self._installed(program.tl_id)
        if program.state_length != current.program.state_length:
            raise StateLengthError(program.tl_id, current.program.state_length, program.state_length)
        self._library[program.tl_id][program.program_id] = program
        switch_at = self.next_cycle_boundary(program.tl_id, t)
        self._pending[program.tl_id] = (program, switch_at)
        logger.debug(
            f"Traffic light '{program.tl_id}': program '{program.program_id}' "
            f"scheduled for t={switch_at:.2f}"
        )
        return switch_at


# ============================================================
# DETECTORS
# ============================================================


def parse_detectors(text: str, source: str = "detectors") -> List[Detector]:
    """Parse detector, e1Detector or inductionLoop elements; ``period`` is a window alias."""
    root = parse_document(text, source)
    detectors = []
    for element in root.iter():
        if element.tag not in DETECTOR_TAGS:
            continue
        window = read_number(element, "window", source)
        if window is None:
            window = read_number(element, "period", source)
        values = {
            "id": require_attr(element, "id", source),
            "lane": require_attr(element, "lane", source),
            "pos": read_number(element, "pos", source, required=True),
            "window": window,
            "queue_zone": read_number(element, "queueZone", source),
        }
        detectors.append(
            build_model(
                Detector,
                element.tag,
                source,
                {"queue_zone": "queueZone"},
                **{k: v for k, v in values.items() if v is not None},
            )
        )
    return detectors


def read_detector(detector: Detector, state: "SimState") -> DetectorReading:
    """
    Read a detector at the current simulation clock.

    ``count`` covers front crossings of ``pos`` in the trailing window; the
    other fields describe vehicles whose front is in ``[pos - queue_zone, pos]``.
    """
    clock = state.clock
    crossings = state.crossings.get(detector.id, ())
    count = sum(1 for t, _, _ in crossings if clock - detector.window < t <= clock + _EPS)

    lower = detector.pos - detector.queue_zone
    in_zone = [v for v in state.lanes.get(detector.lane, ()) if lower <= v.pos <= detector.pos]
    if not in_zone:
        return DetectorReading(count=count)
    occupied = sum(v.length for v in in_zone)
    return DetectorReading(
        count=count,
        mean_speed=sum(v.speed for v in in_zone) / len(in_zone),
        occupancy=min(occupied / detector.queue_zone, 1.0),
        queue_length=sum(1 for v in in_zone if v.speed < WAITING_SPEED),
    )


def queue_length(lane: str, state: "SimState", zone: Optional[float] = DETECTOR_QUEUE_ZONE) -> int:
    """Stopped vehicles on a lane within ``zone`` meters of its end (the whole lane when None)."""
    vehicles = state.lanes.get(lane, ())
    if zone is None:
        return sum(1 for v in vehicles if v.speed < WAITING_SPEED)
    start = state.network.lane_length(lane) - zone
    return sum(1 for v in vehicles if v.speed < WAITING_SPEED and v.pos >= start)
