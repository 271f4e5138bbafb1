"""
Pydantic Schemas for Scenario Data, Reports and the HTTP API

These models define the validated, immutable shape of everything read from
scenario files and everything reported back: network elements, signal
programs, demand, radio and controller configuration, metrics and run reports.
Hot simulation state (vehicles, packets, route tables) lives in dataclasses in
the service modules instead.
"""

import math
from enum import Enum
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from vanetsim.config import (
    ADAPTIVE_CONTROL_INTERVAL,
    ADAPTIVE_G_MAX,
    ADAPTIVE_G_MIN,
    ADAPTIVE_LOAD_METRIC,
    ADAPTIVE_YELLOW,
    DEFAULT_SEED,
    DEFAULT_STEP_LENGTH,
    DETECTOR_QUEUE_ZONE,
    DETECTOR_WINDOW,
    RADIO_CBR_RATE,
    RADIO_LOSS_PROBABILITY,
    RADIO_PACKET_SIZE,
    RADIO_PER_HOP_LATENCY,
    RADIO_RANGE,
    RADIO_ROUTE_LIFETIME,
    RADIO_RREQ_TTL,
)

STATE_ALPHABET = "Ggyr"
GREEN_CHARS = frozenset("Gg")


def lane_id(edge_id: str, index: int) -> str:
    """Return the lane id for an edge and lane index (``<edge>_<index>``)."""
    return f"{edge_id}_{index}"


def split_lane_id(lane: str) -> Tuple[str, int]:
    """
    Split a ``<edge>_<index>`` lane id.

    Raises:
        ValueError: If the id has no numeric lane suffix
    """
    edge_id, sep, index = lane.rpartition("_")
    if not sep or not edge_id or not index.isdigit():
        raise ValueError(f"lane id '{lane}' is not of the form <edge>_<index>")
    return edge_id, int(index)


class _Frozen(BaseModel):
    model_config = ConfigDict(frozen=True)


# ============================================================
# NETWORK
# ============================================================


class NodeKind(str, Enum):
    PLAIN = "plain"
    TRAFFIC_LIGHT = "traffic_light"


class Node(_Frozen):
    """A junction or road end point."""

    id: str = Field(..., min_length=1)
    x: float = Field(..., description="Planar x coordinate in meters")
    y: float = Field(..., description="Planar y coordinate in meters")
    kind: NodeKind = NodeKind.PLAIN

    @field_validator("x", "y")
    @classmethod
    def _finite(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("coordinate must be finite")
        return value


class Edge(_Frozen):
    """A directed road segment with one or more lanes."""

    id: str = Field(..., min_length=1)
    from_node: str = Field(..., min_length=1)
    to_node: str = Field(..., min_length=1)
    length: float = Field(..., gt=0, description="Meters")
    speed_limit: float = Field(..., gt=0, description="Meters per second")
    lane_count: int = Field(1, ge=1)

    @model_validator(mode="after")
    def _no_self_loop(self):
        if self.from_node == self.to_node:
            raise ValueError(f"self-loop: from and to are both '{self.from_node}'")
        return self


class Connection(_Frozen):
    """An allowed movement from one lane to another, optionally signal controlled."""

    from_edge: str
    from_lane: int = Field(..., ge=0)
    to_edge: str
    to_lane: int = Field(..., ge=0)
    tl_id: Optional[str] = None
    link_index: Optional[int] = Field(None, ge=0)


# ============================================================
# SIGNALS AND DETECTORS
# ============================================================


class LinkPermission(str, Enum):
    GREEN_PRIORITY = "G"
    GREEN_YIELD = "g"
    YELLOW = "y"
    RED = "r"


class ProgramOrigin(str, Enum):
    STATIC_FILE = "static_file"
    ADAPTIVE = "adaptive"


class LengthMode(str, Enum):
    STRICT = "strict"
    PERMISSIVE = "permissive"


class Phase(_Frozen):
    duration: float = Field(..., gt=0, description="Seconds")
    state: str = Field(..., min_length=1)

    @field_validator("state")
    @classmethod
    def _alphabet(cls, value: str) -> str:
        for char in value:
            if char not in STATE_ALPHABET:
                raise ValueError(f"invalid state character '{char}'")
        return value

    @property
    def is_green(self) -> bool:
        return "y" not in self.state and any(c in GREEN_CHARS for c in self.state)

    @property
    def is_yellow(self) -> bool:
        return "y" in self.state


class PhaseProgram(_Frozen):
    """A cyclic tlLogic program for one traffic light."""

    tl_id: str = Field(..., min_length=1)
    program_id: str = "0"
    type: str = "static"
    offset: float = 0.0
    phases: Tuple[Phase, ...] = Field(..., min_length=1)
    origin: ProgramOrigin = ProgramOrigin.STATIC_FILE

    @model_validator(mode="after")
    def _equal_lengths(self):
        expected = len(self.phases[0].state)
        for index, phase in enumerate(self.phases):
            if len(phase.state) != expected:
                raise ValueError(
                    f"phase {index} state '{phase.state}' has length {len(phase.state)}, "
                    f"expected {expected}"
                )
        return self

    @property
    def cycle(self) -> float:
        return sum(phase.duration for phase in self.phases)

    @property
    def state_length(self) -> int:
        return len(self.phases[0].state)


class Detector(_Frozen):
    """A lane detector with a counting line at ``pos`` and a queue zone behind it."""

    id: str = Field(..., min_length=1)
    lane: str = Field(..., min_length=1)
    pos: float = Field(..., ge=0, description="Meters from lane start")
    window: float = Field(DETECTOR_WINDOW, gt=0, description="Counting window in seconds")
    queue_zone: float = Field(DETECTOR_QUEUE_ZONE, gt=0, description="Meters upstream of pos")

    @property
    def edge_id(self) -> str:
        return split_lane_id(self.lane)[0]

    @property
    def lane_index(self) -> int:
        return split_lane_id(self.lane)[1]


class DetectorReading(_Frozen):
    count: int = Field(0, ge=0)
    mean_speed: float = Field(0.0, ge=0)
    occupancy: float = Field(0.0, ge=0, le=1)
    queue_length: int = Field(0, ge=0)


# ============================================================
# DEMAND
# ============================================================


class VehicleType(_Frozen):
    """Krauss car-following parameters; defaults follow SUMO's passenger car."""

    id: str = "DEFAULT_VEHTYPE"
    accel: float = Field(2.6, gt=0)
    decel: float = Field(4.5, gt=0)
    tau: float = Field(1.0, gt=0)
    sigma: float = Field(0.0, ge=0, le=1)
    length: float = Field(5.0, gt=0)
    min_gap: float = Field(2.5, ge=0)
    max_speed: float = Field(55.56, gt=0)


DEFAULT_VEHICLE_TYPE = VehicleType()


class VehicleRoute(_Frozen):
    id: str = Field(..., min_length=1)
    edge_sequence: Tuple[str, ...] = Field(..., min_length=1)


class Flow(_Frozen):
    """Repeated departures on one route, at a fixed rate or with a per-second probability."""

    id: str = Field(..., min_length=1)
    route: VehicleRoute
    begin: float = 0.0
    end: float
    vehicles_per_hour: Optional[float] = Field(None, gt=0)
    probability: Optional[float] = Field(None, gt=0, le=1)
    vtype: str = DEFAULT_VEHICLE_TYPE.id
    depart_speed: float = Field(0.0, ge=0)

    @model_validator(mode="after")
    def _check(self):
        if self.begin >= self.end:
            raise ValueError(f"begin ({self.begin}) must be before end ({self.end})")
        if (self.vehicles_per_hour is None) == (self.probability is None):
            raise ValueError("exactly one of vehsPerHour/period or probability is required")
        return self

    @property
    def period(self) -> Optional[float]:
        if self.vehicles_per_hour is None:
            return None
        return 3600.0 / self.vehicles_per_hour


class VehicleDeparture(_Frozen):
    """A single explicitly listed vehicle."""

    id: str = Field(..., min_length=1)
    route: VehicleRoute
    depart: float = Field(..., ge=0)
    vtype: str = DEFAULT_VEHICLE_TYPE.id
    depart_speed: float = Field(0.0, ge=0)


# ============================================================
# RADIO AND CONTROLLER CONFIGURATION
# ============================================================


class RadioConfig(_Frozen):
    range: float = Field(RADIO_RANGE, gt=0, description="Unit-disk radius in meters")
    per_hop_latency: float = Field(RADIO_PER_HOP_LATENCY, gt=0)
    packet_size: int = Field(RADIO_PACKET_SIZE, gt=0, description="Bits")
    cbr_rate: float = Field(RADIO_CBR_RATE, gt=0, description="Packets per second")
    rreq_ttl: int = Field(RADIO_RREQ_TTL, gt=0)
    route_lifetime: float = Field(RADIO_ROUTE_LIFETIME, gt=0)
    loss_probability: float = Field(RADIO_LOSS_PROBABILITY, ge=0, lt=1)
    max_nodes: Optional[int] = Field(None, gt=0, description="Radio-equipped vehicle cap")


class CbrPair(_Frozen):
    src: str = Field(..., min_length=1)
    dst: str = Field(..., min_length=1)
    begin: Optional[float] = None
    end: Optional[float] = None

    @model_validator(mode="after")
    def _distinct(self):
        if self.src == self.dst:
            raise ValueError("src and dst must differ")
        return self


class LoadMetric(str, Enum):
    QUEUE_LENGTH = "queue_length"
    OCCUPANCY = "occupancy"
    COUNT = "count"


def _default_load_metric() -> LoadMetric:
    # Unknown values are reported by verify_config(); fall back so imports still work.
    try:
        return LoadMetric(ADAPTIVE_LOAD_METRIC)
    except ValueError:
        return LoadMetric.QUEUE_LENGTH


class ApproachSpec(_Frozen):
    """Detectors measuring the demand served by one green phase of the template."""

    phase: int = Field(..., ge=0)
    detectors: Tuple[str, ...] = Field(..., min_length=1)


class AdaptiveConfig(_Frozen):
    tl_id: str = Field(..., min_length=1)
    control_interval: float = Field(ADAPTIVE_CONTROL_INTERVAL, gt=0)
    g_min: int = Field(ADAPTIVE_G_MIN, gt=0)
    g_max: int = Field(ADAPTIVE_G_MAX, gt=0)
    yellow: float = Field(ADAPTIVE_YELLOW, gt=0)
    cycle_green_budget: Optional[int] = Field(None, gt=0)
    load_metric: LoadMetric = Field(default_factory=_default_load_metric)
    approaches: Tuple[ApproachSpec, ...] = ()

    @model_validator(mode="after")
    def _bounds(self):
        if self.g_min > self.g_max:
            raise ValueError(f"gMin ({self.g_min}) exceeds gMax ({self.g_max})")
        return self


class ScenarioConfig(_Frozen):
    """The parsed scenario configuration document."""

    id: str = "scenario"
    base_dir: str = "."
    nodes: str
    edges: str
    connections: str
    routes: str
    detectors: Optional[str] = None
    tllogic: Optional[str] = None
    begin: float = 0.0
    end: float
    step_length: float = Field(DEFAULT_STEP_LENGTH, gt=0)
    seed: int = Field(DEFAULT_SEED, ge=0, lt=2**64)
    length_mode: LengthMode = LengthMode.STRICT
    radio: RadioConfig = RadioConfig()
    cbr_pairs: Tuple[CbrPair, ...] = ()
    adaptive: Tuple[AdaptiveConfig, ...] = ()

    @model_validator(mode="after")
    def _horizon(self):
        if self.begin >= self.end:
            raise ValueError(f"begin ({self.begin}) must be before end ({self.end})")
        return self

    @property
    def duration(self) -> float:
        return self.end - self.begin


# ============================================================
# RESULTS
# ============================================================


class ApproachLoad(_Frozen):
    approach: int = Field(..., ge=0, description="Phase index in the template program")
    load: float = Field(..., ge=0)


class NetMetrics(_Frozen):
    sent: int = Field(0, ge=0)
    received: int = Field(0, ge=0)
    pdf: float = Field(0.0, ge=0, le=1)
    avg_packets_per_s: float = Field(0.0, ge=0)
    avg_bits_per_s: float = Field(0.0, ge=0)

    @model_validator(mode="after")
    def _received_bound(self):
        if self.received > self.sent:
            raise ValueError(f"received ({self.received}) exceeds sent ({self.sent})")
        return self


class QueueStats(BaseModel):
    mean: float = 0.0
    max: int = 0
    quarter_max: List[int] = Field(default_factory=lambda: [0, 0, 0, 0])


class RunReport(BaseModel):
    """Summary of one simulation run."""

    scenario_id: str
    seed: int
    mode: str = Field(..., description="static or adaptive")
    duration: float
    inserted: int = 0
    arrived: int = 0
    total_waiting_time: float = 0.0
    queues: Dict[str, QueueStats] = Field(default_factory=dict)
    net: NetMetrics = NetMetrics()
    radio_nodes: int = 0
    outputs: Dict[str, str] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _arrivals(self):
        if self.arrived > self.inserted:
            raise ValueError(f"arrived ({self.arrived}) exceeds inserted ({self.inserted})")
        return self

    model_config = {
        "json_schema_extra": {
            "example": {
                "scenario_id": "cross",
                "seed": 42,
                "mode": "adaptive",
                "duration": 1000.0,
                "inserted": 412,
                "arrived": 371,
                "total_waiting_time": 5231.4,
                "net": {"sent": 3996, "received": 3447, "pdf": 0.8626},
            }
        }
    }


class ComparisonReport(BaseModel):
    scenario_id: str
    seed: int
    static: RunReport
    adaptive: RunReport
    waiting_time_change_percent: float
    max_queue: Dict[str, Dict[str, int]] = Field(
        default_factory=dict, description="lane -> {static, adaptive}"
    )
    arrived: Dict[str, int] = Field(default_factory=dict)


# ============================================================
# CONTROL PROTOCOL
# ============================================================


class Verb(str, Enum):
    STEP = "STEP"
    GET = "GET"
    SET = "SET"
    BYE = "BYE"


class ControlObject(str, Enum):
    SIM_TIME = "SIM_TIME"
    TL_STATE = "TL_STATE"
    TL_PROGRAM = "TL_PROGRAM"
    DETECTOR = "DETECTOR"
    VEHICLES = "VEHICLES"
    METRICS = "METRICS"


class ResponseStatus(str, Enum):
    OK = "OK"
    ERR = "ERR"


class Command(_Frozen):
    verb: Verb
    object: Optional[ControlObject] = None
    args: Tuple[str, ...] = ()


class Response(_Frozen):
    status: ResponseStatus
    payload: str = ""
    err_code: Optional[int] = None

    def render(self) -> str:
        if self.status is ResponseStatus.OK:
            return f"OK {self.payload}" if self.payload else "OK"
        return f"ERR {self.err_code} {self.payload}"


# ============================================================
# HTTP API
# ============================================================


class RunRequest(BaseModel):
    scenario_path: str = Field(..., min_length=1)
    seed: Optional[int] = Field(None, ge=0)
    mode: str = Field("auto", pattern="^(auto|static|adaptive)$")
    out_dir: Optional[str] = None
    trace: bool = False

    model_config = {
        "json_schema_extra": {
            "example": {"scenario_path": "tests/fixtures/cross.scenario.xml", "seed": 42}
        }
    }


class CompareRequest(BaseModel):
    scenario_path: str = Field(..., min_length=1)
    seed: Optional[int] = Field(None, ge=0)
    out_dir: Optional[str] = None


class ValidateRequest(BaseModel):
    scenario_path: str = Field(..., min_length=1)


class ValidationResponse(BaseModel):
    valid: bool
    scenario_id: Optional[str] = None
    link_counts: Dict[str, int] = Field(default_factory=dict)
    flows: int = 0
    detectors: int = 0
    programs: int = 0
    error: Optional[str] = None


class HealthCheckResponse(BaseModel):
    status: str = Field(..., description="healthy or degraded")
    version: str
    environment: str
    control_port: int
    config_valid: bool
    issues: List[str] = Field(default_factory=list)
