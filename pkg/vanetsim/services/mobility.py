"""
Mobility Service

Vehicle demand (vehicle types, routes, flows and explicit vehicles),
deferred insertion and the fixed-step Krauss car-following update that
honours signal permissions at stop lines.
"""

from collections import deque
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Deque, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from vanetsim.config import LOG_LEVEL, SIM_LOG_FILE, WAITING_SPEED
from vanetsim.exceptions import SchemaError
from vanetsim.logger import setup_logger
from vanetsim.schemas import (
    DEFAULT_VEHICLE_TYPE,
    Detector,
    Flow,
    VehicleDeparture,
    VehicleRoute,
    VehicleType,
)
from vanetsim.services.xmlio import build_model, parse_document, read_number, require_attr, split_ids

if TYPE_CHECKING:
    from vanetsim.services.netmodel import LanePlan, RoadNetwork

logger = setup_logger(__name__, level=LOG_LEVEL, log_file=SIM_LOG_FILE)

_EPS = 1e-9

_VTYPE_ATTRS = {"min_gap": "minGap", "max_speed": "maxSpeed"}
_FLOW_ATTRS = {
    "vehicles_per_hour": "vehsPerHour",
    "depart_speed": "departSpeed",
    "vtype": "type",
}


# ============================================================
# DEMAND PARSING
# ============================================================


@dataclass(frozen=True)
class Demand:
    vehicle_types: Dict[str, VehicleType]
    routes: Dict[str, VehicleRoute]
    flows: List[Flow]
    vehicles: List[VehicleDeparture]


def _lookup_route(element, routes: Mapping[str, VehicleRoute], source: str) -> VehicleRoute:
    route_id = require_attr(element, "route", source)
    if route_id not in routes:
        raise SchemaError(element.tag, "route", f"unknown route '{route_id}'", source)
    return routes[route_id]


def _lookup_type(element, vtypes: Mapping[str, VehicleType], source: str) -> str:
    type_id = element.get("type", DEFAULT_VEHICLE_TYPE.id)
    if type_id not in vtypes:
        raise SchemaError(element.tag, "type", f"unknown vehicle type '{type_id}'", source)
    return type_id


def parse_demand(text: str, source: str = "routes") -> Demand:
    """
    Parse a routes document: vType, route, flow and vehicle elements.

    Raises:
        XMLParseError: Malformed document
        SchemaError: Missing or invalid attributes, empty routes, unknown route or
            type references, duplicate ids
    """
    root = parse_document(text, source)

    vtypes: Dict[str, VehicleType] = {DEFAULT_VEHICLE_TYPE.id: DEFAULT_VEHICLE_TYPE}
    for element in root.iter("vType"):
        type_id = require_attr(element, "id", source)
        values = {
            "accel": read_number(element, "accel", source),
            "decel": read_number(element, "decel", source),
            "tau": read_number(element, "tau", source),
            "sigma": read_number(element, "sigma", source),
            "length": read_number(element, "length", source),
            "min_gap": read_number(element, "minGap", source),
            "max_speed": read_number(element, "maxSpeed", source),
        }
        vtypes[type_id] = build_model(
            VehicleType,
            "vType",
            source,
            _VTYPE_ATTRS,
            id=type_id,
            **{k: v for k, v in values.items() if v is not None},
        )

    routes: Dict[str, VehicleRoute] = {}
    for element in root.iter("route"):
        route_id = require_attr(element, "id", source)
        if route_id in routes:
            raise SchemaError("route", "id", f"duplicate route id '{route_id}'", source)
        edges = split_ids(require_attr(element, "edges", source))
        if not edges:
            raise SchemaError("route", "edges", f"route '{route_id}' has no edges", source)
        routes[route_id] = VehicleRoute(id=route_id, edge_sequence=tuple(edges))

    ids = set()
    flows: List[Flow] = []
    for element in root.iter("flow"):
        flow_id = require_attr(element, "id", source)
        if flow_id in ids:
            raise SchemaError("flow", "id", f"duplicate id '{flow_id}'", source)
        ids.add(flow_id)
        rate = read_number(element, "vehsPerHour", source)
        period = read_number(element, "period", source)
        if rate is None and period is not None:
            if period <= 0:
                raise SchemaError("flow", "period", "must be positive", source)
            rate = 3600.0 / period
        flows.append(
            build_model(
                Flow,
                "flow",
                source,
                _FLOW_ATTRS,
                default_attr="vehsPerHour",
                id=flow_id,
                route=_lookup_route(element, routes, source),
                begin=read_number(element, "begin", source, default=0.0),
                end=read_number(element, "end", source, required=True),
                vehicles_per_hour=rate,
                probability=read_number(element, "probability", source),
                vtype=_lookup_type(element, vtypes, source),
                depart_speed=read_number(element, "departSpeed", source, default=0.0),
            )
        )

    vehicles: List[VehicleDeparture] = []
    for element in root.iter("vehicle"):
        vehicle_id = require_attr(element, "id", source)
        if vehicle_id in ids:
            raise SchemaError("vehicle", "id", f"duplicate id '{vehicle_id}'", source)
        ids.add(vehicle_id)
        vehicles.append(
            build_model(
                VehicleDeparture,
                "vehicle",
                source,
                _FLOW_ATTRS,
                id=vehicle_id,
                route=_lookup_route(element, routes, source),
                depart=read_number(element, "depart", source, required=True),
                vtype=_lookup_type(element, vtypes, source),
                depart_speed=read_number(element, "departSpeed", source, default=0.0),
            )
        )
    vehicles.sort(key=lambda v: v.depart)

    return Demand(vehicle_types=vtypes, routes=routes, flows=flows, vehicles=vehicles)


def parse_routes(text: str, source: str = "routes") -> Tuple[List[VehicleRoute], List[Flow]]:
    """Parse a routes document and return its routes and flows."""
    demand = parse_demand(text, source)
    return list(demand.routes.values()), demand.flows


# ============================================================
# SIMULATION STATE
# ============================================================


@dataclass(eq=False)
class Vehicle:
    id: str
    plan: "LanePlan"
    vtype: VehicleType
    lane: str
    pos: float
    speed: float
    route_pos: int = 0
    accumulated_wait: float = 0.0
    depart: float = 0.0
    order: int = 0

    @property
    def edge(self) -> str:
        return self.plan.edges[self.route_pos]

    @property
    def length(self) -> float:
        return self.vtype.length

    @property
    def on_last_edge(self) -> bool:
        return self.route_pos == len(self.plan.edges) - 1


def spawn_streams(seed: int) -> Tuple[np.random.Generator, ...]:
    """Independent demand, dynamics and radio generators derived from one seed."""
    children = np.random.SeedSequence(seed).spawn(3)
    return tuple(np.random.default_rng(child) for child in children)


@dataclass(eq=False)
class SimState:
    """Mutable traffic state of one run; owned by a single simulation loop."""

    network: "RoadNetwork"
    lane_plans: Mapping[str, "LanePlan"]
    vehicle_types: Mapping[str, VehicleType]
    begin: float
    step_length: float
    seed: int
    clock: float = 0.0
    step_index: int = 0
    inserted: int = 0
    arrived: int = 0
    arrived_wait: float = 0.0
    vehicles: Dict[str, Vehicle] = field(default_factory=dict)
    lanes: Dict[str, List[Vehicle]] = field(default_factory=dict)
    pending: Dict[str, Deque[VehicleDeparture]] = field(default_factory=dict)
    emitted: Dict[str, int] = field(default_factory=dict)
    released: int = 0
    insertions: List[Tuple[float, str]] = field(default_factory=list)
    crossings: Dict[str, Deque[Tuple[float, str, float]]] = field(default_factory=dict)
    lane_detectors: Dict[str, List[Detector]] = field(default_factory=dict)
    lane_order: List[str] = field(init=False, repr=False)
    demand_rng: np.random.Generator = field(init=False, repr=False)
    dynamics_rng: np.random.Generator = field(init=False, repr=False)
    radio_rng: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        self.clock = self.begin
        self.lane_order = self.network.lane_ids
        for lane in self.lane_order:
            self.lanes.setdefault(lane, [])
        self.demand_rng, self.dynamics_rng, self.radio_rng = spawn_streams(self.seed)

    def add_detectors(self, detectors: Iterable[Detector]) -> None:
        for det in detectors:
            self.lane_detectors.setdefault(det.lane, []).append(det)
            self.crossings.setdefault(det.id, deque())

    def record_crossing(self, detector: Detector, t: float, vehicle_id: str, speed: float) -> None:
        log = self.crossings.setdefault(detector.id, deque())
        log.append((t, vehicle_id, speed))
        while log and log[0][0] <= t - detector.window:
            log.popleft()

    @property
    def active(self) -> int:
        return len(self.vehicles)

    @property
    def pending_count(self) -> int:
        return sum(len(q) for q in self.pending.values())


def total_waiting_time(state: SimState) -> float:
    return state.arrived_wait + sum(v.accumulated_wait for v in state.vehicles.values())


# ============================================================
# DEMAND AND INSERTION
# ============================================================


def spawn_from_flows(
    flows: Sequence[Flow],
    clock: float,
    rng: np.random.Generator,
    emitted: Optional[Dict[str, int]] = None,
    dt: float = 1.0,
) -> List[VehicleDeparture]:
    """
    Departures due by ``clock``.

    Vehicle ``i`` of a rate flow departs at ``begin + i * period``; a
    probability flow emits one vehicle per call with probability ``p * dt``.
    ``emitted`` carries per-flow counters between calls.
    """
    emitted = {} if emitted is None else emitted
    departures: List[VehicleDeparture] = []
    for flow in flows:
        index = emitted.get(flow.id, 0)
        if flow.period is not None:
            while True:
                depart = flow.begin + index * flow.period
                if depart >= flow.end - _EPS or depart > clock + _EPS:
                    break
                departures.append(
                    VehicleDeparture(
                        id=f"{flow.id}.{index}",
                        route=flow.route,
                        depart=depart,
                        vtype=flow.vtype,
                        depart_speed=flow.depart_speed,
                    )
                )
                index += 1
        elif flow.begin - _EPS <= clock < flow.end and rng.random() < flow.probability * dt:
            departures.append(
                VehicleDeparture(
                    id=f"{flow.id}.{index}",
                    route=flow.route,
                    depart=clock,
                    vtype=flow.vtype,
                    depart_speed=flow.depart_speed,
                )
            )
            index += 1
        emitted[flow.id] = index
    departures.sort(key=lambda d: d.depart)
    return departures


def queue_departures(state: SimState, departures: Iterable[VehicleDeparture]) -> None:
    for dep in departures:
        lane = state.lane_plans[dep.route.id].lanes[0]
        state.pending.setdefault(lane, deque()).append(dep)


def release_vehicles(state: SimState, vehicles: Sequence[VehicleDeparture]) -> List[VehicleDeparture]:
    """Explicit vehicles (sorted by depart) due by the current clock."""
    due = []
    while state.released < len(vehicles) and vehicles[state.released].depart <= state.clock + _EPS:
        due.append(vehicles[state.released])
        state.released += 1
    return due


def insert_pending(state: SimState) -> List[Vehicle]:
    """
    Insert waiting departures, first come first served per entry lane.

    A departure waits while the back of the last vehicle on its entry lane is
    closer to the lane start than its own length plus minimum gap.
    """
    inserted = []
    for lane, queue in state.pending.items():
        occupants = state.lanes[lane]
        limit = state.network.lane_speed_limit(lane)
        while queue:
            dep = queue[0]
            vtype = state.vehicle_types[dep.vtype]
            if occupants:
                last = occupants[-1]
                if last.pos - last.length < vtype.length + vtype.min_gap:
                    break
            queue.popleft()
            vehicle = Vehicle(
                id=dep.id,
                plan=state.lane_plans[dep.route.id],
                vtype=vtype,
                lane=lane,
                pos=vtype.length,
                speed=min(dep.depart_speed, vtype.max_speed, limit),
                depart=state.clock,
                order=state.inserted,
            )
            occupants.append(vehicle)
            state.vehicles[vehicle.id] = vehicle
            state.inserted += 1
            state.insertions.append((state.clock, vehicle.id))
            inserted.append(vehicle)
    return inserted


# ============================================================
# DYNAMICS
# ============================================================


def safe_speed(v: float, v_leader: float, gap: float, b: float, tau: float) -> float:
    """Krauss safe speed: the fastest speed that can still avoid the leader."""
    v_safe = v_leader + (gap - v_leader * tau) / (tau + (v + v_leader) / (2.0 * b))
    return max(v_safe, 0.0)


def must_stop(char: str, speed: float, distance: float, decel: float) -> bool:
    """Whether a vehicle must hold at a stop line showing ``char``."""
    if char in "Gg":
        return False
    if char == "y":
        return distance >= speed * speed / (2.0 * decel)
    return True


def _record_span(state: SimState, vehicle: Vehicle, lane: str, start: float, end: float, t: float) -> None:
    for det in state.lane_detectors.get(lane, ()):
        if start < det.pos <= end:
            state.record_crossing(det, t, vehicle.id, vehicle.speed)


def _advance(
    state: SimState,
    vehicle: Vehicle,
    leader: Optional[Vehicle],
    signal_states: Mapping[str, str],
    dt: float,
    t_next: float,
) -> bool:
    network = state.network
    lane_len = network.lane_length(vehicle.lane)
    vtype = vehicle.vtype
    v = vehicle.speed

    gap: Optional[float] = None
    v_leader = 0.0
    if leader is not None:
        gap = leader.pos - leader.length - vehicle.pos - vtype.min_gap
        v_leader = leader.speed
    elif not vehicle.on_last_edge:
        to_end = lane_len - vehicle.pos
        conn = vehicle.plan.connections[vehicle.route_pos]
        if conn.tl_id is not None and must_stop(
            signal_states[conn.tl_id][conn.link_index], v, to_end, vtype.decel
        ):
            gap = to_end
        else:
            ahead = state.lanes[vehicle.plan.lanes[vehicle.route_pos + 1]]
            if ahead:
                back = ahead[-1]
                gap = to_end + back.pos - back.length - vtype.min_gap
                v_leader = back.speed

    v_new = min(v + vtype.accel * dt, vtype.max_speed, network.lane_speed_limit(vehicle.lane))
    if gap is not None:
        gap = max(gap, 0.0)
        v_new = min(v_new, safe_speed(v, v_leader, gap, vtype.decel, vtype.tau))
    if vtype.sigma > 0:
        v_new -= vtype.sigma * vtype.accel * dt * state.dynamics_rng.random()
    v_new = max(v_new, 0.0)
    if gap is not None:
        v_new = min(v_new, gap / dt)

    vehicle.speed = v_new
    if v_new < WAITING_SPEED:
        vehicle.accumulated_wait += dt
    old_pos = vehicle.pos
    new_pos = old_pos + v_new * dt

    if vehicle.on_last_edge:
        _record_span(state, vehicle, vehicle.lane, old_pos, min(new_pos, lane_len), t_next)
        if new_pos >= lane_len:
            state.arrived += 1
            state.arrived_wait += vehicle.accumulated_wait
            del state.vehicles[vehicle.id]
            return False
        vehicle.pos = new_pos
        return True

    if new_pos <= lane_len:
        _record_span(state, vehicle, vehicle.lane, old_pos, new_pos, t_next)
        vehicle.pos = new_pos
        return True

    _record_span(state, vehicle, vehicle.lane, old_pos, lane_len, t_next)
    vehicle.route_pos += 1
    vehicle.lane = vehicle.plan.lanes[vehicle.route_pos]
    vehicle.pos = min(new_pos - lane_len, network.lane_length(vehicle.lane))
    vehicle.speed = min(vehicle.speed, network.lane_speed_limit(vehicle.lane))
    _record_span(state, vehicle, vehicle.lane, -1.0, vehicle.pos, t_next)
    state.lanes[vehicle.lane].append(vehicle)
    return False


def step_vehicles(state: SimState, signal_states: Mapping[str, str], dt: float) -> SimState:
    """
    Advance every active vehicle by one step and move the clock forward.

    Lanes are processed in network order and vehicles front to back; each
    vehicle follows the already updated vehicle ahead of it, the stop line
    when its link may not be entered, or the last vehicle on its next lane.

    Args:
        state: Simulation state, updated in place
        signal_states: Current state string of every traffic light
        dt: Step length in seconds
    """
    t_next = state.begin + (state.step_index + 1) * dt
    moved = set()
    for lane in state.lane_order:
        queue = state.lanes[lane]
        if not queue:
            continue
        kept: List[Vehicle] = []
        leader: Optional[Vehicle] = None
        for vehicle in list(queue):
            if vehicle.id not in moved:
                moved.add(vehicle.id)
                if not _advance(state, vehicle, leader, signal_states, dt, t_next):
                    continue
            kept.append(vehicle)
            leader = vehicle
        state.lanes[lane] = kept
    state.step_index += 1
    state.clock = t_next
    return state


def trace_rows(state: SimState) -> List[Tuple[float, str, str, str, float, float]]:
    """Rows ``(t, vehicle_id, edge, lane, pos, speed)`` for every active vehicle."""
    return [(state.clock, v.id, v.edge, v.lane, v.pos, v.speed) for v in state.vehicles.values()]
