"""
Network Model Service

Parses the plain node/edge/connection files, builds an indexed, immutable
RoadNetwork from them and loads a complete scenario bundle (network, demand,
detectors, signal programs and controller configuration) with cross-file
validation.
"""

import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

from vanetsim.config import DEFAULT_SEED, LOG_LEVEL, SIM_LOG_FILE
from vanetsim.exceptions import (
    AllocationError,
    NetworkBuildError,
    SchemaError,
    ScenarioValidationError,
)
from vanetsim.logger import setup_logger
from vanetsim.schemas import (
    AdaptiveConfig,
    ApproachSpec,
    CbrPair,
    Connection,
    Detector,
    Edge,
    Flow,
    Node,
    NodeKind,
    PhaseProgram,
    RadioConfig,
    ScenarioConfig,
    VehicleDeparture,
    VehicleRoute,
    VehicleType,
    lane_id,
    split_lane_id,
)
from vanetsim.services import adaptive, mobility, signals
from vanetsim.services.xmlio import (
    build_model,
    fmt,
    parse_document,
    read_number,
    require_attr,
    split_ids,
    to_document,
)

logger = setup_logger(__name__, level=LOG_LEVEL, log_file=SIM_LOG_FILE)

_EDGE_ATTRS = {"from_node": "from", "to_node": "to", "speed_limit": "speed", "lane_count": "numLanes"}
_CONNECTION_ATTRS = {
    "from_edge": "from",
    "to_edge": "to",
    "from_lane": "fromLane",
    "to_lane": "toLane",
    "tl_id": "tl",
    "link_index": "linkIndex",
}


@dataclass(frozen=True)
class RoadNetwork:
    """
    Validated road network.

    Mappings are read-only views; lane ids follow ``<edge>_<index>``.
    """

    nodes: Mapping[str, Node]
    edges: Mapping[str, Edge]
    connections: Tuple[Connection, ...]
    link_counts: Mapping[str, int]
    outgoing: Mapping[str, Tuple[Connection, ...]]
    tl_links: Mapping[str, Tuple[Connection, ...]]

    @property
    def lane_ids(self) -> List[str]:
        return [lane_id(e.id, i) for e in self.edges.values() for i in range(e.lane_count)]

    def has_lane(self, lane: str) -> bool:
        try:
            edge_id, index = split_lane_id(lane)
        except ValueError:
            return False
        edge = self.edges.get(edge_id)
        return edge is not None and index < edge.lane_count

    def lane_length(self, lane: str) -> float:
        return self.edges[split_lane_id(lane)[0]].length

    def lane_speed_limit(self, lane: str) -> float:
        return self.edges[split_lane_id(lane)[0]].speed_limit

    def position(self, edge_id: str, pos: float) -> Tuple[float, float]:
        """Planar coordinates of a point ``pos`` meters along an edge."""
        edge = self.edges[edge_id]
        start = self.nodes[edge.from_node]
        end = self.nodes[edge.to_node]
        frac = min(max(pos / edge.length, 0.0), 1.0)
        return start.x + (end.x - start.x) * frac, start.y + (end.y - start.y) * frac


@dataclass(frozen=True)
class LanePlan:
    """Lane used on each route edge and the connection taken at each junction."""

    route_id: str
    edges: Tuple[str, ...]
    lanes: Tuple[str, ...]
    connections: Tuple[Connection, ...]


@dataclass(frozen=True)
class Scenario:
    """A fully loaded and cross-validated scenario."""

    config: ScenarioConfig
    network: RoadNetwork
    vehicle_types: Mapping[str, VehicleType]
    routes: Mapping[str, VehicleRoute]
    flows: Tuple[Flow, ...]
    vehicles: Tuple[VehicleDeparture, ...]
    detectors: Mapping[str, Detector]
    programs: Tuple[PhaseProgram, ...]
    lane_plans: Mapping[str, LanePlan]
    source: str = "scenario"
    warnings: Tuple[str, ...] = field(default_factory=tuple)

    @property
    def id(self) -> str:
        return self.config.id

    @property
    def link_counts(self) -> Mapping[str, int]:
        return self.network.link_counts

    def summary(self) -> Dict[str, object]:
        return {
            "scenario_id": self.config.id,
            "nodes": len(self.network.nodes),
            "edges": len(self.network.edges),
            "connections": len(self.network.connections),
            "link_counts": dict(self.network.link_counts),
            "routes": len(self.routes),
            "flows": len(self.flows),
            "vehicles": len(self.vehicles),
            "detectors": len(self.detectors),
            "programs": len(self.programs),
            "adaptive": [a.tl_id for a in self.config.adaptive],
        }


# ============================================================
# PLAIN FILE PARSERS
# ============================================================


def parse_nodes(text: str, source: str = "nodes") -> List[Node]:
    root = parse_document(text, source)
    nodes = []
    for element in root.iter("node"):
        node_type = element.get("type", "")
        kind = NodeKind.TRAFFIC_LIGHT if node_type.startswith("traffic_light") else NodeKind.PLAIN
        nodes.append(
            build_model(
                Node,
                "node",
                source,
                id=require_attr(element, "id", source),
                x=read_number(element, "x", source, required=True),
                y=read_number(element, "y", source, required=True),
                kind=kind,
            )
        )
    return nodes


def parse_edges(text: str, source: str = "edges") -> List[Edge]:
    root = parse_document(text, source)
    edges = []
    for element in root.iter("edge"):
        edges.append(
            build_model(
                Edge,
                "edge",
                source,
                _EDGE_ATTRS,
                default_attr="to",
                id=require_attr(element, "id", source),
                from_node=require_attr(element, "from", source),
                to_node=require_attr(element, "to", source),
                length=read_number(element, "length", source, required=True),
                speed_limit=read_number(element, "speed", source, required=True),
                lane_count=read_number(element, "numLanes", source, default=1, cast=int),
            )
        )
    return edges


def parse_connections(text: str, source: str = "connections") -> List[Connection]:
    root = parse_document(text, source)
    connections = []
    for element in root.iter("connection"):
        connections.append(
            build_model(
                Connection,
                "connection",
                source,
                _CONNECTION_ATTRS,
                from_edge=require_attr(element, "from", source),
                to_edge=require_attr(element, "to", source),
                from_lane=read_number(element, "fromLane", source, required=True, cast=int),
                to_lane=read_number(element, "toLane", source, required=True, cast=int),
                tl_id=element.get("tl"),
                link_index=read_number(element, "linkIndex", source, cast=int),
            )
        )
    return connections


def parse_plain_network(
    nodes_text: str, edges_text: str, connections_text: str
) -> Tuple[List[Node], List[Edge], List[Connection]]:
    """
    Parse the three plain network documents.

    Returns:
        Nodes, edges and connections in document order
    """
    return (
        parse_nodes(nodes_text),
        parse_edges(edges_text),
        parse_connections(connections_text),
    )


# ============================================================
# SERIALIZATION
# ============================================================


def serialize_nodes(nodes: Sequence[Node]) -> str:
    children = []
    for node in nodes:
        attrs = {"id": node.id, "x": fmt(node.x), "y": fmt(node.y)}
        if node.kind is NodeKind.TRAFFIC_LIGHT:
            attrs["type"] = "traffic_light"
        children.append(ET.Element("node", attrs))
    return to_document("nodes", children)


def serialize_edges(edges: Sequence[Edge]) -> str:
    children = [
        ET.Element(
            "edge",
            {
                "id": e.id,
                "from": e.from_node,
                "to": e.to_node,
                "length": fmt(e.length),
                "speed": fmt(e.speed_limit),
                "numLanes": str(e.lane_count),
            },
        )
        for e in edges
    ]
    return to_document("edges", children)


def serialize_connections(connections: Sequence[Connection]) -> str:
    children = []
    for c in connections:
        attrs = {
            "from": c.from_edge,
            "to": c.to_edge,
            "fromLane": str(c.from_lane),
            "toLane": str(c.to_lane),
        }
        if c.tl_id is not None:
            attrs["tl"] = c.tl_id
        if c.link_index is not None:
            attrs["linkIndex"] = str(c.link_index)
        children.append(ET.Element("connection", attrs))
    return to_document("connections", children)


# ============================================================
# NETWORK BUILDING
# ============================================================


def build_network(
    nodes: Sequence[Node], edges: Sequence[Edge], connections: Sequence[Connection]
) -> RoadNetwork:
    """
    Validate and index parsed network elements.

    Raises:
        NetworkBuildError: On duplicate ids, dangling references, lane indices out of
            range, or traffic-light link indices that are duplicated or not contiguous
    """
    node_map: Dict[str, Node] = {}
    for node in nodes:
        if node.id in node_map:
            raise NetworkBuildError(f"duplicate node id '{node.id}'")
        node_map[node.id] = node

    edge_map: Dict[str, Edge] = {}
    for edge in edges:
        if edge.id in edge_map:
            raise NetworkBuildError(f"duplicate edge id '{edge.id}'")
        for endpoint in (edge.from_node, edge.to_node):
            if endpoint not in node_map:
                raise NetworkBuildError(f"edge '{edge.id}' references unknown node '{endpoint}'")
        edge_map[edge.id] = edge

    outgoing: Dict[str, List[Connection]] = {}
    by_tl: Dict[str, List[Connection]] = {}
    for conn in connections:
        for edge_id in (conn.from_edge, conn.to_edge):
            if edge_id not in edge_map:
                raise NetworkBuildError(f"connection references unknown edge '{edge_id}'")
        src, dst = edge_map[conn.from_edge], edge_map[conn.to_edge]
        if conn.from_lane >= src.lane_count:
            raise NetworkBuildError(
                f"connection {conn.from_edge}->{conn.to_edge}: fromLane {conn.from_lane} "
                f"out of range for edge with {src.lane_count} lane(s)"
            )
        if conn.to_lane >= dst.lane_count:
            raise NetworkBuildError(
                f"connection {conn.from_edge}->{conn.to_edge}: toLane {conn.to_lane} "
                f"out of range for edge with {dst.lane_count} lane(s)"
            )
        if src.to_node != dst.from_node:
            raise NetworkBuildError(
                f"connection {conn.from_edge}->{conn.to_edge} does not meet at a node"
            )
        if conn.tl_id is not None:
            tl_node = node_map.get(conn.tl_id)
            if tl_node is None or tl_node.kind is not NodeKind.TRAFFIC_LIGHT:
                raise NetworkBuildError(
                    f"connection {conn.from_edge}->{conn.to_edge} references '{conn.tl_id}', "
                    f"which is not a traffic_light node"
                )
            if conn.tl_id != src.to_node:
                raise NetworkBuildError(
                    f"connection {conn.from_edge}->{conn.to_edge} is controlled by "
                    f"'{conn.tl_id}' but crosses node '{src.to_node}'"
                )
            if conn.link_index is None:
                raise NetworkBuildError(
                    f"connection {conn.from_edge}->{conn.to_edge} is controlled by "
                    f"'{conn.tl_id}' but has no linkIndex"
                )
            by_tl.setdefault(conn.tl_id, []).append(conn)
        outgoing.setdefault(lane_id(conn.from_edge, conn.from_lane), []).append(conn)

    link_counts: Dict[str, int] = {}
    for node in node_map.values():
        if node.kind is not NodeKind.TRAFFIC_LIGHT:
            continue
        links = by_tl.get(node.id, [])
        if not links:
            raise NetworkBuildError(f"traffic light '{node.id}' controls no connections")
        indices = [c.link_index for c in links]
        seen = set()
        for index in indices:
            if index in seen:
                raise NetworkBuildError(f"traffic light '{node.id}': duplicate linkIndex {index}")
            seen.add(index)
        gaps = sorted(set(range(max(seen) + 1)) - seen)
        if gaps:
            raise NetworkBuildError(
                f"traffic light '{node.id}': link indices are not contiguous from 0", gaps
            )
        link_counts[node.id] = len(links)
        by_tl[node.id] = sorted(links, key=lambda c: c.link_index)

    return RoadNetwork(
        nodes=MappingProxyType(node_map),
        edges=MappingProxyType(edge_map),
        connections=tuple(connections),
        link_counts=MappingProxyType(link_counts),
        outgoing=MappingProxyType({k: tuple(v) for k, v in outgoing.items()}),
        tl_links=MappingProxyType({k: tuple(v) for k, v in by_tl.items()}),
    )


def plan_route_lanes(network: RoadNetwork, route: VehicleRoute) -> LanePlan:
    """
    Fix the lane driven on every edge of a route.

    Lanes are chosen from the back of the route so that every choice can still
    reach the last edge; the lowest feasible lane and the lowest
    (toLane, linkIndex) connection win.

    Raises:
        ScenarioValidationError: If an edge is unknown or no connection joins two
            consecutive edges
    """
    edges = route.edge_sequence
    for edge_id in edges:
        if edge_id not in network.edges:
            raise ScenarioValidationError(f"route '{route.id}' references unknown edge '{edge_id}'")

    feasible: List[List[int]] = [[] for _ in edges]
    feasible[-1] = list(range(network.edges[edges[-1]].lane_count))
    for i in range(len(edges) - 2, -1, -1):
        for lane in range(network.edges[edges[i]].lane_count):
            if any(
                c.to_edge == edges[i + 1] and c.to_lane in feasible[i + 1]
                for c in network.outgoing.get(lane_id(edges[i], lane), ())
            ):
                feasible[i].append(lane)
        if not feasible[i]:
            raise ScenarioValidationError(
                f"route '{route.id}' cannot be driven: no connection from edge "
                f"'{edges[i]}' to '{edges[i + 1]}'"
            )

    lanes = [min(feasible[0])]
    taken: List[Connection] = []
    for i in range(len(edges) - 1):
        options = [
            c
            for c in network.outgoing.get(lane_id(edges[i], lanes[-1]), ())
            if c.to_edge == edges[i + 1] and c.to_lane in feasible[i + 1]
        ]
        chosen = min(options, key=lambda c: (c.to_lane, -1 if c.link_index is None else c.link_index))
        taken.append(chosen)
        lanes.append(chosen.to_lane)

    return LanePlan(
        route_id=route.id,
        edges=tuple(edges),
        lanes=tuple(lane_id(e, l) for e, l in zip(edges, lanes)),
        connections=tuple(taken),
    )


# ============================================================
# SCENARIO LOADING
# ============================================================


def _optional(element: Optional[ET.Element], name: str, source: str, default=None, cast=float):
    if element is None:
        return default
    return read_number(element, name, source, default=default, cast=cast)


def _parse_radio(element: Optional[ET.Element], source: str) -> RadioConfig:
    if element is None:
        return RadioConfig()
    values = {
        "range": read_number(element, "range", source),
        "per_hop_latency": read_number(element, "perHopLatency", source),
        "packet_size": read_number(element, "packetSize", source, cast=int),
        "cbr_rate": read_number(element, "cbrRate", source),
        "rreq_ttl": read_number(element, "rreqTtl", source, cast=int),
        "route_lifetime": read_number(element, "routeLifetime", source),
        "loss_probability": read_number(element, "lossProbability", source),
        "max_nodes": read_number(element, "maxNodes", source, cast=int),
    }
    names = {
        "per_hop_latency": "perHopLatency",
        "packet_size": "packetSize",
        "cbr_rate": "cbrRate",
        "rreq_ttl": "rreqTtl",
        "route_lifetime": "routeLifetime",
        "loss_probability": "lossProbability",
        "max_nodes": "maxNodes",
    }
    return build_model(
        RadioConfig,
        "radio",
        source,
        names,
        **{k: v for k, v in values.items() if v is not None},
    )


def _parse_pairs(element: Optional[ET.Element], source: str) -> Tuple[CbrPair, ...]:
    if element is None:
        return ()
    return tuple(
        build_model(
            CbrPair,
            "pair",
            source,
            default_attr="dst",
            src=require_attr(pair, "src", source),
            dst=require_attr(pair, "dst", source),
            begin=read_number(pair, "begin", source),
            end=read_number(pair, "end", source),
        )
        for pair in element.iter("pair")
    )


def _parse_adaptive(element: ET.Element, source: str) -> AdaptiveConfig:
    approaches = tuple(
        build_model(
            ApproachSpec,
            "approach",
            source,
            phase=read_number(a, "phase", source, required=True, cast=int),
            detectors=tuple(split_ids(require_attr(a, "detectors", source))),
        )
        for a in element.iter("approach")
    )
    values = {
        "tl_id": require_attr(element, "tl", source),
        "control_interval": read_number(element, "controlInterval", source),
        "g_min": read_number(element, "gMin", source, cast=int),
        "g_max": read_number(element, "gMax", source, cast=int),
        "yellow": read_number(element, "yellow", source),
        "cycle_green_budget": read_number(element, "budget", source, cast=int),
        "load_metric": element.get("metric"),
    }
    names = {
        "tl_id": "tl",
        "control_interval": "controlInterval",
        "g_min": "gMin",
        "g_max": "gMax",
        "cycle_green_budget": "budget",
        "load_metric": "metric",
    }
    return build_model(
        AdaptiveConfig,
        "adaptive",
        source,
        names,
        default_attr="gMin",
        approaches=approaches,
        **{k: v for k, v in values.items() if v is not None},
    )


def parse_scenario_config(
    config_text: str,
    source: str = "scenario",
    base_dir: Union[str, Path] = ".",
    *,
    seed: Optional[int] = None,
    end: Optional[float] = None,
) -> ScenarioConfig:
    """
    Parse the scenario configuration document.

    ``seed`` and ``end`` override the document's values.
    """
    root = parse_document(config_text, source)
    if root.tag != "scenario":
        raise SchemaError(root.tag, "*", "root element must be <scenario>", source)

    inputs = root.find("input")
    if inputs is None:
        raise SchemaError("scenario", "input", "missing <input> element", source)
    time = root.find("time")
    if time is None:
        raise SchemaError("scenario", "time", "missing <time> element", source)
    seed_el = root.find("seed")
    signals_el = root.find("signals")

    values = {
        "id": root.get("id", Path(source).name.split(".")[0] or "scenario"),
        "base_dir": str(base_dir),
        "nodes": require_attr(inputs, "nodes", source),
        "edges": require_attr(inputs, "edges", source),
        "connections": require_attr(inputs, "connections", source),
        "routes": require_attr(inputs, "routes", source),
        "detectors": inputs.get("detectors"),
        "tllogic": inputs.get("tllogic"),
        "begin": read_number(time, "begin", source, default=0.0),
        "end": end if end is not None else read_number(time, "end", source, required=True),
        "step_length": read_number(time, "step", source),
        "seed": seed if seed is not None else _optional(seed_el, "value", source, DEFAULT_SEED, int),
        "length_mode": signals_el.get("lengthMode") if signals_el is not None else None,
        "radio": _parse_radio(root.find("radio"), source),
        "cbr_pairs": _parse_pairs(root.find("vanet"), source),
        "adaptive": tuple(_parse_adaptive(a, source) for a in root.iter("adaptive")),
    }
    return build_model(
        ScenarioConfig,
        "time",
        source,
        {"step_length": "step", "length_mode": "lengthMode", "seed": "value"},
        default_attr="end",
        **{k: v for k, v in values.items() if v is not None},
    )


def _read_input(base_dir: Path, name: str, kind: str, source: str) -> Tuple[str, str]:
    path = base_dir / name
    try:
        return path.read_text(encoding="utf-8"), str(path)
    except OSError as exc:
        raise ScenarioValidationError(f"cannot read {kind} file '{path}': {exc.strerror}", source)


def _validate_adaptive(
    config: AdaptiveConfig,
    programs: Sequence[PhaseProgram],
    detectors: Mapping[str, Detector],
    source: str,
) -> AdaptiveConfig:
    template = next((p for p in programs if p.tl_id == config.tl_id), None)
    if template is None:
        raise ScenarioValidationError(
            f"adaptive controller for '{config.tl_id}' has no signal program to adapt", source
        )
    try:
        green = adaptive.green_phase_indices(template)
    except AllocationError as exc:
        raise ScenarioValidationError(f"adaptive controller for '{config.tl_id}': {exc}", source)

    mapped = [a.phase for a in config.approaches]
    for phase in mapped:
        if phase not in green:
            raise ScenarioValidationError(
                f"adaptive controller for '{config.tl_id}': phase {phase} is not a green phase "
                f"(green phases: {green})",
                source,
            )
    if len(set(mapped)) != len(mapped):
        raise ScenarioValidationError(
            f"adaptive controller for '{config.tl_id}': a phase is mapped twice", source
        )
    unmapped = [p for p in green if p not in mapped]
    if unmapped:
        raise ScenarioValidationError(
            f"adaptive controller for '{config.tl_id}': green phase(s) {unmapped} "
            f"have no detectors",
            source,
        )
    for approach in config.approaches:
        for det_id in approach.detectors:
            if det_id not in detectors:
                raise ScenarioValidationError(
                    f"adaptive controller for '{config.tl_id}': unknown detector '{det_id}'",
                    source,
                )

    budget = config.cycle_green_budget or adaptive.template_green_budget(template)
    n = len(green)
    if budget < n * config.g_min or budget > n * config.g_max:
        raise ScenarioValidationError(
            f"adaptive controller for '{config.tl_id}': green budget {budget} s cannot be "
            f"split into {n} phases of {config.g_min}..{config.g_max} s",
            source,
        )
    if config.control_interval < template.cycle:
        raise ScenarioValidationError(
            f"adaptive controller for '{config.tl_id}': control interval "
            f"{config.control_interval} s is shorter than the {template.cycle} s cycle",
            source,
        )
    return config.model_copy(update={"cycle_green_budget": budget})


def load_scenario(
    config_text: str,
    base_dir: Union[str, Path] = ".",
    *,
    source: str = "scenario",
    seed: Optional[int] = None,
    end: Optional[float] = None,
) -> Scenario:
    """
    Load a scenario and every file it references.

    Args:
        config_text: Scenario configuration document
        base_dir: Directory the input paths are relative to
        source: Name of the configuration for error messages
        seed: Seed override
        end: End time override

    Returns:
        The validated Scenario bundle

    Raises:
        ScenarioError: Any parse, build or cross-file validation failure
    """
    base = Path(base_dir)
    config = parse_scenario_config(config_text, source, base, seed=seed, end=end)

    nodes_text, nodes_src = _read_input(base, config.nodes, "nodes", source)
    edges_text, edges_src = _read_input(base, config.edges, "edges", source)
    conn_text, conn_src = _read_input(base, config.connections, "connections", source)
    network = build_network(
        parse_nodes(nodes_text, nodes_src),
        parse_edges(edges_text, edges_src),
        parse_connections(conn_text, conn_src),
    )

    routes_text, routes_src = _read_input(base, config.routes, "routes", source)
    demand = mobility.parse_demand(routes_text, routes_src)
    lane_plans: Dict[str, LanePlan] = {}
    for route in demand.routes.values():
        try:
            lane_plans[route.id] = plan_route_lanes(network, route)
        except ScenarioValidationError as exc:
            raise ScenarioValidationError(exc.reason, routes_src) from exc
        first_lane = lane_plans[route.id].lanes[0]
        departures = [*demand.flows, *demand.vehicles]
        longest = max(
            (demand.vehicle_types[d.vtype].length for d in departures if d.route.id == route.id),
            default=0.0,
        )
        if longest > network.lane_length(first_lane):
            raise ScenarioValidationError(
                f"route '{route.id}' starts on lane '{first_lane}', shorter than its vehicles",
                routes_src,
            )

    detectors: Dict[str, Detector] = {}
    if config.detectors:
        det_text, det_src = _read_input(base, config.detectors, "detectors", source)
        for det in signals.parse_detectors(det_text, det_src):
            if det.id in detectors:
                raise ScenarioValidationError(f"duplicate detector id '{det.id}'", det_src)
            if not network.has_lane(det.lane):
                raise ScenarioValidationError(
                    f"detector '{det.id}' references unknown lane '{det.lane}'", det_src
                )
            if det.pos > network.lane_length(det.lane):
                raise ScenarioValidationError(
                    f"detector '{det.id}' position {det.pos} exceeds lane length "
                    f"{network.lane_length(det.lane)}",
                    det_src,
                )
            detectors[det.id] = det

    programs: List[PhaseProgram] = []
    warnings: List[str] = []
    if config.tllogic:
        tl_text, tl_src = _read_input(base, config.tllogic, "tllogic", source)
        parsed = signals.parse_tl_programs(tl_text, tl_src, config.length_mode)
        programs, warnings = signals.validate_programs(
            parsed, network.link_counts, config.length_mode, tl_src
        )
    programmed = {p.tl_id for p in programs}
    for tl_id in network.link_counts:
        if tl_id not in programmed:
            raise ScenarioValidationError(f"traffic light '{tl_id}' has no signal program", source)

    adaptive_configs = []
    seen_tl = set()
    for cfg in config.adaptive:
        if cfg.tl_id in seen_tl:
            raise ScenarioValidationError(f"two adaptive controllers for '{cfg.tl_id}'", source)
        seen_tl.add(cfg.tl_id)
        adaptive_configs.append(_validate_adaptive(cfg, programs, detectors, source))
    config = config.model_copy(update={"adaptive": tuple(adaptive_configs)})

    scenario = Scenario(
        config=config,
        network=network,
        vehicle_types=MappingProxyType(dict(demand.vehicle_types)),
        routes=MappingProxyType(dict(demand.routes)),
        flows=tuple(demand.flows),
        vehicles=tuple(demand.vehicles),
        detectors=MappingProxyType(detectors),
        programs=tuple(programs),
        lane_plans=MappingProxyType(lane_plans),
        source=source,
        warnings=tuple(warnings),
    )
    logger.info(
        f"Loaded scenario '{config.id}': {len(network.edges)} edges, "
        f"{len(network.link_counts)} light(s), {len(scenario.flows)} flow(s), "
        f"{len(detectors)} detector(s), horizon {config.begin}-{config.end} s"
    )
    return scenario


def load_scenario_file(
    path: Union[str, Path], *, seed: Optional[int] = None, end: Optional[float] = None
) -> Scenario:
    """
    Load a scenario from a configuration file; inputs resolve against its directory.

    Raises:
        ScenarioValidationError: If the file cannot be read
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioValidationError(f"cannot read scenario file: {exc.strerror}", str(path))
    return load_scenario(text, path.parent, source=str(path), seed=seed, end=end)
