"""
V2V Network Service

Unit-disk connectivity over vehicle positions, an AODV subset (RREQ flood,
RREP along the reverse path, RERR to precursors, sequence numbers and route
lifetimes), constant-bit-rate traffic and packet delivery metrics.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Set, Tuple

import numpy as np

from vanetsim.config import LOG_LEVEL, VANET_LOG_FILE
from vanetsim.exceptions import MetricsError
from vanetsim.logger import setup_logger
from vanetsim.schemas import CbrPair, NetMetrics, RadioConfig

logger = setup_logger(__name__, level=LOG_LEVEL, log_file=VANET_LOG_FILE)

_EPS = 1e-9
MAX_REDISCOVERIES = 1

Adjacency = Dict[str, List[str]]


class NetEventKind(str, Enum):
    SENT = "SENT"
    FORWARDED = "FORWARDED"
    DELIVERED = "DELIVERED"
    DROPPED = "DROPPED"
    RREQ = "RREQ"
    RREP = "RREP"
    RERR = "RERR"


@dataclass(frozen=True)
class NetEvent:
    t: float
    event: NetEventKind
    packet_src: str
    packet_seq: int
    node: str
    detail: str = ""


@dataclass
class Packet:
    src: str
    seq: int
    dst: str
    size: int
    created_at: float
    holder: str
    ready_at: float
    hops: int = 0
    routed: bool = False
    rediscoveries: int = 0
    delivered_at: Optional[float] = None
    dropped: bool = False

    @property
    def id(self) -> Tuple[str, int]:
        return self.src, self.seq

    @property
    def done(self) -> bool:
        return self.dropped or self.delivered_at is not None


@dataclass
class RouteEntry:
    destination: str
    next_hop: str
    hop_count: int
    dest_sequence_number: int
    expires_at: float
    valid: bool = True
    precursors: Set[str] = field(default_factory=set)


@dataclass
class AodvState:
    """Per-node route tables, sequence numbers and RREQ ids."""

    tables: Dict[str, Dict[str, RouteEntry]] = field(default_factory=dict)
    seqno: Dict[str, int] = field(default_factory=dict)
    rreq_id: Dict[str, int] = field(default_factory=dict)

    def table(self, node: str) -> Dict[str, RouteEntry]:
        return self.tables.setdefault(node, {})

    def route(self, node: str, dst: str) -> Optional[RouteEntry]:
        return self.tables.get(node, {}).get(dst)

    def usable_route(self, node: str, dst: str, clock: float, graph: Adjacency) -> Optional[RouteEntry]:
        entry = self.route(node, dst)
        if entry is None or not entry.valid or entry.expires_at <= clock:
            return None
        if entry.next_hop not in graph.get(node, ()):
            return None
        return entry

    def forget(self, node: str) -> None:
        self.tables.pop(node, None)


# ============================================================
# CONNECTIVITY
# ============================================================


def connectivity_graph(positions: Mapping[str, Tuple[float, float]], radio_range: float) -> Adjacency:
    """
    Unit-disk graph: two nodes are neighbors iff their distance is at most ``radio_range``.

    Every node is a key; neighbor lists are sorted.
    """
    ids = list(positions)
    adjacency: Adjacency = {node: [] for node in ids}
    if len(ids) < 2:
        return adjacency
    coords = np.asarray([positions[node] for node in ids], dtype=float)
    diff = coords[:, None, :] - coords[None, :, :]
    within = np.einsum("ijk,ijk->ij", diff, diff) <= radio_range * radio_range
    np.fill_diagonal(within, False)
    for a, b in zip(*np.nonzero(within)):
        adjacency[ids[a]].append(ids[b])
    for neighbors in adjacency.values():
        neighbors.sort()
    return adjacency


# ============================================================
# AODV
# ============================================================


def _install(
    aodv: AodvState, node: str, dst: str, next_hop: str, hops: int, seq: int, expires_at: float
) -> RouteEntry:
    table = aodv.table(node)
    entry = table.get(dst)
    if (
        entry is None
        or not entry.valid
        or seq > entry.dest_sequence_number
        or (seq == entry.dest_sequence_number and hops < entry.hop_count)
    ):
        precursors = entry.precursors if entry is not None else set()
        entry = RouteEntry(dst, next_hop, hops, seq, expires_at, True, precursors)
        table[dst] = entry
    else:
        entry.expires_at = max(entry.expires_at, expires_at)
    return entry


def aodv_discover(
    src: str,
    dst: str,
    graph: Adjacency,
    aodv: AodvState,
    clock: float,
    config: RadioConfig,
    packet: Optional[Packet] = None,
) -> List[NetEvent]:
    """
    Discover a route from ``src`` to ``dst`` on the current topology.

    The RREQ floods breadth first up to ``rreq_ttl`` hops; each node keeps the
    first copy it hears, from its lexicographically smallest upstream neighbor.
    The destination, or the first node holding a fresh route to it, answers
    with an RREP that installs forward and reverse routes along the path.

    Returns:
        RREQ and RREP events; a failed discovery ends with an RREQ event whose
        detail starts with ``no_route`` and leaves the route tables untouched
    """
    if src == dst:
        raise ValueError("source and destination must differ")
    p_src, p_seq = packet.id if packet is not None else (src, -1)
    aodv.seqno[src] = aodv.seqno.get(src, 0) + 1
    aodv.rreq_id[src] = aodv.rreq_id.get(src, 0) + 1
    rid = aodv.rreq_id[src]
    events = [NetEvent(clock, NetEventKind.RREQ, p_src, p_seq, src, f"dst={dst};id={rid}")]

    known = aodv.route(src, dst)
    known_seq = known.dest_sequence_number if known is not None else 0

    parent: Dict[str, Optional[str]] = {src: None}
    frontier = [src]
    replier: Optional[str] = None
    level = 0
    while frontier and replier is None and level < config.rreq_ttl:
        level += 1
        frontier_set = set(frontier)
        reached = sorted({nb for node in frontier for nb in graph.get(node, ()) if nb not in parent})
        for node in reached:
            parent[node] = min(nb for nb in graph[node] if nb in frontier_set)
        candidates = []
        for node in reached:
            if node == dst:
                candidates.insert(0, node)
            else:
                entry = aodv.usable_route(node, dst, clock, graph)
                if entry is not None and entry.dest_sequence_number >= known_seq:
                    candidates.append(node)
        if candidates:
            replier = candidates[0]
        frontier = reached

    if replier is None:
        events.append(NetEvent(clock, NetEventKind.RREQ, p_src, p_seq, src, f"no_route dst={dst}"))
        logger.debug(f"t={clock:.3f} discovery {src}->{dst} failed")
        return events

    path = [replier]
    while parent[path[-1]] is not None:
        path.append(parent[path[-1]])
    path.reverse()

    if replier == dst:
        aodv.seqno[dst] = aodv.seqno.get(dst, 0) + 1
        dst_seq = aodv.seqno[dst]
        tail = 0
    else:
        entry = aodv.route(replier, dst)
        dst_seq = entry.dest_sequence_number
        tail = entry.hop_count
        entry.precursors.add(path[-2])

    expires_at = clock + config.route_lifetime
    src_seq = aodv.seqno[src]
    last = len(path) - 1
    for k, node in enumerate(path):
        if k > 0:
            reverse = _install(aodv, node, src, path[k - 1], k, src_seq, expires_at)
            if k < last:
                reverse.precursors.add(path[k + 1])
        if k < last:
            forward = _install(aodv, node, dst, path[k + 1], last - k + tail, dst_seq, expires_at)
            if k > 0:
                forward.precursors.add(path[k - 1])

    events.append(
        NetEvent(clock, NetEventKind.RREP, p_src, p_seq, replier, f"dst={dst};hops={last + tail}")
    )
    return events


def _invalidate(
    aodv: AodvState, node: str, dst: str, clock: float, p_src: str = "", p_seq: int = -1
) -> List[NetEvent]:
    """Invalidate a route and propagate RERR through precursors that route via the sender."""
    events = []
    stack = [(node, dst)]
    while stack:
        owner, dest = stack.pop()
        entry = aodv.route(owner, dest)
        if entry is None or not entry.valid:
            continue
        entry.valid = False
        entry.dest_sequence_number += 1
        events.append(NetEvent(clock, NetEventKind.RERR, p_src, p_seq, owner, f"dst={dest}"))
        for precursor in sorted(entry.precursors, reverse=True):
            upstream = aodv.route(precursor, dest)
            if upstream is not None and upstream.valid and upstream.next_hop == owner:
                stack.append((precursor, dest))
    return events


def maintain_routes(aodv: AodvState, graph: Adjacency, clock: float) -> List[NetEvent]:
    """Expire stale routes and invalidate those whose next hop is out of range."""
    events = []
    for node in sorted(aodv.tables):
        for dst in sorted(aodv.tables[node]):
            entry = aodv.tables[node][dst]
            if not entry.valid:
                continue
            if entry.expires_at <= clock:
                entry.valid = False
            elif entry.next_hop not in graph.get(node, ()):
                events.extend(_invalidate(aodv, node, dst, clock))
    return events


# ============================================================
# NETWORK LAYER
# ============================================================


@dataclass
class VanetState:
    """Network layer state for one run; stepped with the traffic simulation."""

    config: RadioConfig
    begin: float
    end: float
    rng: np.random.Generator
    pairs: Tuple[CbrPair, ...] = ()
    aodv: AodvState = field(default_factory=AodvState)
    equipped: List[str] = field(default_factory=list)
    in_flight: List[Packet] = field(default_factory=list)
    events: List[NetEvent] = field(default_factory=list)
    sent: int = 0
    received: int = 0
    delivered_bits: int = 0
    next_slot: int = 0
    seq: Dict[str, int] = field(default_factory=dict)

    def equip(self, vehicle_id: str, order: int) -> bool:
        """Fit a newly inserted vehicle with a radio unless the node cap is reached."""
        if self.config.max_nodes is not None and order >= self.config.max_nodes:
            return False
        self.equipped.append(vehicle_id)
        return True

    @property
    def radio_nodes(self) -> int:
        return len(self.equipped)

    def metrics(self) -> NetMetrics:
        return compute_metrics(self.events, self.end - self.begin)


def _cbr_flows(vs: VanetState, t: float, present: Sequence[str]) -> List[Tuple[str, str]]:
    if vs.pairs:
        flows = []
        for pair in vs.pairs:
            begin = vs.begin if pair.begin is None else pair.begin
            end = vs.end if pair.end is None else pair.end
            if begin - _EPS <= t < end and pair.src in present:
                flows.append((pair.src, pair.dst))
        return flows
    if len(present) < 2:
        return []
    return [(present[0], present[-1])]


def _emit(vs: VanetState, positions: Mapping[str, Tuple[float, float]], clock: float) -> List[NetEvent]:
    events = []
    interval = 1.0 / vs.config.cbr_rate
    present = [node for node in vs.equipped if node in positions]
    while True:
        t_slot = vs.begin + vs.next_slot * interval
        if t_slot > clock + _EPS or t_slot >= vs.end - _EPS:
            break
        vs.next_slot += 1
        for src, dst in _cbr_flows(vs, t_slot, present):
            seq = vs.seq.get(src, 0)
            vs.seq[src] = seq + 1
            packet = Packet(src, seq, dst, vs.config.packet_size, t_slot, src, t_slot)
            vs.in_flight.append(packet)
            vs.sent += 1
            events.append(NetEvent(t_slot, NetEventKind.SENT, src, seq, src, f"dst={dst}"))
    return events


def _drop(packet: Packet, t: float, node: str, reason: str) -> NetEvent:
    packet.dropped = True
    return NetEvent(t, NetEventKind.DROPPED, packet.src, packet.seq, node, reason)


def _forward(vs: VanetState, packet: Packet, graph: Adjacency, clock: float) -> List[NetEvent]:
    events: List[NetEvent] = []
    latency = vs.config.per_hop_latency
    while not packet.done and packet.ready_at + latency <= clock + _EPS:
        holder = packet.holder
        t_hop = packet.ready_at
        route = vs.aodv.usable_route(holder, packet.dst, clock, graph)
        if route is None:
            # A packet that has travelled on a route gets one rediscovery after it breaks.
            if packet.routed:
                if packet.rediscoveries >= MAX_REDISCOVERIES:
                    events.append(_drop(packet, t_hop, holder, "route_lost"))
                    break
                packet.rediscoveries += 1
            found = aodv_discover(holder, packet.dst, graph, vs.aodv, clock, vs.config, packet)
            events.extend(found)
            route = vs.aodv.usable_route(holder, packet.dst, clock, graph)
            if route is None:
                events.append(_drop(packet, t_hop, holder, "route_lost" if packet.routed else "no_route"))
                break
        packet.routed = True
        if vs.config.loss_probability > 0 and vs.rng.random() < vs.config.loss_probability:
            events.append(_drop(packet, t_hop + latency, route.next_hop, "lost"))
            break
        route.expires_at = max(route.expires_at, clock + vs.config.route_lifetime)
        packet.holder = route.next_hop
        packet.hops += 1
        packet.ready_at = t_hop + latency
        if packet.holder == packet.dst:
            packet.delivered_at = packet.ready_at
            vs.received += 1
            vs.delivered_bits += packet.size
            events.append(
                NetEvent(
                    packet.ready_at,
                    NetEventKind.DELIVERED,
                    packet.src,
                    packet.seq,
                    packet.dst,
                    f"hops={packet.hops};bits={packet.size}",
                )
            )
        else:
            events.append(
                NetEvent(packet.ready_at, NetEventKind.FORWARDED, packet.src, packet.seq, packet.holder)
            )
    return events


def network_step(
    vs: VanetState,
    positions: Mapping[str, Tuple[float, float]],
    clock: float,
    graph: Optional[Adjacency] = None,
) -> List[NetEvent]:
    """
    Advance the network layer to ``clock``.

    Departed nodes are removed, stale and broken routes are handled, due CBR
    packets are emitted and every queued packet advances one hop per
    per-hop latency that has elapsed.

    Args:
        vs: Network layer state, updated in place
        positions: Current coordinates of radio-equipped vehicles
        clock: Simulation time after the traffic step
        graph: Precomputed connectivity for ``positions``

    Returns:
        Events produced during this step (also appended to ``vs.events``)
    """
    events: List[NetEvent] = []
    for node in [n for n in vs.aodv.tables if n not in positions]:
        vs.aodv.forget(node)
    for packet in vs.in_flight:
        if not packet.done and packet.holder not in positions:
            events.append(_drop(packet, clock, packet.holder, "node_left"))

    if graph is None:
        graph = connectivity_graph(positions, vs.config.range)
    events.extend(maintain_routes(vs.aodv, graph, clock))
    events.extend(_emit(vs, positions, clock))
    for packet in vs.in_flight:
        if not packet.done:
            events.extend(_forward(vs, packet, graph, clock))
    vs.in_flight = [p for p in vs.in_flight if not p.done]
    vs.events.extend(events)
    return events


def _bits(detail: str) -> int:
    for part in detail.split(";"):
        key, _, value = part.partition("=")
        if key == "bits":
            return int(value)
    return 0


def compute_metrics(events: Iterable[NetEvent], duration: float) -> NetMetrics:
    """
    Delivery metrics from an event log.

    Raises:
        MetricsError: If duration is not positive
    """
    if duration <= 0:
        raise MetricsError(f"duration must be positive, got {duration}")
    sent = received = bits = 0
    for event in events:
        if event.event is NetEventKind.SENT:
            sent += 1
        elif event.event is NetEventKind.DELIVERED:
            received += 1
            bits += _bits(event.detail)
    return NetMetrics(
        sent=sent,
        received=received,
        pdf=received / sent if sent else 0.0,
        avg_packets_per_s=received / duration,
        avg_bits_per_s=bits / duration,
    )
