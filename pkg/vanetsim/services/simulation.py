"""
Co-Simulation Service

Couples the traffic step, the signal controller, the adaptive road-side
controllers and the V2V layer into one fixed-step loop over a loaded
scenario. The control server and the runner both drive this loop.
"""

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from vanetsim.config import LOG_LEVEL, SIM_LOG_FILE
from vanetsim.exceptions import ScenarioValidationError
from vanetsim.logger import setup_logger, sim_logger
from vanetsim.schemas import AdaptiveConfig, NetMetrics, QueueStats
from vanetsim.services.adaptive import AdaptiveController, controller_tick
from vanetsim.services.mobility import (
    SimState,
    insert_pending,
    queue_departures,
    release_vehicles,
    spawn_from_flows,
    step_vehicles,
    total_waiting_time,
    trace_rows,
)
from vanetsim.services.netmodel import Scenario
from vanetsim.services.signals import SignalController, queue_length
from vanetsim.services.vanet import VanetState, compute_metrics, network_step

logger = setup_logger(__name__, level=LOG_LEVEL, log_file=SIM_LOG_FILE)

MODES = ("auto", "static", "adaptive")

TraceSink = Callable[[Sequence[Tuple[float, str, str, str, float, float]]], None]


@dataclass
class _QueueTrack:
    samples: int = 0
    total: int = 0
    max: int = 0
    quarter_max: List[int] = field(default_factory=lambda: [0, 0, 0, 0])

    def add(self, value: int, quarter: int) -> None:
        self.samples += 1
        self.total += value
        self.max = max(self.max, value)
        self.quarter_max[quarter] = max(self.quarter_max[quarter], value)

    def stats(self) -> QueueStats:
        mean = self.total / self.samples if self.samples else 0.0
        return QueueStats(mean=mean, max=self.max, quarter_max=list(self.quarter_max))


def approach_lanes(scenario: Scenario) -> List[str]:
    """Lanes entering a traffic light, or detector lanes when there are no lights."""
    lanes: List[str] = []
    for links in scenario.network.tl_links.values():
        for conn in links:
            lane = f"{conn.from_edge}_{conn.from_lane}"
            if lane not in lanes:
                lanes.append(lane)
    if not lanes:
        for det in scenario.detectors.values():
            if det.lane not in lanes:
                lanes.append(det.lane)
    return lanes


class CoSimulation:
    """
    One run of a scenario.

    Each step, in order: due program switches are installed, departures are
    queued and inserted, vehicles move under the signal states at the start of
    the step, adaptive controllers re-plan, and the V2V layer advances.
    """

    def __init__(self, scenario: Scenario, mode: str = "auto", trace_sink: Optional[TraceSink] = None):
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got '{mode}'")
        config = scenario.config
        if mode == "adaptive" and not config.adaptive:
            raise ScenarioValidationError(
                "adaptive mode requested but the scenario has no <adaptive> controller",
                scenario.source,
            )
        self.scenario = scenario
        self.mode = "adaptive" if mode == "adaptive" or (mode == "auto" and config.adaptive) else "static"
        self.dt = config.step_length
        self.total_steps = int(round(config.duration / self.dt))
        self.trace_sink = trace_sink

        self.state = SimState(
            network=scenario.network,
            lane_plans=scenario.lane_plans,
            vehicle_types=scenario.vehicle_types,
            begin=config.begin,
            step_length=self.dt,
            seed=config.seed,
        )
        self.state.add_detectors(scenario.detectors.values())
        self.signals = SignalController(scenario.programs)
        self.signals.update(config.begin)

        self.controllers: List[Tuple[AdaptiveConfig, AdaptiveController]] = []
        if self.mode == "adaptive":
            for cfg in config.adaptive:
                template = self.signals.active_program(cfg.tl_id)
                self.controllers.append((cfg, AdaptiveController(template, scenario.detectors)))

        self.vanet = VanetState(
            config=config.radio,
            begin=config.begin,
            end=config.end,
            rng=self.state.radio_rng,
            pairs=config.cbr_pairs,
        )
        self.queue_lanes = approach_lanes(scenario)
        self._queues: Dict[str, _QueueTrack] = {lane: _QueueTrack() for lane in self.queue_lanes}
        self.log = sim_logger(logger, lambda: self.state.clock)

    @property
    def clock(self) -> float:
        return self.state.clock

    @property
    def finished(self) -> bool:
        return self.state.step_index >= self.total_steps

    @property
    def remaining_steps(self) -> int:
        return max(self.total_steps - self.state.step_index, 0)

    def step(self) -> bool:
        """Advance one step; returns False when the horizon was already reached."""
        if self.finished:
            return False
        state = self.state
        t = state.clock
        self.signals.update(t)

        due = spawn_from_flows(self.scenario.flows, t, state.demand_rng, state.emitted, self.dt)
        due.extend(release_vehicles(state, self.scenario.vehicles))
        queue_departures(state, due)
        for vehicle in insert_pending(state):
            self.vanet.equip(vehicle.id, vehicle.order)

        step_vehicles(state, self.signals.states(t), self.dt)
        t_next = state.clock

        for cfg, controller in self.controllers:
            program = controller_tick(t_next, state, cfg, controller)
            if program is not None:
                switch_at = self.signals.schedule(program, t_next)
                self.log.debug(f"'{cfg.tl_id}' greens {controller.decisions[-1].greens} from {switch_at:.2f}")
        self.signals.update(t_next)

        network = self.scenario.network
        positions = {
            vid: network.position(state.vehicles[vid].edge, state.vehicles[vid].pos)
            for vid in self.vanet.equipped
            if vid in state.vehicles
        }
        network_step(self.vanet, positions, t_next)

        quarter = min(3, int(4 * state.step_index / self.total_steps)) if self.total_steps else 0
        for lane, track in self._queues.items():
            track.add(queue_length(lane, state, zone=None), quarter)
        if self.trace_sink is not None:
            self.trace_sink(trace_rows(state))
        return True

    def advance(self, steps: int) -> int:
        """Run up to ``steps`` steps; returns how many were taken."""
        taken = 0
        while taken < steps and self.step():
            taken += 1
        return taken

    def run(self) -> "CoSimulation":
        self.log.info(
            f"Running '{self.scenario.id}' ({self.mode}) seed={self.scenario.config.seed} "
            f"for {self.total_steps} steps"
        )
        self.advance(self.remaining_steps)
        self.log.info(
            f"Finished: inserted={self.state.inserted} arrived={self.state.arrived} "
            f"waiting={self.total_waiting_time:.1f}s sent={self.vanet.sent} "
            f"received={self.vanet.received}"
        )
        return self

    @property
    def total_waiting_time(self) -> float:
        return total_waiting_time(self.state)

    def queue_stats(self) -> Dict[str, QueueStats]:
        return {lane: track.stats() for lane, track in self._queues.items()}

    def net_metrics(self) -> NetMetrics:
        """Delivery metrics over the time simulated so far."""
        elapsed = self.state.clock - self.scenario.config.begin
        if elapsed <= 0:
            return NetMetrics()
        return compute_metrics(self.vanet.events, elapsed)

    def decisions(self):
        return [d for _, controller in self.controllers for d in controller.decisions]
