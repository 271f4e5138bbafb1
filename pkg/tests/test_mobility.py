"""
Tests for the Mobility Service

Tests demand parsing, insertion, the Krauss step and the invariants every
traffic step must keep: no collisions, conservation and speed bounds.
"""

import numpy as np
import pytest

from vanetsim.exceptions import SchemaError
from vanetsim.schemas import VehicleType
from vanetsim.services.mobility import (
    SimState,
    Vehicle,
    insert_pending,
    must_stop,
    parse_demand,
    parse_routes,
    queue_departures,
    release_vehicles,
    safe_speed,
    spawn_from_flows,
    spawn_streams,
    step_vehicles,
    total_waiting_time,
)
from vanetsim.services.signals import SignalController

from tests.conftest import fixture_path


def _state(scenario) -> SimState:
    config = scenario.config
    state = SimState(
        network=scenario.network,
        lane_plans=scenario.lane_plans,
        vehicle_types=scenario.vehicle_types,
        begin=config.begin,
        step_length=config.step_length,
        seed=config.seed,
    )
    state.add_detectors(scenario.detectors.values())
    return state


def _drive(scenario, steps, check=None):
    """Run the traffic layer alone under the scenario's static programs."""
    state = _state(scenario)
    signals = SignalController(scenario.programs)
    dt = scenario.config.step_length
    for _ in range(steps):
        t = state.clock
        signals.update(t)
        due = spawn_from_flows(scenario.flows, t, state.demand_rng, state.emitted, dt)
        due.extend(release_vehicles(state, scenario.vehicles))
        queue_departures(state, due)
        insert_pending(state)
        step_vehicles(state, signals.states(t), dt)
        if check is not None:
            check(state)
    return state


class TestDemandParsing:
    """Test suite for routes documents."""

    def test_cross_routes(self):
        routes, flows = parse_routes(fixture_path("cross.rou.xml").read_text(encoding="utf-8"))

        assert [r.id for r in routes] == ["rWE", "rEW", "rNS", "rSN"]
        assert flows[0].route.edge_sequence == ("W2C", "C2E")
        assert flows[0].period == pytest.approx(12.0)

    def test_period_probability_and_vehicle(self):
        demand = parse_demand(fixture_path("tjunction.rou.xml").read_text(encoding="utf-8"))
        by_id = {f.id: f for f in demand.flows}

        assert by_id["fAB"].vehicles_per_hour == pytest.approx(360.0)
        assert by_id["fDA"].probability == pytest.approx(0.05)
        assert by_id["fDA"].period is None
        (probe,) = demand.vehicles
        assert (probe.id, probe.depart, probe.depart_speed) == ("probe", 5.0, 10.0)

    def test_vtype(self):
        demand = parse_demand(fixture_path("cross_heavy.rou.xml").read_text(encoding="utf-8"))
        car = demand.vehicle_types["car"]

        assert car.sigma == pytest.approx(0.5)
        assert car.max_speed == pytest.approx(13.89)
        assert all(f.vtype == "car" for f in demand.flows)

    def test_unknown_route(self):
        text = '<routes><flow id="f" route="nope" end="10" vehsPerHour="60"/></routes>'

        with pytest.raises(SchemaError, match="nope"):
            parse_demand(text)

    def test_unknown_type(self):
        text = (
            '<routes><route id="r" edges="a"/>'
            '<flow id="f" route="r" type="bus" end="10" vehsPerHour="60"/></routes>'
        )

        with pytest.raises(SchemaError, match="bus"):
            parse_demand(text)

    def test_rate_and_probability_are_exclusive(self):
        text = (
            '<routes><route id="r" edges="a"/>'
            '<flow id="f" route="r" end="10" vehsPerHour="60" probability="0.1"/></routes>'
        )

        with pytest.raises(SchemaError):
            parse_demand(text)

    def test_duplicate_ids(self):
        text = (
            '<routes><route id="r" edges="a"/>'
            '<flow id="x" route="r" end="10" vehsPerHour="60"/>'
            '<vehicle id="x" route="r" depart="0"/></routes>'
        )

        with pytest.raises(SchemaError, match="duplicate id 'x'"):
            parse_demand(text)


class TestSpawning:
    """Test suite for flow departures."""

    def test_rate_flow_schedule(self, cross_scenario):
        flows = cross_scenario.flows[:1]
        rng = np.random.default_rng(0)
        emitted = {}

        first = spawn_from_flows(flows, 0.0, rng, emitted)
        assert [d.id for d in first] == ["fWE.0"]
        assert spawn_from_flows(flows, 11.9, rng, emitted) == []
        second = spawn_from_flows(flows, 12.0, rng, emitted)
        assert [(d.id, d.depart) for d in second] == [("fWE.1", 12.0)]

    def test_catch_up_emits_every_due_vehicle(self, cross_scenario):
        departures = spawn_from_flows(cross_scenario.flows[:1], 36.0, np.random.default_rng(0))

        assert [d.depart for d in departures] == [0.0, 12.0, 24.0, 36.0]

    def test_flow_end_is_exclusive(self, cross_scenario):
        departures = spawn_from_flows(cross_scenario.flows[:1], 5000.0, np.random.default_rng(0))

        assert len(departures) == 84
        assert departures[-1].depart < 1000

    def test_streams_are_reproducible(self):
        a = [g.random() for g in spawn_streams(42)]
        b = [g.random() for g in spawn_streams(42)]

        assert a == b
        assert len(set(a)) == 3


class TestCarFollowing:
    """Test suite for the Krauss step."""

    def test_safe_speed_stationary_leader(self):
        """Zero gap behind a stopped leader gives zero safe speed."""
        assert safe_speed(10.0, 0.0, 0.0, 4.5, 1.0) == 0.0
        assert safe_speed(0.0, 0.0, 10.0, 4.5, 1.0) == pytest.approx(10.0)

    @pytest.mark.parametrize(
        "v, v_leader, gap, expected",
        [(10.0, 8.0, 20.0, 11.6923), (10.0, 0.0, 12.5, 5.5556)],
    )
    def test_safe_speed_values(self, v, v_leader, gap, expected):
        assert safe_speed(v, v_leader, gap, 4.0, 1.0) == pytest.approx(expected, abs=1e-4)

    def test_red_light_holds_vehicle_behind_line(self, cross_scenario):
        """A vehicle 5 m from a red stop line never crosses it and comes to rest."""
        state = _state(cross_scenario)
        plan = cross_scenario.lane_plans["rWE"]
        lane = plan.lanes[0]
        lane_len = cross_scenario.network.lane_length(lane)
        vehicle = Vehicle(id="v", plan=plan, vtype=VehicleType(), lane=lane, pos=lane_len - 5.0, speed=13.89)
        state.lanes[lane].append(vehicle)
        state.vehicles["v"] = vehicle
        held = {"C": "r" * 12}

        for _ in range(300):
            step_vehicles(state, held, 0.1)
            assert vehicle.lane == lane
            assert vehicle.pos <= lane_len + 1e-9

        assert vehicle.speed < 0.1

    def test_must_stop(self):
        assert must_stop("r", 10.0, 100.0, 4.5)
        assert not must_stop("G", 10.0, 1.0, 4.5)
        assert not must_stop("g", 10.0, 1.0, 4.5)
        # 10 m/s needs 11.1 m to stop at 4.5 m/s^2
        assert must_stop("y", 10.0, 20.0, 4.5)
        assert not must_stop("y", 10.0, 5.0, 4.5)

    def test_free_road_trajectory(self, straight_scenario):
        """With sigma 0 a lone vehicle accelerates at a*dt per step then cruises."""
        a, dt, vmax = 2.6, 0.1, 13.89
        k_cap = int(vmax / (a * dt))
        positions = []

        def record(state):
            positions.append(state.vehicles["solo"].pos)

        _drive(straight_scenario, 100, record)

        for n, pos in enumerate(positions, start=1):
            if n <= k_cap:
                expected = 5.0 + a * dt * dt * n * (n + 1) / 2
            else:
                expected = 5.0 + a * dt * dt * k_cap * (k_cap + 1) / 2 + (n - k_cap) * vmax * dt
            assert pos == pytest.approx(expected, abs=1e-9)

    def test_arrival_removes_vehicle(self, straight_scenario):
        state = _drive(straight_scenario, 2000)

        assert state.arrived == 1
        assert state.active == 0
        assert state.inserted == 1
        assert total_waiting_time(state) == 0.0

    def test_detector_crossing_recorded(self, straight_scenario):
        state = _drive(straight_scenario, 1000)

        (crossing,) = state.crossings["mid"]
        assert crossing[1] == "solo"
        assert 70 < crossing[0] < 80

    def test_insertion_waits_for_space(self, straight_scenario):
        """Two simultaneous departures are inserted one after the other."""
        state = _state(straight_scenario)
        solo = straight_scenario.vehicles[0]
        queue_departures(state, [solo.model_copy(update={"id": "a"}), solo.model_copy(update={"id": "b"})])

        assert [v.id for v in insert_pending(state)] == ["a"]
        assert state.pending_count == 1
        while state.pending_count:
            step_vehicles(state, {}, 0.1)
            insert_pending(state)

        a, b = state.lanes["road_0"]
        assert a.pos - a.length - b.pos >= 2.5 - 1e-9


class TestStepInvariants:
    """Long runs keep gaps, conservation and speed bounds."""

    @pytest.mark.parametrize(
        "scenario_fixture", ["cross_scenario", "heavy_scenario", "tjunction_scenario"]
    )
    def test_ten_thousand_steps(self, scenario_fixture, request):
        scenario = request.getfixturevalue(scenario_fixture)
        network = scenario.network
        totals = {"max_active": 0}

        def check(state):
            assert state.inserted == state.active + state.arrived
            totals["max_active"] = max(totals["max_active"], state.active)
            for lane, vehicles in state.lanes.items():
                limit = network.lane_speed_limit(lane)
                for v in vehicles:
                    assert 0.0 <= v.speed <= min(limit, v.vtype.max_speed) + 1e-9
                    assert v.pos <= network.lane_length(lane) + 1e-9
                for leader, follower in zip(vehicles, vehicles[1:]):
                    assert leader.pos - leader.length - follower.pos >= -1e-9

        state = _drive(scenario, 10_000, check)

        assert state.arrived > 0
        assert totals["max_active"] > 1
