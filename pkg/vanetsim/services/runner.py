"""
Scenario Runner Service

High-level operations shared by the command line and the HTTP API: validate a
scenario, run it (optionally under an external control client), compare the
static and adaptive controllers on identical demand, and sweep the number of
radio-equipped vehicles.
"""

import dataclasses
from concurrent.futures import ProcessPoolExecutor
from contextlib import ExitStack
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

from vanetsim.config import CONTROL_HOST, LOG_LEVEL, OUTPUT_DIR, SIM_LOG_FILE
from vanetsim.exceptions import ScenarioValidationError
from vanetsim.logger import setup_logger
from vanetsim.schemas import ComparisonReport, NetMetrics, RunReport, ValidationResponse
from vanetsim.services import control, reporting
from vanetsim.services.netmodel import Scenario, load_scenario_file
from vanetsim.services.simulation import CoSimulation

logger = setup_logger(__name__, level=LOG_LEVEL, log_file=SIM_LOG_FILE)

PathLike = Union[str, Path]

TRACE_FILE = "trace.csv"
CONTROLLER_FILE = "controller.csv"
EVENTS_FILE = "events.csv"
METRICS_FILE = "metrics.csv"
REPORT_FILE = "report.json"
SWEEP_FILE = "sweep_metrics.csv"


def _with_node_cap(scenario: Scenario, max_nodes: int) -> Scenario:
    radio = scenario.config.radio.model_copy(update={"max_nodes": max_nodes})
    config = scenario.config.model_copy(update={"radio": radio})
    return dataclasses.replace(scenario, config=config)


def _run_mode(
    scenario_path: str, seed: Optional[int], end: Optional[float], mode: str, out_dir: Optional[str]
) -> RunReport:
    # Module level so that it can run in a worker process
    return ScenarioRunner().run(scenario_path, seed=seed, end=end, mode=mode, out_dir=out_dir)


class ScenarioRunner:
    """Runs scenarios and writes their result files."""

    def __init__(self, output_dir: PathLike = OUTPUT_DIR):
        self.output_dir = Path(output_dir)

    def _out_dir(self, scenario: Scenario, out_dir: Optional[PathLike]) -> Path:
        return Path(out_dir) if out_dir is not None else self.output_dir / scenario.id

    def validate(self, scenario_path: PathLike) -> ValidationResponse:
        """Load a scenario and summarise it; errors propagate as ScenarioError."""
        scenario = load_scenario_file(scenario_path)
        for warning in scenario.warnings:
            logger.warning(warning)
        return ValidationResponse(
            valid=True,
            scenario_id=scenario.id,
            link_counts=dict(scenario.link_counts),
            flows=len(scenario.flows),
            detectors=len(scenario.detectors),
            programs=len(scenario.programs),
        )

    def _finish(self, sim: CoSimulation, out: Path, trace_path: Optional[Path]) -> RunReport:
        scenario = sim.scenario
        net = sim.net_metrics()
        outputs = {}
        if trace_path is not None:
            outputs["trace"] = str(trace_path)
        outputs["controller"] = str(reporting.write_controller_csv(sim.decisions(), out / CONTROLLER_FILE))
        outputs["events"] = str(reporting.write_events_csv(sim.vanet.events, out / EVENTS_FILE))
        outputs["metrics"] = str(
            reporting.write_metrics_csv([(sim.vanet.radio_nodes, net)], out / METRICS_FILE)
        )
        outputs["report"] = str(out / REPORT_FILE)

        report = RunReport(
            scenario_id=scenario.id,
            seed=scenario.config.seed,
            mode=sim.mode,
            duration=sim.clock - scenario.config.begin,
            inserted=sim.state.inserted,
            arrived=sim.state.arrived,
            total_waiting_time=sim.total_waiting_time,
            queues=sim.queue_stats(),
            net=net,
            radio_nodes=sim.vanet.radio_nodes,
            outputs=outputs,
        )
        reporting.write_report(report, out / REPORT_FILE)
        return report

    def simulate(
        self,
        scenario: Scenario,
        *,
        mode: str = "auto",
        out_dir: Optional[PathLike] = None,
        trace: bool = False,
        control_port: Optional[int] = None,
        control_host: str = CONTROL_HOST,
    ) -> RunReport:
        """
        Run a loaded scenario and write its outputs.

        With ``control_port`` the simulation only advances on the client's STEP
        commands; results cover the time simulated when the session ends.

        Raises:
            OutputError: If a result file cannot be written
            ControlServerError: If the control endpoint cannot be bound
        """
        out = self._out_dir(scenario, out_dir)
        trace_path = out / TRACE_FILE if trace else None
        with ExitStack() as stack:
            sink = stack.enter_context(reporting.TraceWriter(trace_path)) if trace_path else None
            sim = CoSimulation(scenario, mode=mode, trace_sink=sink)
            if control_port is None:
                sim.run()
            else:
                result = control.serve(sim, control_host, control_port)
                logger.info(
                    f"Controlled run of '{scenario.id}' stopped at t={result.clock:.3f} "
                    f"after {result.commands} command(s)"
                )
        report = self._finish(sim, out, trace_path)
        logger.info(
            f"Run '{scenario.id}' ({report.mode}, seed {report.seed}): arrived {report.arrived}/"
            f"{report.inserted}, waiting {report.total_waiting_time:.1f} s, "
            f"pdf {report.net.pdf:.4f}; outputs in {out}"
        )
        return report

    def run(
        self,
        scenario_path: PathLike,
        *,
        seed: Optional[int] = None,
        end: Optional[float] = None,
        mode: str = "auto",
        out_dir: Optional[PathLike] = None,
        trace: bool = False,
        control_port: Optional[int] = None,
    ) -> RunReport:
        scenario = load_scenario_file(scenario_path, seed=seed, end=end)
        return self.simulate(
            scenario, mode=mode, out_dir=out_dir, trace=trace, control_port=control_port
        )

    def compare(
        self,
        scenario_path: PathLike,
        *,
        seed: Optional[int] = None,
        end: Optional[float] = None,
        out_dir: Optional[PathLike] = None,
        parallel: bool = True,
    ) -> ComparisonReport:
        """
        Run the same scenario and seed with static and adaptive signal control.

        Raises:
            ScenarioValidationError: Scenario without traffic lights or without an
                adaptive controller
        """
        scenario = load_scenario_file(scenario_path, seed=seed, end=end)
        if not scenario.link_counts:
            raise ScenarioValidationError("compare needs at least one traffic light", scenario.source)
        if not scenario.config.adaptive:
            raise ScenarioValidationError(
                "compare needs an <adaptive> controller in the scenario", scenario.source
            )
        out = self._out_dir(scenario, out_dir)
        jobs = [
            (str(scenario_path), scenario.config.seed, end, mode, str(out / mode))
            for mode in ("static", "adaptive")
        ]
        if parallel:
            with ProcessPoolExecutor(max_workers=2) as pool:
                futures = [pool.submit(_run_mode, *job) for job in jobs]
                static, adaptive = (f.result() for f in futures)
        else:
            static, adaptive = (_run_mode(*job) for job in jobs)

        change = 0.0
        if static.total_waiting_time > 0:
            change = 100.0 * (adaptive.total_waiting_time - static.total_waiting_time) / static.total_waiting_time
        lanes = sorted(set(static.queues) | set(adaptive.queues))
        report = ComparisonReport(
            scenario_id=scenario.id,
            seed=scenario.config.seed,
            static=static,
            adaptive=adaptive,
            waiting_time_change_percent=change,
            max_queue={
                lane: {
                    "static": static.queues[lane].max if lane in static.queues else 0,
                    "adaptive": adaptive.queues[lane].max if lane in adaptive.queues else 0,
                }
                for lane in lanes
            },
            arrived={"static": static.arrived, "adaptive": adaptive.arrived},
        )
        reporting.write_report(report, out / "comparison.json")
        logger.info(
            f"Compared '{scenario.id}' seed {scenario.config.seed}: waiting "
            f"{static.total_waiting_time:.1f} s static vs {adaptive.total_waiting_time:.1f} s "
            f"adaptive ({change:+.1f}%)"
        )
        return report

    def sweep(
        self,
        scenario_path: PathLike,
        nodes: Sequence[int],
        *,
        seed: Optional[int] = None,
        end: Optional[float] = None,
        out_dir: Optional[PathLike] = None,
    ) -> Tuple[List[Tuple[int, NetMetrics]], Path]:
        """
        Run the scenario once per radio node cap.

        Returns:
            The (nodes, metrics) rows and the path of the sweep metrics CSV
        """
        if not nodes or any(n < 1 for n in nodes):
            raise ScenarioValidationError(f"node counts must be positive, got {list(nodes)}")
        scenario = load_scenario_file(scenario_path, seed=seed, end=end)
        out = self._out_dir(scenario, out_dir)
        rows = []
        for n in nodes:
            report = self.simulate(_with_node_cap(scenario, n), out_dir=out / f"nodes_{n}")
            rows.append((n, report.net))
        path = reporting.write_metrics_csv(rows, out / SWEEP_FILE)
        return rows, path


_runner_instance: Optional[ScenarioRunner] = None


def get_runner() -> ScenarioRunner:
    """
    Get or create the scenario runner singleton.

    Returns:
        ScenarioRunner instance
    """
    global _runner_instance

    if _runner_instance is None:
        _runner_instance = ScenarioRunner()

    return _runner_instance
