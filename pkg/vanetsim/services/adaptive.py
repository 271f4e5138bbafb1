"""
Adaptive Signal Service

Road-side controller that measures per-approach load at its light's
detectors and regenerates the phase program so that heavily loaded
approaches get a larger share of the cycle's green budget.
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import TYPE_CHECKING, List, Mapping, Optional, Sequence, Union

from vanetsim.config import LOG_LEVEL, SIM_LOG_FILE
from vanetsim.exceptions import AllocationError
from vanetsim.logger import setup_logger
from vanetsim.schemas import (
    AdaptiveConfig,
    ApproachLoad,
    ApproachSpec,
    Detector,
    LoadMetric,
    Phase,
    PhaseProgram,
    ProgramOrigin,
)
from vanetsim.services.signals import read_detector

if TYPE_CHECKING:
    from vanetsim.services.mobility import SimState

logger = setup_logger(__name__, level=LOG_LEVEL, log_file=SIM_LOG_FILE)

ADAPTIVE_PROGRAM_ID = "adaptive"


def green_phase_indices(template: PhaseProgram) -> List[int]:
    """
    Indices of the template's green phases.

    A phase is green when it grants G or g and shows no y, yellow when it shows
    any y. Green and yellow phases must alternate around the cycle.

    Raises:
        AllocationError: No green phase, or a phase that breaks the alternation
    """
    phases = template.phases
    for index, phase in enumerate(phases):
        if not (phase.is_green or phase.is_yellow):
            raise AllocationError(f"phase {index} ('{phase.state}') is neither green nor yellow")
    green = [i for i, p in enumerate(phases) if p.is_green]
    if not green:
        raise AllocationError("template program has no green phases")
    for index, phase in enumerate(phases):
        following = phases[(index + 1) % len(phases)]
        if phase.is_green == following.is_green:
            raise AllocationError(
                f"phases {index} and {(index + 1) % len(phases)} do not alternate green and yellow"
            )
    return green


def template_green_budget(template: PhaseProgram) -> int:
    return int(round(sum(p.duration for p in template.phases if p.is_green)))


def measure_loads(
    approaches: Sequence[ApproachSpec],
    detectors: Mapping[str, Detector],
    state: "SimState",
    metric: LoadMetric = LoadMetric.QUEUE_LENGTH,
) -> List[ApproachLoad]:
    """Sum the chosen detector metric over each approach's detectors, ordered by phase."""
    loads = []
    for approach in sorted(approaches, key=lambda a: a.phase):
        total = 0.0
        for det_id in approach.detectors:
            reading = read_detector(detectors[det_id], state)
            if metric is LoadMetric.QUEUE_LENGTH:
                total += reading.queue_length
            elif metric is LoadMetric.OCCUPANCY:
                total += reading.occupancy
            else:
                total += reading.count
        loads.append(ApproachLoad(approach=approach.phase, load=total))
    return loads


def split_green(loads: Sequence[float], budget: int, g_min: int, g_max: int) -> List[int]:
    """
    Divide an integer green budget among approaches in proportion to load.

    Every approach first gets ``g_min``; the rest is shared by load (equally
    when all loads are zero). Shares above ``g_max`` are clamped and the excess
    is shared again among the others. Whole seconds are assigned by largest
    remainder, lower index first on ties.

    Raises:
        AllocationError: No approaches, or a budget outside ``[n*g_min, n*g_max]``
    """
    n = len(loads)
    if n == 0:
        raise AllocationError("no green phases to allocate")
    if budget < n * g_min:
        raise AllocationError(f"green budget {budget} s is below {n} x gMin ({g_min} s)")
    if budget > n * g_max:
        raise AllocationError(f"green budget {budget} s exceeds {n} x gMax ({g_max} s)")
    if any(load < 0 or not math.isfinite(load) for load in loads):
        raise AllocationError(f"loads must be finite and non-negative, got {list(loads)}")

    weights = [Fraction(load) for load in loads]
    shares: List[Fraction] = [Fraction(0)] * n
    free = list(range(n))
    clamped_total = Fraction(0)
    while free:
        spare = budget - clamped_total - len(free) * g_min
        weight = sum(weights[i] for i in free)
        for i in free:
            share = weights[i] / weight if weight > 0 else Fraction(1, len(free))
            shares[i] = g_min + spare * share
        over = [i for i in free if shares[i] > g_max]
        if not over:
            break
        for i in over:
            shares[i] = Fraction(g_max)
            clamped_total += g_max
            free.remove(i)

    greens = [math.floor(s) for s in shares]
    deficit = budget - sum(greens)
    by_remainder = sorted(range(n), key=lambda i: (-(shares[i] - greens[i]), i))
    for i in by_remainder[:deficit]:
        greens[i] += 1
    return greens


def reallocate_green(
    loads: Sequence[Union[ApproachLoad, float]],
    config: AdaptiveConfig,
    template: PhaseProgram,
) -> PhaseProgram:
    """
    Build a program with the template's phase sequence and load-proportional greens.

    Yellow phases take ``config.yellow``; state strings are copied unchanged.

    Raises:
        AllocationError: Template without alternating green/yellow phases, a load
            count that differs from the number of green phases, or an infeasible budget
    """
    green = green_phase_indices(template)
    values = [l.load if isinstance(l, ApproachLoad) else float(l) for l in loads]
    if len(values) != len(green):
        raise AllocationError(f"expected {len(green)} loads (one per green phase), got {len(values)}")
    budget = config.cycle_green_budget or template_green_budget(template)
    greens = split_green(values, budget, config.g_min, config.g_max)

    durations = dict(zip(green, greens))
    phases = tuple(
        Phase(duration=float(durations[i]) if i in durations else config.yellow, state=p.state)
        for i, p in enumerate(template.phases)
    )
    return template.model_copy(
        update={"phases": phases, "program_id": ADAPTIVE_PROGRAM_ID, "origin": ProgramOrigin.ADAPTIVE}
    )


@dataclass
class Decision:
    t: float
    tl_id: str
    loads: List[float]
    greens: List[int]


@dataclass
class AdaptiveController:
    """Per-light controller state: the template, the detectors it reads and its decisions."""

    template: PhaseProgram
    detectors: Mapping[str, Detector]
    next_tick: int = 1
    decisions: List[Decision] = field(default_factory=list)


def controller_tick(
    clock: float,
    state: "SimState",
    config: AdaptiveConfig,
    controller: AdaptiveController,
) -> Optional[PhaseProgram]:
    """
    Re-plan the light's greens at control-interval boundaries.

    Called once per step; returns the new program when a boundary is reached
    (within half a step) and None otherwise. The caller installs it at the
    next cycle boundary.
    """
    boundary = state.begin + controller.next_tick * config.control_interval
    if clock + state.step_length / 2 < boundary:
        return None
    while state.begin + controller.next_tick * config.control_interval <= clock + state.step_length / 2:
        controller.next_tick += 1

    loads = measure_loads(config.approaches, controller.detectors, state, config.load_metric)
    program = reallocate_green(loads, config, controller.template)
    greens = [int(p.duration) for p in program.phases if p.is_green]
    decision = Decision(clock, config.tl_id, [l.load for l in loads], greens)
    controller.decisions.append(decision)
    logger.debug(f"Adaptive '{config.tl_id}' at t={clock:.2f}: loads={decision.loads} greens={greens}")
    return program
