"""Extended Wells-Riley infection probability and the six-phase progression.

Timing convention: an infection drawn during day ``d`` makes the agent Exposed
from day ``d + 1``; every other phase change happens at a day boundary.
"""
from __future__ import annotations

import math
from collections.abc import Iterable
from dataclasses import dataclass

import numpy as np

from .model import AgentState, ClassroomSpec, InfectionPhase, LessonExposure, SimulationParams

S = InfectionPhase.SUSCEPTIBLE
E = InfectionPhase.EXPOSED
IE = InfectionPhase.INFECTIOUS_EXPOSED
I = InfectionPhase.INFECTIOUS  # noqa: E741
A = InfectionPhase.ASYMPTOMATIC
R = InfectionPhase.RECOVERED


def dose_per_infector(params: SimulationParams, room: ClassroomSpec, minutes: float) -> float:
    """Exponent contributed by one infector over ``minutes`` in ``room``.

    q * p * t * (1 - n_I) * (1 - n_S) / Q with t in hours.
    """
    if minutes < 0:
        raise ValueError(f"exposure time must be >= 0, got {minutes}")
    rate = room.clean_air_ventilation_rate
    if rate <= 0:
        raise ValueError(f"clean-air ventilation rate must be > 0, got {rate}")
    return (
        params.quanta_generation_rate
        * params.pulmonary_ventilation_rate
        * (minutes / 60.0)
        * (1.0 - params.exhalation_filtration_efficiency)
        * (1.0 - params.respiration_filtration_efficiency)
        / rate
    )


def infection_probability(exposure: LessonExposure, params: SimulationParams) -> float:
    if exposure.infector_count < 0:
        raise ValueError("infector_count must be >= 0")
    dose = dose_per_infector(params, exposure.room, exposure.exposure_minutes)
    if exposure.infector_count == 0:
        return 0.0
    return -math.expm1(-exposure.infector_count * dose)


def bernoulli_expose(susceptibles: Iterable[int], probability: float, rng: np.random.Generator) -> set[int]:
    """Infect each susceptible independently with ``probability``.

    Ids are visited in ascending order so the draws are reproducible.
    """
    if not 0.0 <= probability <= 1.0:
        raise ValueError(f"probability must lie in [0, 1], got {probability}")
    ids = sorted(susceptibles)
    if not ids or probability == 0.0:
        return set()
    if probability == 1.0:
        return set(ids)
    hits = rng.random(len(ids)) < probability
    return {sid for sid, hit in zip(ids, hits) if hit}


@dataclass(frozen=True)
class TransitionSchedule:
    exposed_days: int
    infectious_exposed_days: int
    infectious_days: int
    asymptomatic_days: int
    asymptomatic_rate: float

    def __post_init__(self) -> None:
        for name in ("exposed_days", "infectious_exposed_days", "infectious_days", "asymptomatic_days"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not 0.0 <= self.asymptomatic_rate <= 1.0:
            raise ValueError("asymptomatic_rate must lie in [0, 1]")

    @classmethod
    def from_params(cls, params: SimulationParams) -> "TransitionSchedule":
        return cls(
            exposed_days=params.exposed_days,
            infectious_exposed_days=params.infectious_exposed_days,
            infectious_days=params.infectious_days,
            asymptomatic_days=params.asymptomatic_days,
            asymptomatic_rate=params.asymptomatic_rate,
        )

    def duration(self, phase: InfectionPhase) -> int | None:
        """Days spent in ``phase``; None for phases without a timer."""
        return {
            E: self.exposed_days,
            IE: self.infectious_exposed_days,
            I: self.infectious_days,
            A: self.asymptomatic_days,
        }.get(InfectionPhase(phase))


def advance_day(state: AgentState, day: int, schedule: TransitionSchedule, rng: np.random.Generator) -> AgentState:
    """Apply the day-boundary transition that follows the lessons of ``day``.

    Consumes one uniform draw only when an infectious-exposed agent branches.
    """
    phase = state.phase
    length = schedule.duration(phase)
    if length is None or day + 1 - state.phase_entry_day < length:
        return state
    if phase == E:
        nxt = IE
    elif phase == IE:
        nxt = A if rng.random() < schedule.asymptomatic_rate else I
    else:
        nxt = R
    return AgentState(state.student_id, nxt, day + 1)


def infect(state: AgentState, day: int) -> AgentState:
    if state.phase != S:
        raise ValueError(f"student {state.student_id} is {state.phase.name}, only susceptible students can be infected")
    return AgentState(state.student_id, E, day + 1)


def attends_school(state: AgentState) -> bool:
    return state.phase != I


def is_infector(state: AgentState) -> bool:
    return state.phase in (IE, A)


def advance_phases(
    phase: np.ndarray, entry: np.ndarray, day: int, schedule: TransitionSchedule, rng: np.random.Generator
) -> None:
    """Array form of :func:`advance_day` for a whole population, in place.

    Branch draws are taken in ascending student order, so the result matches
    calling :func:`advance_day` on each agent in id order with the same stream.
    """
    elapsed = day + 1 - entry
    to_ie = (phase == E) & (elapsed >= schedule.exposed_days)
    branch = (phase == IE) & (elapsed >= schedule.infectious_exposed_days)
    done = ((phase == I) & (elapsed >= schedule.infectious_days)) | (
        (phase == A) & (elapsed >= schedule.asymptomatic_days)
    )
    phase[to_ie] = IE
    phase[done] = R
    if branch.any():
        idx = np.flatnonzero(branch)
        asym = rng.random(idx.size) < schedule.asymptomatic_rate
        phase[idx] = np.where(asym, A, I)
    entry[to_ie | branch | done] = day + 1
