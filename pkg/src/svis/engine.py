"""One seeded replication of the school simulation.

Within a day the infector set is fixed, so a susceptible student's lessons are
independent Bernoulli trials whose per-lesson probabilities come from the
room's infector count. The default ``"day"`` sampler draws one uniform per
exposed susceptible against ``1 - prod(1 - P_lesson)``; ``"period"`` walks
every lesson with :func:`bernoulli_expose`. Both have the same law.
"""
from __future__ import annotations

import csv
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import TextIO

import numpy as np

from .infection import TransitionSchedule, advance_phases, bernoulli_expose, dose_per_infector
from .model import InfectionPhase, SchoolConfig, SimulationParams, ensure_valid
from .scheduling import RoomPattern, Timetable

S, E, IE, I, A, R = (int(p) for p in InfectionPhase)
N_PHASES = len(InfectionPhase)
ACTIVE = (E, IE, I, A)


def derive_seed(master_seed: int, replication_index: int, pattern_id: int = 0, room_pattern_id: int = 0) -> int:
    """64-bit seed for one replication, keyed by (pattern, room pattern, replication).

    Adding patterns or replications never changes the seeds of existing ones.
    """
    seq = np.random.SeedSequence(master_seed, spawn_key=(pattern_id, room_pattern_id, replication_index))
    return int(seq.generate_state(1, np.uint64)[0])


def derive_room_seed(master_seed: int, room_pattern_id: int) -> int:
    seq = np.random.SeedSequence(master_seed, spawn_key=(room_pattern_id,))
    return int(seq.generate_state(1, np.uint64)[0])


def derive_substream(
    master_seed: int, replication_index: int, pattern_id: int = 0, room_pattern_id: int = 0
) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master_seed, replication_index, pattern_id, room_pattern_id))


@dataclass(frozen=True)
class ReplicationConfig:
    timetable: Timetable
    room_pattern: RoomPattern | None
    school: SchoolConfig
    params: SimulationParams
    master_seed: int = 0
    # (student, day) pairs made infectious-exposed on that day; None = first student of Group A on day 0
    initial_infections: Sequence[tuple[int, int]] | None = None
    # extra phases set on day 0, used to stage scenarios
    initial_phases: Mapping[int, InfectionPhase] = field(default_factory=dict)

    def seeds(self) -> list[tuple[int, int]]:
        if self.initial_infections is not None:
            return list(self.initial_infections)
        groups = self.timetable.groups
        return [(groups.first_student if groups is not None else 0, 0)]

    def check(self) -> None:
        ensure_valid(self.school, self.params)
        tt = self.timetable
        if tt.n_students != self.school.total_students:
            raise ValueError(f"timetable has {tt.n_students} students, config has {self.school.total_students}")
        if tt.lessons_per_day != self.school.lessons_per_day:
            raise ValueError("timetable lessons per day differ from the school config")
        for student, day in self.seeds():
            if not 0 <= student < tt.n_students:
                raise ValueError(f"initial infection names unknown student {student}")
            if not 0 <= day < tt.n_days:
                raise ValueError(f"initial infection day {day} is outside the horizon")
        for student in self.initial_phases:
            if not 0 <= student < tt.n_students:
                raise ValueError(f"initial phase names unknown student {student}")


@dataclass
class ReplicationResult:
    daily_phase_counts: np.ndarray  # (days, 6), sampled after each day boundary
    cell_probabilities: np.ndarray  # (days, rooms, lessons)
    new_infections: np.ndarray  # (days,)
    cumulative_infected: np.ndarray  # (days,)
    peak_infected: int
    peak_day: int
    total_ever_infected: int
    seed: int = 0
    # filled only when tracing: phase during the day's lessons, and who attended
    trace_phases: np.ndarray | None = None  # (days, students) int8
    trace_attended: np.ndarray | None = None  # (days, students) bool

    @property
    def infected_series(self) -> np.ndarray:
        return self.daily_phase_counts[:, list(ACTIVE)].sum(axis=1)

    def write_trace(self, out: "TextIO | str | Path") -> None:
        if self.trace_phases is None:
            raise ValueError("replication was run without tracing")
        if isinstance(out, (str, Path)):
            with open(out, "w", newline="") as fh:
                self.write_trace(fh)
            return
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["day", "student", "phase", "attended"])
        days, students = self.trace_phases.shape
        for d in range(days):
            for s in range(students):
                writer.writerow(
                    [d, s + 1, InfectionPhase(int(self.trace_phases[d, s])).name.lower(), int(self.trace_attended[d, s])]
                )


def run_replication(rc: ReplicationConfig, *, trace: bool = False, sampling: str = "day") -> ReplicationResult:
    if sampling not in ("day", "period"):
        raise ValueError(f"sampling must be 'day' or 'period', got {sampling!r}")
    rc.check()
    tt, params, school = rc.timetable, rc.params, rc.school
    rng = np.random.default_rng(rc.master_seed)
    schedule = TransitionSchedule.from_params(params)
    n, days, lessons, rooms = tt.n_students, tt.n_days, tt.lessons_per_day, tt.n_rooms
    dose = dose_per_infector(params, school.classroom, school.lesson_minutes)

    phase = np.zeros(n, dtype=np.int8)
    entry = np.zeros(n, dtype=np.int32)
    ever = np.zeros(n, dtype=bool)
    for student, ph in rc.initial_phases.items():
        phase[student] = int(ph)
        ever[student] = ph != InfectionPhase.SUSCEPTIBLE

    pending: dict[int, list[int]] = {}
    for student, day in rc.seeds():
        pending.setdefault(day, []).append(student)
    last_seed_day = max(pending, default=-1)

    counts = np.zeros((days, N_PHASES), dtype=np.int32)
    cells = np.zeros((days, rooms, lessons), dtype=np.float64)
    new = np.zeros(days, dtype=np.int32)
    cumulative = np.zeros(days, dtype=np.int32)
    tr_phase = np.zeros((days, n), dtype=np.int8) if trace else None
    tr_att = np.zeros((days, n), dtype=bool) if trace else None

    for d in range(days):
        for student in pending.get(d, ()):
            if phase[student] == S:
                phase[student] = IE
                entry[student] = d
                ever[student] = True

        slots = tt.slots[:, d, :]
        attending = (slots >= 0) & (phase != I)[:, None]
        if trace:
            tr_phase[d] = phase
            tr_att[d] = attending.any(axis=1)

        infected_today = np.empty(0, dtype=np.intp)
        infecting = attending & ((phase == IE) | (phase == A))[:, None]
        if infecting.any():
            who, when = np.nonzero(infecting)
            load = np.bincount(when * rooms + slots[who, when], minlength=lessons * rooms).reshape(lessons, rooms)
            prob = -np.expm1(-dose * load)
            cells[d] = prob.T
            exposed = attending & (phase == S)[:, None]
            if sampling == "day":
                si, sl = np.nonzero(exposed)
                total = np.bincount(si, weights=load[sl, slots[si, sl]], minlength=n)
                cand = np.flatnonzero(total > 0)
                hit = rng.random(cand.size) < -np.expm1(-dose * total[cand])
                infected_today = cand[hit]
            else:
                infected_today = _sample_by_period(exposed, slots, prob, rng)

        advance_phases(phase, entry, d, schedule, rng)
        if infected_today.size:
            phase[infected_today] = E
            entry[infected_today] = d + 1
            ever[infected_today] = True
        counts[d] = np.bincount(phase, minlength=N_PHASES)
        new[d] = infected_today.size
        cumulative[d] = np.count_nonzero(ever)

        # nothing can change once no one is carrying the virus and no seed is due
        if d >= last_seed_day and not np.isin(phase, ACTIVE).any():
            counts[d + 1 :] = counts[d]
            cumulative[d + 1 :] = cumulative[d]
            if trace:
                tr_phase[d + 1 :] = phase
                rest = tt.slots[:, d + 1 :, :] >= 0
                tr_att[d + 1 :] = rest.any(axis=2).T
            break

    infected = counts[:, list(ACTIVE)].sum(axis=1)
    peak_day = int(np.argmax(infected)) if days else 0
    return ReplicationResult(
        daily_phase_counts=counts,
        cell_probabilities=cells,
        new_infections=new,
        cumulative_infected=cumulative,
        peak_infected=int(infected[peak_day]) if days else 0,
        peak_day=peak_day,
        total_ever_infected=int(cumulative[-1]) if days else 0,
        seed=rc.master_seed,
        trace_phases=tr_phase,
        trace_attended=tr_att,
    )


def _sample_by_period(exposed: np.ndarray, slots: np.ndarray, prob: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    hit: set[int] = set()
    lessons, rooms = prob.shape
    for period in range(lessons):
        for room in range(rooms):
            p = float(prob[period, room])
            if p == 0.0:
                continue
            members = np.flatnonzero(exposed[:, period] & (slots[:, period] == room))
            hit |= bernoulli_expose((int(m) for m in members if m not in hit), p, rng)
    return np.array(sorted(hit), dtype=np.intp)
