"""Experiment presets and the replication harness that writes CSV outputs."""
from __future__ import annotations

import dataclasses
import json
import os
import platform
import time
from collections.abc import Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import __version__
from .engine import ReplicationConfig, derive_room_seed, derive_seed, run_replication
from .metrics import (
    HISTOGRAM_HEADER,
    N_BINS,
    PEAKS_HEADER,
    SUMMARY_HEADER,
    ProbabilityHistogram,
    histogram_counts,
    histogram_rows,
    summarize_values,
    summary_row,
    write_csv,
)
from .model import ClassroomMode, SchoolConfig, SimulationParams, default_params, default_school, ensure_valid
from .scheduling import ScheduleType, build_timetable, enumerate_patterns, face_to_face_percentage, generate_room_pattern

EXPERIMENT1_VENTILATION = (450.0, 900.0, 1350.0, 1800.0)
PARALLELISM_ENV = "SVIS_PARALLELISM"

# replications per (face-to-face pattern, room pattern) case
_SELF_CONTAINED_REPS = {ScheduleType.T4: 200, ScheduleType.T10: 75, ScheduleType.T12: 600}
_DEPARTMENTALIZED_REPS = {ScheduleType.T4: 20, ScheduleType.T10: 10, ScheduleType.T12: 25}
DEPARTMENTALIZED_ROOM_PATTERNS = 20


@dataclass(frozen=True)
class ExperimentCase:
    schedule_type: ScheduleType
    mode: ClassroomMode
    pattern_ids: tuple[int, ...]
    room_patterns: int
    replications: int  # per (face-to-face pattern, room pattern) combination
    ventilation: float | None = None  # clean-air rate override, m3/h

    @property
    def total_replications(self) -> int:
        return len(self.pattern_ids) * self.room_patterns * self.replications


@dataclass(frozen=True)
class ExperimentPlan:
    name: str
    mode: ClassroomMode
    cases: tuple[ExperimentCase, ...]

    @property
    def total_replications(self) -> int:
        return sum(c.total_replications for c in self.cases)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "mode": self.mode.value,
            "cases": [
                {
                    "schedule_type": c.schedule_type.name,
                    "pattern_ids": list(c.pattern_ids),
                    "room_patterns": c.room_patterns,
                    "replications": c.replications,
                    "ventilation": c.ventilation,
                    "total_replications": c.total_replications,
                }
                for c in self.cases
            ],
            "total_replications": self.total_replications,
        }


def default_case(schedule_type: ScheduleType, mode: ClassroomMode | str, ventilation: float | None = None) -> ExperimentCase:
    mode = ClassroomMode.parse(mode)
    patterns = tuple(p.pattern_id for p in enumerate_patterns(schedule_type))
    if mode is ClassroomMode.SELF_CONTAINED:
        return ExperimentCase(schedule_type, mode, patterns, 1, _SELF_CONTAINED_REPS.get(schedule_type, 3600), ventilation)
    reps = _DEPARTMENTALIZED_REPS.get(schedule_type, 100)
    return ExperimentCase(schedule_type, mode, patterns, DEPARTMENTALIZED_ROOM_PATTERNS, reps, ventilation)


def preset_experiment1(mode: ClassroomMode | str) -> ExperimentPlan:
    mode = ClassroomMode.parse(mode)
    cases = tuple(default_case(ScheduleType.T1, mode, q) for q in EXPERIMENT1_VENTILATION)
    return ExperimentPlan("experiment1", mode, cases)


def preset_experiment2(mode: ClassroomMode | str) -> ExperimentPlan:
    mode = ClassroomMode.parse(mode)
    return ExperimentPlan("experiment2", mode, tuple(default_case(t, mode) for t in ScheduleType))


def preset(experiment: int, mode: ClassroomMode | str) -> ExperimentPlan:
    if experiment == 1:
        return preset_experiment1(mode)
    if experiment == 2:
        return preset_experiment2(mode)
    raise ValueError(f"experiment must be 1 or 2, got {experiment}")


def restrict_plan(
    plan: ExperimentPlan,
    types: Sequence[ScheduleType] | None = None,
    ventilation: float | None = None,
    replications: int | None = None,
) -> ExperimentPlan:
    """Narrow a preset: keep some types, pin the ventilation rate, change replication counts."""
    cases = list(plan.cases)
    if types:
        cases = [c for c in cases if c.schedule_type in types]
    if ventilation is not None:
        pinned = []
        for c in cases:
            c = dataclasses.replace(c, ventilation=float(ventilation))
            if c not in pinned:
                pinned.append(c)
        cases = pinned
    if replications is not None:
        cases = [dataclasses.replace(c, replications=int(replications)) for c in cases]
    if not cases:
        raise ValueError("the selection leaves no cases to run")
    return ExperimentPlan(plan.name, plan.mode, tuple(cases))


@dataclass(frozen=True)
class PeakRecord:
    case: int
    pattern_id: int
    replication: int
    seed: int
    peak: int
    total_infected: int
    peak_day: int


@dataclass(frozen=True)
class _Chunk:
    case: int
    schedule_type: ScheduleType
    pattern_id: int
    room_pattern: int
    room_seed: int
    rep_start: int
    rep_stop: int
    reps_per_room: int
    school: SchoolConfig
    params: SimulationParams
    master_seed: int
    hist_week: int


@lru_cache(maxsize=8)
def _timetable(schedule_type, pattern_id, room_seed, school, weeks):
    pattern = enumerate_patterns(schedule_type)[pattern_id]
    return build_timetable(schedule_type, school, pattern, generate_room_pattern(school, room_seed), weeks)


def _run_chunk(chunk: _Chunk) -> tuple[list[PeakRecord], np.ndarray]:
    tt = _timetable(chunk.schedule_type, chunk.pattern_id, chunk.room_seed, chunk.school, chunk.params.horizon_weeks)
    records = []
    counts = np.zeros((7, N_BINS), dtype=np.int64)
    for rep in range(chunk.rep_start, chunk.rep_stop):
        seed = derive_seed(chunk.master_seed, rep, chunk.pattern_id, chunk.room_pattern)
        res = run_replication(ReplicationConfig(tt, None, chunk.school, chunk.params, seed))
        counts += histogram_counts(res, chunk.hist_week)
        records.append(
            PeakRecord(
                chunk.case,
                chunk.pattern_id,
                chunk.room_pattern * chunk.reps_per_room + rep,
                seed,
                res.peak_infected,
                res.total_ever_infected,
                res.peak_day,
            )
        )
    return records, counts


@dataclass
class CaseOutcome:
    case: ExperimentCase
    school: SchoolConfig
    records: list[PeakRecord]
    histogram: ProbabilityHistogram
    face_to_face_pct: float

    @property
    def peaks(self) -> np.ndarray:
        return np.array([r.peak for r in self.records])

    @property
    def ventilation(self) -> float:
        return self.school.classroom.clean_air_ventilation_rate


def default_parallelism() -> int:
    raw = os.environ.get(PARALLELISM_ENV)
    if raw:
        return max(1, int(raw))
    return os.cpu_count() or 1


def _case_school(case: ExperimentCase, school: SchoolConfig | None) -> SchoolConfig:
    base = school if school is not None else default_school(case.mode)
    if base.classroom_mode is not case.mode:
        raise ValueError(f"school config is {base.classroom_mode.value} but the plan runs {case.mode.value}")
    if case.ventilation is not None:
        base = dataclasses.replace(base, classroom=base.classroom.with_ventilation(case.ventilation))
    return base


def execute(
    plan: ExperimentPlan,
    master_seed: int = 0,
    parallelism: int = 1,
    params: SimulationParams | None = None,
    school: SchoolConfig | None = None,
    chunk_size: int = 200,
    hist_week: int = 0,
) -> list[CaseOutcome]:
    """Run every replication of ``plan``; results do not depend on ``parallelism``."""
    params = params or default_params()
    chunks: list[_Chunk] = []
    schools = []
    for ci, case in enumerate(plan.cases):
        sch = _case_school(case, school)
        ensure_valid(sch, params)
        schools.append(sch)
        for pid in case.pattern_ids:
            for room in range(case.room_patterns):
                room_seed = derive_room_seed(master_seed, room)
                for start in range(0, case.replications, chunk_size):
                    stop = min(start + chunk_size, case.replications)
                    chunks.append(
                        _Chunk(ci, case.schedule_type, pid, room, room_seed, start, stop, case.replications, sch, params, master_seed, hist_week)
                    )

    if parallelism > 1 and len(chunks) > 1:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            parts = list(pool.map(_run_chunk, chunks, chunksize=max(1, len(chunks) // (8 * parallelism))))
    else:
        parts = [_run_chunk(c) for c in chunks]

    outcomes = []
    for ci, case in enumerate(plan.cases):
        recs = [r for (rs, _), ch in zip(parts, chunks) if ch.case == ci for r in rs]
        recs.sort(key=lambda r: (r.pattern_id, r.replication))
        counts = sum((h for (_, h), ch in zip(parts, chunks) if ch.case == ci), np.zeros((7, N_BINS), dtype=np.int64))
        tt = _timetable(case.schedule_type, case.pattern_ids[0], derive_room_seed(master_seed, 0), schools[ci], params.horizon_weeks)
        outcomes.append(CaseOutcome(case, schools[ci], recs, ProbabilityHistogram(counts), face_to_face_percentage(tt, schools[ci])))
    return outcomes


def write_outputs(outcomes: Sequence[CaseOutcome], output_dir: Path) -> None:
    peaks_rows, summary_rows, hist_rows = [], [], []
    for out in outcomes:
        name, mode = out.case.schedule_type.name, out.case.mode.value
        q = out.ventilation
        for r in out.records:
            peaks_rows.append([name, mode, q, r.pattern_id, r.replication, r.seed, r.peak, r.total_infected, r.peak_day])
        summary_rows.append(summary_row(name, mode, q, summarize_values(out.peaks), out.face_to_face_pct))
        hist_rows.extend(histogram_rows(name, mode, q, out.histogram))
    write_csv(output_dir / "peaks.csv", PEAKS_HEADER, peaks_rows)
    write_csv(output_dir / "summary.csv", SUMMARY_HEADER, summary_rows)
    write_csv(output_dir / "histogram.csv", HISTOGRAM_HEADER, hist_rows)


def run(
    plan: ExperimentPlan,
    master_seed: int,
    parallelism: int,
    output_dir: str | Path,
    params: SimulationParams | None = None,
    school: SchoolConfig | None = None,
) -> list[CaseOutcome]:
    """Execute ``plan`` and write peaks/summary/histogram CSVs plus a manifest.

    Raises OSError when ``output_dir`` cannot be created or written.
    """
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    if not os.access(out, os.W_OK):
        raise PermissionError(13, "output directory is not writable", str(out))
    params = params or default_params()
    started = time.perf_counter()
    outcomes = execute(plan, master_seed, parallelism, params, school)
    write_outputs(outcomes, out)
    manifest = {
        "version": __version__,
        "master_seed": master_seed,
        "parallelism": parallelism,
        "plan": plan.to_dict(),
        "params": params.to_dict(),
        "schools": [o.school.to_dict() for o in outcomes],
        "wall_time_s": round(time.perf_counter() - started, 3),
        "python": platform.python_version(),
        "numpy": np.__version__,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return outcomes
