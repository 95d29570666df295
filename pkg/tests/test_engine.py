import csv
import dataclasses
import io
import math

import numpy as np
import pytest

from svis.engine import ReplicationConfig, derive_seed, derive_substream, run_replication
from svis.infection import dose_per_infector
from svis.model import ClassroomMode, ConfigError, InfectionPhase, SchoolConfig, default_params, default_school
from svis.scheduling import ScheduleType, Timetable, build_timetable, generate_room_pattern, get_pattern

S, E, IE, I, A, R = InfectionPhase
PARAMS = default_params()
SC = default_school(ClassroomMode.SELF_CONTAINED)
DC = default_school(ClassroomMode.DEPARTMENTALIZED)
P1 = 0.01192828713806946  # one infector, defaults; mpmath oracle


def run(stype, school=SC, seed=0, pattern=0, room_seed=0, **kw):
    tt = build_timetable(stype, school, get_pattern(stype, pattern), generate_room_pattern(school, room_seed))
    return run_replication(ReplicationConfig(tt, None, school, PARAMS, seed), **kw)


def test_no_seed_no_infection():
    tt = build_timetable(ScheduleType.T1, SC)
    res = run_replication(ReplicationConfig(tt, None, SC, PARAMS, 1, initial_infections=[]))
    assert (res.cell_probabilities == 0).all()
    assert res.peak_infected == 0 and res.total_ever_infected == 0
    assert (res.daily_phase_counts[:, S] == 24).all()


def test_type_xi_day_zero_cells():
    res = run(ScheduleType.T11, seed=5)
    assert res.cell_probabilities[0, 0] == pytest.approx([P1] * 7, abs=1e-12)


def test_staged_classroom_has_eight_infectors():
    school = SchoolConfig(ClassroomMode.SELF_CONTAINED, 108, 1, 1, 50.0)
    tt = Timetable(np.zeros((108, 1, 1), dtype=np.int16), 1)
    staged = {i: IE for i in range(5)} | {i: A for i in range(5, 8)}
    rc = ReplicationConfig(tt, None, school, PARAMS, 3, initial_infections=[], initial_phases=staged)
    res = run_replication(rc)
    expected = -math.expm1(-8 * dose_per_infector(PARAMS, school.classroom, 50))
    assert res.cell_probabilities[0, 0, 0] == pytest.approx(expected, abs=1e-15)
    assert expected == pytest.approx(1 - math.exp(-8 * 0.012), abs=1e-12)


def test_substreams_are_reproducible():
    a = derive_substream(42, 0).bytes(4096)
    assert a == derive_substream(42, 0).bytes(4096)
    assert a != derive_substream(42, 1).bytes(4096)


def test_substreams_do_not_overlap():
    a = derive_substream(42, 0).integers(0, 2**63, size=10**6)
    b = derive_substream(42, 1).integers(0, 2**63, size=10**6)
    assert np.intersect1d(a, b).size == 0


def test_substreams_distinct_across_replications():
    seeds = {derive_seed(42, k) for k in range(3600)}
    assert len(seeds) == 3600
    prefixes = {derive_substream(42, k).bytes(16) for k in range(3600)}
    assert len(prefixes) == 3600


def test_seed_keys_include_pattern_and_room():
    assert len({derive_seed(0, 0, p, r) for p in range(48) for r in range(20)}) == 960
    assert derive_seed(0, 5, 2, 3) == derive_seed(0, 5, 2, 3)


@pytest.mark.parametrize("stype", list(ScheduleType))
@pytest.mark.parametrize("school", [SC, DC], ids=["self-contained", "departmentalized"])
def test_replication_invariants(stype, school):
    res = run(stype, school, seed=stype.number, trace=True)
    counts = res.daily_phase_counts
    assert (counts.sum(axis=1) == school.total_students).all()
    assert (np.diff(res.cumulative_infected) >= 0).all()
    assert res.peak_infected == res.infected_series.max()
    assert res.infected_series[res.peak_day] == res.peak_infected
    assert res.total_ever_infected == res.cumulative_infected[-1] == res.new_infections.sum() + 1
    weekend = np.arange(84) % 7 >= (6 if stype is ScheduleType.T2 else 5)
    assert (res.cell_probabilities[weekend] == 0).all()
    # nobody with symptoms attends
    assert not (res.trace_attended & (res.trace_phases == I)).any()
    # attendance only on scheduled days
    scheduled = (build_timetable(stype, school, None, generate_room_pattern(school, 0)).slots >= 0).any(axis=2).T
    assert not (res.trace_attended & ~scheduled).any()


PATHS = {(S,), (S, E), (S, E, IE), (S, E, IE, I), (S, E, IE, I, R), (S, E, IE, A), (S, E, IE, A, R)}


def _segments(row):
    out = []
    for day, ph in enumerate(row):
        if out and out[-1][0] == ph:
            out[-1][2] += 1
        else:
            out.append([int(ph), day, 1])
    return out


@pytest.mark.parametrize("stype", [ScheduleType.T1, ScheduleType.T5, ScheduleType.T10])
def test_phase_paths_and_durations(stype):
    durations = {E: 3, IE: 2, I: 14, A: 8}
    for seed in range(15):
        res = run(stype, seed=seed, trace=True)
        for student, row in enumerate(res.trace_phases.T):
            segs = _segments(row)
            path = tuple(InfectionPhase(s[0]) for s in segs)
            if student == 0:  # the seed starts infectious-exposed
                assert path[0] is IE or (path[0] is S and path[1] is IE)
                path = (S, E) + path[path.index(IE):]
            assert path in PATHS
            # every phase that both started and ended inside the horizon lasted exactly its duration
            for ph, start, length in segs[:-1]:
                if ph in durations and start > 0:
                    assert length == durations[ph], (student, segs)


def test_determinism():
    a = run(ScheduleType.T10, DC, seed=9, pattern=4, room_seed=2)
    b = run(ScheduleType.T10, DC, seed=9, pattern=4, room_seed=2)
    for f in dataclasses.fields(a):
        x, y = getattr(a, f.name), getattr(b, f.name)
        assert np.array_equal(x, y) if isinstance(x, np.ndarray) else x == y


def test_departmentalized_day_zero_single_infected_room():
    res = run(ScheduleType.T11, DC, seed=1)
    day0 = res.cell_probabilities[0]
    assert ((day0 > 0).sum(axis=0) == 1).all()
    assert day0[day0 > 0] == pytest.approx([P1] * 7, abs=1e-12)


def _tiny():
    school = SchoolConfig(ClassroomMode.SELF_CONTAINED, 2, 1, 1, 50.0)
    return school, Timetable(np.zeros((2, 1, 1), dtype=np.int16), 1)


@pytest.mark.parametrize("sampling", ["day", "period"])
def test_small_instance_matches_bernoulli(sampling):
    school, tt = _tiny()
    n = 10**5
    hits = sum(
        int(run_replication(ReplicationConfig(tt, None, school, PARAMS, derive_seed(1, k)), sampling=sampling).new_infections[0])
        for k in range(n)
    )
    assert abs(hits / n - P1) <= 3 * math.sqrt(P1 * (1 - P1) / n)


@pytest.mark.parametrize("sampling", ["day", "period"])
def test_day_zero_infections_match_binomial(sampling):
    # 23 susceptibles, each exposed for 7 lessons to the single seed
    p_day = 1 - (1 - P1) ** 7
    n = 1500
    total = sum(int(run(ScheduleType.T1, seed=derive_seed(2, k), sampling=sampling).new_infections[0]) for k in range(n))
    mean, sd = 23 * p_day, math.sqrt(23 * p_day * (1 - p_day) / n)
    assert abs(total / n - mean) <= 3 * sd


def test_sampling_routes_agree_in_distribution():
    n = 600
    day = [run(ScheduleType.T10, seed=derive_seed(3, k), sampling="day").peak_infected for k in range(n)]
    per = [run(ScheduleType.T10, seed=derive_seed(4, k), sampling="period").peak_infected for k in range(n)]
    se = math.sqrt(np.var(day) / n + np.var(per) / n)
    assert abs(np.mean(day) - np.mean(per)) <= 3.5 * se


def test_later_seed_infection_applies_on_its_day():
    tt = build_timetable(ScheduleType.T1, SC)
    res = run_replication(ReplicationConfig(tt, None, SC, PARAMS, 0, initial_infections=[(5, 9)], ), trace=True)
    assert (res.cell_probabilities[:9] == 0).all()
    assert res.trace_phases[9, 5] == IE
    assert res.trace_phases[8, 5] == S


def test_invalid_config_rejected_before_start():
    tt = build_timetable(ScheduleType.T1, SC)
    bad = dataclasses.replace(SC, classroom=dataclasses.replace(SC.classroom, volume=0.0))
    with pytest.raises(ConfigError):
        run_replication(ReplicationConfig(tt, None, bad, PARAMS))
    with pytest.raises(ValueError):
        run_replication(ReplicationConfig(tt, None, SC, PARAMS, initial_infections=[(24, 0)]))
    with pytest.raises(ValueError):
        run_replication(ReplicationConfig(tt, None, SC, PARAMS, initial_infections=[(0, 84)]))
    with pytest.raises(ValueError):
        run_replication(ReplicationConfig(tt, None, DC, PARAMS))
    with pytest.raises(ValueError):
        run_replication(ReplicationConfig(tt, None, SC, PARAMS), sampling="hour")


def test_trace_dump():
    res = run(ScheduleType.T12, seed=4, trace=True)
    buf = io.StringIO()
    res.write_trace(buf)
    rows = list(csv.reader(io.StringIO(buf.getvalue())))
    assert rows[0] == ["day", "student", "phase", "attended"]
    assert len(rows) == 1 + 84 * 24
    assert rows[1] == ["0", "1", "infectious_exposed", "1"]
    with pytest.raises(ValueError):
        run(ScheduleType.T12).write_trace(io.StringIO())
