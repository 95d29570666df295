"""School schedule types, face-to-face patterns, room assignment and timetables.

Days are numbered from 0 (a Monday); day ``d`` is a weekend day when
``d % 7`` is 5 or 6. Periods are numbered from 0 within a day.
"""
from __future__ import annotations

import csv
import enum
import io
import itertools
from dataclasses import dataclass
from pathlib import Path
from typing import TextIO

import numpy as np

from .model import ClassroomMode, SchoolConfig

GROUP_LABELS = "ABCD"
DAYS_PER_WEEK = 7
SCHOOL_DAYS = 5
OFF = -1


@dataclass(frozen=True)
class ScheduleInfo:
    roman: str
    category: str
    groups: int
    groups_at_once: int
    face_to_face_pct: float
    peer_pct: float
    alias: str = ""


class ScheduleType(enum.Enum):
    T1 = ScheduleInfo("i", "Basic", 1, 1, 100, 100, "Pre-COVID-19")
    T2 = ScheduleInfo("ii", "Shortened", 1, 1, 100, 100)
    T3 = ScheduleInfo("iii", "Weeks", 1, 1, 75, 100)
    T4 = ScheduleInfo("iv", "Weeks", 4, 3, 75, 100)
    T5 = ScheduleInfo("v", "Weeks", 1, 1, 50, 100)
    T6 = ScheduleInfo("vi", "Weeks", 2, 1, 50, 50, "UNESCO 3")
    T7 = ScheduleInfo("vii", "Days", 2, 1, 50, 50, "UNESCO 2B")
    T8 = ScheduleInfo("viii", "Days", 2, 1, 50, 50, "UNESCO 2A")
    T9 = ScheduleInfo("ix", "Days", 2, 1, 50, 50, "UNESCO 1")
    T10 = ScheduleInfo("x", "Weeks", 4, 2, 50, 100)
    T11 = ScheduleInfo("xi", "Weeks", 1, 1, 25, 100)
    T12 = ScheduleInfo("xii", "Weeks", 4, 1, 25, 25)

    @property
    def info(self) -> ScheduleInfo:
        return self.value

    @property
    def number(self) -> int:
        return int(self.name[1:])

    @property
    def label(self) -> str:
        return f"({self.info.roman})"

    @classmethod
    def parse(cls, text: "str | int | ScheduleType") -> "ScheduleType":
        if isinstance(text, cls):
            return text
        raw = str(text).strip()
        key = raw.upper().lstrip("T")
        if key.isdigit() and f"T{int(key)}" in cls.__members__:
            return cls[f"T{int(key)}"]
        roman = raw.lower().strip("()")
        for t in cls:
            if t.info.roman == roman:
                return t
        raise ValueError(f"unknown schedule type: {text!r} (use T1..T12)")


@dataclass(frozen=True)
class GroupAssignment:
    """Contiguous, equally sized id blocks: group g holds ids [g*size, (g+1)*size)."""

    group_of: np.ndarray  # student index -> group index
    n_groups: int

    @classmethod
    def blocks(cls, total_students: int, n_groups: int) -> "GroupAssignment":
        if total_students % n_groups:
            raise ValueError(f"{total_students} students cannot form {n_groups} equal groups")
        size = total_students // n_groups
        return cls(np.arange(total_students) // size, n_groups)

    def members(self, group: int | str) -> np.ndarray:
        if isinstance(group, str):
            group = GROUP_LABELS.index(group)
        return np.flatnonzero(self.group_of == group)

    def label(self, student: int) -> str:
        return GROUP_LABELS[int(self.group_of[student])]

    @property
    def first_student(self) -> int:
        """Lowest id of Group A; the seeded infector by default."""
        return 0


@dataclass(frozen=True)
class FaceToFacePattern:
    """Groups attending in each week of a repeating cycle."""

    schedule_type: ScheduleType
    pattern_id: int
    weeks: tuple[frozenset[str], ...]

    @property
    def cycle_weeks(self) -> int:
        return len(self.weeks)

    def attending(self, week: int) -> frozenset[str]:
        return self.weeks[week % len(self.weeks)]

    def describe(self) -> str:
        return " ".join("".join(sorted(w)) or "-" for w in self.weeks)


def _weeks(*groups: str) -> tuple[frozenset[str], ...]:
    return tuple(frozenset(g) for g in groups)


def _canonical(schedule_type: ScheduleType) -> FaceToFacePattern:
    weeks = {
        ScheduleType.T1: _weeks("A"),
        ScheduleType.T2: _weeks("A"),
        ScheduleType.T3: _weeks("A", "A", "A", ""),
        ScheduleType.T5: _weeks("A", ""),
        ScheduleType.T6: _weeks("A", "B"),
        # day-based types: both groups share every week, split within it
        ScheduleType.T7: _weeks("AB"),
        ScheduleType.T8: _weeks("AB"),
        ScheduleType.T9: _weeks("AB"),
        ScheduleType.T11: _weeks("A", "", "", ""),
    }[schedule_type]
    return FaceToFacePattern(schedule_type, 0, weeks)


def _no_three_straight(weeks: tuple[frozenset[str], ...]) -> bool:
    n = len(weeks)
    for g in GROUP_LABELS:
        for start in range(n):
            if all(g in weeks[(start + k) % n] for k in range(3)):
                return False
    return True


def _pair_patterns() -> list[tuple[frozenset[str], ...]]:
    """Orderings of the six group pairs over six weeks, built by backtracking."""
    pairs = [frozenset(p) for p in itertools.combinations(GROUP_LABELS, 2)]
    found: list[tuple[frozenset[str], ...]] = []

    def extend(prefix: list[frozenset[str]], left: list[frozenset[str]]) -> None:
        if not left:
            if _no_three_straight(tuple(prefix)):
                found.append(tuple(prefix))
            return
        for i, pair in enumerate(left):
            if not prefix and "A" not in pair:
                continue
            # prune runs of three inside the prefix; the wrap-around is checked at the end
            if len(prefix) >= 2 and pair & prefix[-1] & prefix[-2]:
                continue
            extend(prefix + [pair], left[:i] + left[i + 1 :])

    extend([], pairs)
    return found


def enumerate_patterns(schedule_type: ScheduleType) -> list[FaceToFacePattern]:
    """All face-to-face week patterns of a type, in a fixed order.

    Types (iv), (x) and (xii) have several; every other type has one.
    """
    schedule_type = ScheduleType.parse(schedule_type)
    if schedule_type is ScheduleType.T10:
        cycles = _pair_patterns()
    elif schedule_type is ScheduleType.T4:
        everyone = frozenset(GROUP_LABELS)
        cycles = [
            tuple(everyone - {g} for g in order)
            for order in itertools.permutations(GROUP_LABELS)
            if order[0] != "A"
        ]
    elif schedule_type is ScheduleType.T12:
        cycles = [tuple(frozenset(g) for g in ("A",) + rest) for rest in itertools.permutations("BCD")]
    else:
        return [_canonical(schedule_type)]
    return [FaceToFacePattern(schedule_type, i, weeks) for i, weeks in enumerate(cycles)]


def get_pattern(schedule_type: ScheduleType, pattern_id: int = 0) -> FaceToFacePattern:
    patterns = enumerate_patterns(schedule_type)
    if not 0 <= pattern_id < len(patterns):
        raise ValueError(f"type {schedule_type.label} has patterns 0..{len(patterns) - 1}, got {pattern_id}")
    return patterns[pattern_id]


@dataclass(frozen=True)
class RoomPattern:
    """Room of every student for each (day of week, period) slot, repeated weekly."""

    rooms: np.ndarray  # (7, lessons_per_day, total_students) int16
    n_rooms: int
    seed: int | None = None

    def room_of(self, day: int, period: int) -> np.ndarray:
        return self.rooms[day % DAYS_PER_WEEK, period]


def generate_room_pattern(config: SchoolConfig, seed: int | None = None) -> RoomPattern:
    n, lessons = config.total_students, config.lessons_per_day
    if config.classroom_mode is ClassroomMode.SELF_CONTAINED or config.classrooms_per_lesson == 1:
        return RoomPattern(np.zeros((DAYS_PER_WEEK, lessons, n), dtype=np.int16), 1, seed)
    rng = np.random.default_rng(seed)
    size = config.class_size
    rooms = np.empty((DAYS_PER_WEEK, lessons, n), dtype=np.int16)
    seat_room = (np.arange(n) // size).astype(np.int16)
    for dow in range(DAYS_PER_WEEK):
        for period in range(lessons):
            rooms[dow, period, rng.permutation(n)] = seat_room
    return RoomPattern(rooms, config.classrooms_per_lesson, seed)


@dataclass(frozen=True)
class Timetable:
    """Room id per (student, day, period), or -1 when the student is not at school."""

    slots: np.ndarray  # (students, days, lessons) int16
    n_rooms: int
    schedule_type: ScheduleType | None = None
    pattern_id: int = 0
    cycle_weeks: int = 1
    groups: GroupAssignment | None = None

    @property
    def n_students(self) -> int:
        return self.slots.shape[0]

    @property
    def n_days(self) -> int:
        return self.slots.shape[1]

    @property
    def lessons_per_day(self) -> int:
        return self.slots.shape[2]

    def attendance(self) -> np.ndarray:
        return self.slots >= 0

    def occupancy(self, day: int, period: int) -> np.ndarray:
        """Number of scheduled students in each room for one slot."""
        rooms = self.slots[:, day, period]
        return np.bincount(rooms[rooms >= 0], minlength=self.n_rooms)

    def write_csv(self, out: "TextIO | str | Path") -> None:
        """One row per student, day and period; absent slots read ``off``."""
        if isinstance(out, (str, Path)):
            with open(out, "w", newline="") as fh:
                self.write_csv(fh)
            return
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["student", "group", "day", "period", "room"])
        for s in range(self.n_students):
            group = self.groups.label(s) if self.groups is not None else ""
            for d in range(self.n_days):
                for p in range(self.lessons_per_day):
                    room = int(self.slots[s, d, p])
                    writer.writerow([s + 1, group, d, p, room if room >= 0 else "off"])

    def to_csv_string(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()


def _halves(lessons: int) -> tuple[slice, slice]:
    # odd counts give the morning the extra lesson (4 + 3 for 7 lessons)
    mid = (lessons + 1) // 2
    return slice(0, mid), slice(mid, lessons)


def group_attendance(
    schedule_type: ScheduleType, pattern: FaceToFacePattern, n_groups: int, lessons: int, weeks: int
) -> np.ndarray:
    """Boolean (groups, days, lessons) grid of face-to-face slots per group."""
    days = weeks * DAYS_PER_WEEK
    grid = np.zeros((n_groups, days, lessons), dtype=bool)
    morning, afternoon = _halves(lessons)
    for week in range(weeks):
        base = week * DAYS_PER_WEEK
        present = [GROUP_LABELS.index(g) for g in pattern.attending(week)]
        if schedule_type is ScheduleType.T2:
            short = max(lessons - 1, 1)
            grid[0, base : base + SCHOOL_DAYS, :short] = True
            grid[0, base + SCHOOL_DAYS, : max(short - 1, 1)] = True
        elif schedule_type is ScheduleType.T7:
            first, second = (0, 1) if week % 2 == 0 else (1, 0)
            grid[first, base : base + 2, :] = True
            grid[first, base + 2, morning] = True
            grid[second, base + 2, afternoon] = True
            grid[second, base + 3 : base + SCHOOL_DAYS, :] = True
        elif schedule_type is ScheduleType.T8:
            for dow in range(SCHOOL_DAYS):
                grid[(week * SCHOOL_DAYS + dow) % 2, base + dow, :] = True
        elif schedule_type is ScheduleType.T9:
            am, pm = (0, 1) if week % 2 == 0 else (1, 0)
            grid[am, base : base + SCHOOL_DAYS, morning] = True
            grid[pm, base : base + SCHOOL_DAYS, afternoon] = True
        else:
            for g in present:
                grid[g, base : base + SCHOOL_DAYS, :] = True
    return grid


def build_timetable(
    schedule_type: ScheduleType,
    config: SchoolConfig,
    pattern: FaceToFacePattern | None = None,
    room_pattern: RoomPattern | None = None,
    weeks: int = 12,
) -> Timetable:
    schedule_type = ScheduleType.parse(schedule_type)
    if pattern is None:
        pattern = get_pattern(schedule_type, 0)
    if pattern.schedule_type is not schedule_type:
        raise ValueError(f"pattern belongs to type {pattern.schedule_type.label}, not {schedule_type.label}")
    if room_pattern is None:
        room_pattern = generate_room_pattern(config, 0)
    expected = (DAYS_PER_WEEK, config.lessons_per_day, config.total_students)
    if room_pattern.rooms.shape != expected or room_pattern.n_rooms != config.classrooms_per_lesson:
        raise ValueError(
            f"room pattern shape {room_pattern.rooms.shape} with {room_pattern.n_rooms} rooms does not fit "
            f"{config.classroom_mode.value} config {expected} with {config.classrooms_per_lesson} rooms"
        )
    groups = GroupAssignment.blocks(config.total_students, schedule_type.info.groups)
    grid = group_attendance(schedule_type, pattern, groups.n_groups, config.lessons_per_day, weeks)
    present = grid[groups.group_of]  # (students, days, lessons)
    dow = np.arange(weeks * DAYS_PER_WEEK) % DAYS_PER_WEEK
    rooms = room_pattern.rooms[dow].transpose(2, 0, 1)  # (students, days, lessons)
    slots = np.where(present, rooms, OFF).astype(np.int16)
    return Timetable(slots, room_pattern.n_rooms, schedule_type, pattern.pattern_id, pattern.cycle_weeks, groups)


def face_to_face_percentage(timetable: Timetable, config: SchoolConfig) -> float:
    """Attended lesson slots relative to the five-day, full-day baseline of type (i)."""
    weeks = timetable.n_days / DAYS_PER_WEEK
    baseline = config.total_students * weeks * SCHOOL_DAYS * config.lessons_per_day
    return 100.0 * float(np.count_nonzero(timetable.slots >= 0)) / baseline


def peer_exposure_percentage(timetable: Timetable, grouping: GroupAssignment | None = None) -> float:
    """Share of the student body (the student included) present at school in some
    slot together with a representative student, the first member of Group A.

    Co-presence is counted per (day, period) regardless of room, so both classroom
    modes report the group-level figure.
    """
    grouping = grouping if grouping is not None else timetable.groups
    student = int(grouping.members(0)[0]) if grouping is not None else 0
    att = timetable.slots >= 0
    mine = att[student]
    met = (att & mine).any(axis=(1, 2))
    met[student] = True
    return 100.0 * float(met.mean())
