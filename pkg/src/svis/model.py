"""Domain types, parameter defaults and config validation.

Everything here is an immutable value; simulation logic lives elsewhere.
"""
from __future__ import annotations

import dataclasses
import enum
from dataclasses import dataclass, field
from typing import Any, NamedTuple


class ClassroomMode(str, enum.Enum):
    SELF_CONTAINED = "self-contained"
    DEPARTMENTALIZED = "departmentalized"

    @classmethod
    def parse(cls, value: "str | ClassroomMode") -> "ClassroomMode":
        if isinstance(value, cls):
            return value
        text = str(value).strip().lower().replace("_", "-")
        for mode in cls:
            if mode.value == text or mode.name.lower().replace("_", "-") == text:
                return mode
        raise ValueError(f"unknown classroom mode: {value!r}")


class InfectionPhase(enum.IntEnum):
    """Disease phases in the order an agent moves through them."""

    SUSCEPTIBLE = 0
    EXPOSED = 1
    INFECTIOUS_EXPOSED = 2
    INFECTIOUS = 3
    ASYMPTOMATIC = 4
    RECOVERED = 5


# from-phase -> allowed next phases
LEGAL_TRANSITIONS: dict[InfectionPhase, tuple[InfectionPhase, ...]] = {
    InfectionPhase.SUSCEPTIBLE: (InfectionPhase.EXPOSED,),
    InfectionPhase.EXPOSED: (InfectionPhase.INFECTIOUS_EXPOSED,),
    InfectionPhase.INFECTIOUS_EXPOSED: (InfectionPhase.INFECTIOUS, InfectionPhase.ASYMPTOMATIC),
    InfectionPhase.INFECTIOUS: (InfectionPhase.RECOVERED,),
    InfectionPhase.ASYMPTOMATIC: (InfectionPhase.RECOVERED,),
    InfectionPhase.RECOVERED: (),
}


@dataclass(frozen=True)
class SimulationParams:
    """Epidemiological and respiratory constants plus the simulated horizon."""

    pulmonary_ventilation_rate: float = 0.54  # m3/h
    quanta_generation_rate: float = 48.0  # quanta/h
    exhalation_filtration_efficiency: float = 0.5
    respiration_filtration_efficiency: float = 0.5
    asymptomatic_rate: float = 0.3
    exposed_days: int = 3
    infectious_exposed_days: int = 2
    infectious_days: int = 14
    asymptomatic_days: int = 8
    horizon_weeks: int = 12

    @property
    def horizon_days(self) -> int:
        return 7 * self.horizon_weeks

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "SimulationParams":
        _reject_unknown(cls, data, "params")
        return cls(**data)


@dataclass(frozen=True)
class ClassroomSpec:
    """One classroom. The clean-air rate is volume x air changes unless overridden."""

    volume: float = 150.0  # m3
    air_change_rate: float = 3.0  # 1/h
    ventilation_override: float | None = None  # m3/h

    @property
    def clean_air_ventilation_rate(self) -> float:
        if self.ventilation_override is not None:
            return self.ventilation_override
        return self.volume * self.air_change_rate

    def with_ventilation(self, rate: float | None) -> "ClassroomSpec":
        return dataclasses.replace(self, ventilation_override=rate)

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"volume": self.volume, "air_change_rate": self.air_change_rate}
        if self.ventilation_override is not None:
            out["clean_air_ventilation_rate"] = self.ventilation_override
        return out

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ClassroomSpec":
        data = dict(data)
        override = data.pop("clean_air_ventilation_rate", None)
        if "ventilation_override" in data:
            override = data.pop("ventilation_override")
        _reject_unknown(cls, data, "school.classroom")
        return cls(**data, ventilation_override=override)


@dataclass(frozen=True)
class SchoolConfig:
    classroom_mode: ClassroomMode = ClassroomMode.SELF_CONTAINED
    total_students: int = 24
    classrooms_per_lesson: int = 1
    lessons_per_day: int = 7
    lesson_minutes: float = 50.0
    classroom: ClassroomSpec = field(default_factory=ClassroomSpec)

    @property
    def class_size(self) -> int:
        return self.total_students // self.classrooms_per_lesson

    def to_dict(self) -> dict[str, Any]:
        return {
            "classroom_mode": self.classroom_mode.value,
            "total_students": self.total_students,
            "classrooms_per_lesson": self.classrooms_per_lesson,
            "lessons_per_day": self.lessons_per_day,
            "lesson_minutes": self.lesson_minutes,
            "classroom": self.classroom.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "SchoolConfig":
        data = dict(data)
        mode = ClassroomMode.parse(data.pop("classroom_mode", ClassroomMode.SELF_CONTAINED))
        # unspecified counts fall back to the defaults of the chosen mode
        base = default_school(mode)
        room = data.pop("classroom", None)
        _reject_unknown(cls, data, "school")
        classroom = ClassroomSpec.from_dict(room) if room is not None else base.classroom
        return dataclasses.replace(base, classroom=classroom, **data)


class AgentState(NamedTuple):
    student_id: int
    phase: InfectionPhase
    phase_entry_day: int


@dataclass(frozen=True)
class LessonExposure:
    """Who shares one room during one lesson. New cases are S x P and are not stored."""

    infector_count: int
    susceptible_count: int
    exposure_minutes: float
    room: ClassroomSpec


def default_params() -> SimulationParams:
    return SimulationParams()


def default_school(mode: "ClassroomMode | str" = ClassroomMode.SELF_CONTAINED) -> SchoolConfig:
    mode = ClassroomMode.parse(mode)
    if mode is ClassroomMode.SELF_CONTAINED:
        return SchoolConfig(mode, total_students=24, classrooms_per_lesson=1)
    return SchoolConfig(mode, total_students=480, classrooms_per_lesson=20)


@dataclass(frozen=True)
class ValidationIssue:
    path: str
    message: str

    def __str__(self) -> str:
        return f"{self.path}: {self.message}"


def validate(config: SchoolConfig, params: SimulationParams) -> list[ValidationIssue]:
    """Return every violated invariant; an empty list means the inputs are usable."""
    issues: list[ValidationIssue] = []

    def check(ok: bool, path: str, message: str) -> None:
        if not ok:
            issues.append(ValidationIssue(path, message))

    p = params
    check(p.pulmonary_ventilation_rate > 0, "SimulationParams.pulmonary_ventilation_rate", "must be > 0")
    check(p.quanta_generation_rate >= 0, "SimulationParams.quanta_generation_rate", "must be >= 0")
    for name in ("exhalation_filtration_efficiency", "respiration_filtration_efficiency", "asymptomatic_rate"):
        value = getattr(p, name)
        check(0.0 <= value <= 1.0, f"SimulationParams.{name}", f"must lie in [0, 1], got {value}")
    for name in ("exposed_days", "infectious_exposed_days", "infectious_days", "asymptomatic_days", "horizon_weeks"):
        value = getattr(p, name)
        check(isinstance(value, int) and value >= 1, f"SimulationParams.{name}", f"must be an integer >= 1, got {value!r}")

    room = config.classroom
    check(room.volume > 0, "ClassroomSpec.volume", f"must be > 0, got {room.volume}")
    check(room.air_change_rate > 0, "ClassroomSpec.air_change_rate", f"must be > 0, got {room.air_change_rate}")
    check(
        room.clean_air_ventilation_rate > 0,
        "ClassroomSpec.clean_air_ventilation_rate",
        f"must be > 0, got {room.clean_air_ventilation_rate}",
    )

    check(config.total_students >= 1, "SchoolConfig.total_students", "must be >= 1")
    check(config.classrooms_per_lesson >= 1, "SchoolConfig.classrooms_per_lesson", "must be >= 1")
    if config.total_students >= 1 and config.classrooms_per_lesson >= 1:
        check(
            config.total_students % config.classrooms_per_lesson == 0,
            "SchoolConfig.total_students",
            f"{config.total_students} students not divisible by {config.classrooms_per_lesson} classrooms",
        )
    if config.classroom_mode is ClassroomMode.SELF_CONTAINED:
        check(config.classrooms_per_lesson == 1, "SchoolConfig.classrooms_per_lesson", "self-contained mode uses one classroom")
    check(1 <= config.lessons_per_day <= 24, "SchoolConfig.lessons_per_day", "must lie in [1, 24]")
    check(config.lesson_minutes >= 0, "SchoolConfig.lesson_minutes", "must be >= 0")
    return issues


class ConfigError(ValueError):
    """Raised when a config cannot be used; carries the validation issues."""

    def __init__(self, issues: list[ValidationIssue]):
        self.issues = issues
        super().__init__("; ".join(str(i) for i in issues))


def ensure_valid(config: SchoolConfig, params: SimulationParams) -> None:
    issues = validate(config, params)
    if issues:
        raise ConfigError(issues)


def _reject_unknown(cls: type, data: dict[str, Any], where: str) -> None:
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError([ValidationIssue(f"{where}.{k}", "unknown key") for k in unknown])
