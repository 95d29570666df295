"""School virus infection simulator: airborne spread under school schedules."""

__version__ = "0.1.0"

from .model import (  # noqa: E402
    AgentState,
    ClassroomMode,
    ClassroomSpec,
    ConfigError,
    InfectionPhase,
    LessonExposure,
    SchoolConfig,
    SimulationParams,
    default_params,
    default_school,
    validate,
)
from .infection import infection_probability  # noqa: E402
from .scheduling import ScheduleType, build_timetable, enumerate_patterns, generate_room_pattern  # noqa: E402
from .engine import ReplicationConfig, ReplicationResult, derive_substream, run_replication  # noqa: E402

__all__ = [
    "AgentState",
    "ClassroomMode",
    "ClassroomSpec",
    "ConfigError",
    "InfectionPhase",
    "LessonExposure",
    "ReplicationConfig",
    "ReplicationResult",
    "ScheduleType",
    "SchoolConfig",
    "SimulationParams",
    "build_timetable",
    "default_params",
    "default_school",
    "derive_substream",
    "enumerate_patterns",
    "generate_room_pattern",
    "infection_probability",
    "run_replication",
    "validate",
]
