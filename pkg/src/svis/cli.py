"""Command-line front end.

Precedence for every setting: explicit flag > config file > experiment preset.

Config file (JSON) keys mirror the library field names::

    {
      "params": {"quanta_generation_rate": 48, "horizon_weeks": 12, ...},
      "school": {"lessons_per_day": 7, "lesson_minutes": 50,
                 "classroom": {"volume": 150, "air_change_rate": 3,
                               "clean_air_ventilation_rate": 450}},
      "experiment": {"experiment": 2, "mode": "self-contained", "types": ["T1", "T12"],
                     "ventilation": 450, "replications": 100, "seed": 0,
                     "parallelism": 4, "out": "results"}
    }

Exit codes: 0 success, 1 bad configuration, 2 runtime or I/O failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path
from typing import Any

from . import __version__
from .engine import ReplicationConfig, derive_room_seed, derive_seed, run_replication
from .experiments import PARALLELISM_ENV, default_parallelism, preset, restrict_plan, run
from .metrics import face_to_face_report, format_schedule_report
from .model import ClassroomMode, ConfigError, SchoolConfig, SimulationParams, ValidationIssue, default_school, validate
from .scheduling import ScheduleType, build_timetable, enumerate_patterns, generate_room_pattern

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2
_EXPERIMENT_KEYS = {"experiment", "mode", "types", "type", "ventilation", "replications", "seed", "parallelism", "out"}


def _load_config(path: str | None) -> dict[str, Any]:
    if not path:
        return {}
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError([ValidationIssue("--config", f"cannot read {path}: {exc.strerror}")]) from exc
    except json.JSONDecodeError as exc:
        raise ConfigError([ValidationIssue("--config", f"{path} is not valid JSON: {exc}")]) from exc
    if not isinstance(data, dict):
        raise ConfigError([ValidationIssue("--config", "top level must be an object")])
    unknown = sorted(set(data) - {"params", "school", "experiment"})
    if unknown:
        raise ConfigError([ValidationIssue(k, "unknown section") for k in unknown])
    bad = sorted(set(data.get("experiment", {})) - _EXPERIMENT_KEYS)
    if bad:
        raise ConfigError([ValidationIssue(f"experiment.{k}", "unknown key") for k in bad])
    return data


def _pick(flag: Any, section: dict[str, Any], key: str, default: Any = None) -> Any:
    if flag is not None:
        return flag
    return section.get(key, default)


def _school_for(mode: ClassroomMode, raw: dict[str, Any] | None) -> SchoolConfig:
    if not raw:
        return default_school(mode)
    raw = dict(raw)
    raw.setdefault("classroom_mode", mode.value)
    school = SchoolConfig.from_dict(raw)
    if school.classroom_mode is not mode:
        raise ConfigError([ValidationIssue("school.classroom_mode", f"conflicts with --mode {mode.value}")])
    return school


def _types(values: list[str] | None) -> list[ScheduleType] | None:
    if not values:
        return None
    try:
        return [ScheduleType.parse(v) for v in values]
    except ValueError as exc:
        raise ConfigError([ValidationIssue("type", str(exc))]) from exc


def cmd_run(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config)
    exp = cfg.get("experiment", {})
    experiment = int(_pick(args.experiment, exp, "experiment", 2))
    if experiment not in (1, 2):
        raise ConfigError([ValidationIssue("experiment", f"must be 1 or 2, got {experiment}")])
    try:
        mode = ClassroomMode.parse(_pick(args.mode, exp, "mode", "self-contained"))
    except ValueError as exc:
        raise ConfigError([ValidationIssue("mode", str(exc))]) from exc
    types_raw = args.type or exp.get("types") or ([exp["type"]] if "type" in exp else None)
    params = SimulationParams.from_dict(cfg["params"]) if "params" in cfg else SimulationParams()
    school = _school_for(mode, cfg.get("school"))
    issues = validate(school, params)
    if issues:
        raise ConfigError(issues)

    replications = _pick(args.replications, exp, "replications")
    if replications is not None and int(replications) < 1:
        raise ConfigError([ValidationIssue("replications", "must be >= 1")])
    ventilation = _pick(args.ventilation, exp, "ventilation")
    if ventilation is not None and float(ventilation) <= 0:
        raise ConfigError([ValidationIssue("ventilation", "must be > 0")])
    plan = restrict_plan(preset(experiment, mode), _types(types_raw), ventilation, replications)

    seed = int(_pick(args.seed, exp, "seed", 0))
    parallelism = int(_pick(args.parallelism, exp, "parallelism", default_parallelism()))
    out = Path(_pick(args.out, exp, "out", "svis-output"))
    print(f"{plan.name} {mode.value}: {len(plan.cases)} cases, {plan.total_replications} replications -> {out}", file=sys.stderr)
    outcomes = run(plan, seed, parallelism, out, params, school)
    for o in outcomes:
        peaks = sorted(o.peaks)
        median = peaks[len(peaks) // 2] if len(peaks) % 2 else (peaks[len(peaks) // 2 - 1] + peaks[len(peaks) // 2]) / 2
        print(
            f"{o.case.schedule_type.label:<7} Q={o.ventilation:<7g} n={len(peaks):<6} median peak={median:<6g} f2f={o.face_to_face_pct:g}%"
        )
    return EXIT_OK


def cmd_schedules(args: argparse.Namespace) -> int:
    mode = ClassroomMode.parse(args.mode)
    school = default_school(mode)
    tables = {t: build_timetable(t, school, None, generate_room_pattern(school, 0), args.weeks) for t in ScheduleType}
    print(format_schedule_report(face_to_face_report(tables, school)))
    return EXIT_OK


def cmd_patterns(args: argparse.Namespace) -> int:
    t = ScheduleType.parse(args.type)
    patterns = enumerate_patterns(t)
    print(f"type {t.label}: {len(patterns)} pattern(s)")
    for p in patterns:
        print(f"{p.pattern_id:>3}  {p.describe()}")
    return EXIT_OK


def cmd_timetable(args: argparse.Namespace) -> int:
    mode = ClassroomMode.parse(args.mode)
    school = default_school(mode)
    t = ScheduleType.parse(args.type)
    patterns = enumerate_patterns(t)
    if not 0 <= args.pattern < len(patterns):
        raise ConfigError([ValidationIssue("--pattern", f"type {t.label} has patterns 0..{len(patterns) - 1}")])
    rooms = generate_room_pattern(school, derive_room_seed(args.seed, args.room_pattern))
    tt = build_timetable(t, school, patterns[args.pattern], rooms, args.weeks)
    if args.out:
        tt.write_csv(args.out)
    else:
        tt.write_csv(sys.stdout)
    return EXIT_OK


def cmd_trace(args: argparse.Namespace) -> int:
    mode = ClassroomMode.parse(args.mode)
    school = default_school(mode)
    if args.ventilation is not None:
        school = dataclasses.replace(school, classroom=school.classroom.with_ventilation(args.ventilation))
    t = ScheduleType.parse(args.type)
    patterns = enumerate_patterns(t)
    rooms = generate_room_pattern(school, derive_room_seed(args.seed, args.room_pattern))
    tt = build_timetable(t, school, patterns[args.pattern], rooms)
    seed = derive_seed(args.seed, args.replication, args.pattern, args.room_pattern)
    res = run_replication(ReplicationConfig(tt, rooms, school, SimulationParams(), seed), trace=True)
    if args.out:
        res.write_trace(args.out)
    else:
        res.write_trace(sys.stdout)
    print(f"peak {res.peak_infected} on day {res.peak_day}, {res.total_ever_infected} ever infected", file=sys.stderr)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="svis", description="Simulate airborne infection spread under school schedules.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment preset and write CSV outputs")
    p.add_argument("--experiment", type=int, choices=(1, 2))
    p.add_argument("--mode", choices=[m.value for m in ClassroomMode])
    p.add_argument("--type", action="append", metavar="T1..T12", help="restrict to a schedule type (repeatable)")
    p.add_argument("--ventilation", type=float, metavar="Q", help="clean-air ventilation rate, m3/h")
    p.add_argument("--replications", type=int, metavar="N", help="replications per pattern combination")
    p.add_argument("--seed", type=int)
    p.add_argument("--parallelism", type=int, help=f"worker processes (default: ${PARALLELISM_ENV} or CPU count)")
    p.add_argument("--out", metavar="DIR")
    p.add_argument("--config", metavar="FILE", help="JSON config file")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("schedules", help="print face-to-face and peer percentages for all types")
    p.add_argument("--mode", default="self-contained", choices=[m.value for m in ClassroomMode])
    p.add_argument("--weeks", type=int, default=12)
    p.set_defaults(func=cmd_schedules)

    p = sub.add_parser("patterns", help="list the face-to-face week patterns of a type")
    p.add_argument("--type", required=True)
    p.set_defaults(func=cmd_patterns)

    p = sub.add_parser("timetable", help="export a timetable, one row per student, day and period")
    p.add_argument("--type", required=True)
    p.add_argument("--mode", default="self-contained", choices=[m.value for m in ClassroomMode])
    p.add_argument("--pattern", type=int, default=0)
    p.add_argument("--room-pattern", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--weeks", type=int, default=12)
    p.add_argument("--out", metavar="FILE")
    p.set_defaults(func=cmd_timetable)

    p = sub.add_parser("trace", help="run one replication and dump the per-student daily phases")
    p.add_argument("--type", required=True)
    p.add_argument("--mode", default="self-contained", choices=[m.value for m in ClassroomMode])
    p.add_argument("--pattern", type=int, default=0)
    p.add_argument("--room-pattern", type=int, default=0)
    p.add_argument("--replication", type=int, default=0)
    p.add_argument("--ventilation", type=float)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", metavar="FILE")
    p.set_defaults(func=cmd_trace)
    return parser



def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError, TypeError) as exc:
        print(f"svis: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        where = exc.filename or ""
        print(f"svis: I/O error: {where}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001
        print(f"svis: runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
