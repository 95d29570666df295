"""Aggregate replications into peak summaries, probability histograms and CSV rows."""
from __future__ import annotations

import csv
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .engine import ReplicationResult
from .model import SchoolConfig
from .scheduling import ScheduleType, Timetable, face_to_face_percentage, peer_exposure_percentage

# Upper edges of the non-zero bins; a cell lands in the first bin whose edge it
# does not exceed. Values above the last edge go to the overflow bin.
BIN_EDGES = (0.02, 0.04, 0.06, 0.08, 0.10, 0.12)
BIN_LABELS = ("0", "0-2%", "2-4%", "4-6%", "6-8%", "8-10%", "10-12%", ">12%")
N_BINS = len(BIN_LABELS)


@dataclass(frozen=True)
class PeakSummary:
    n: int
    min: float
    q1: float
    median: float
    q3: float
    max: float
    mean: float

    @property
    def iqr(self) -> float:
        return self.q3 - self.q1


def summarize_values(values: Iterable[float]) -> PeakSummary:
    arr = np.asarray(list(values), dtype=float)
    if arr.size == 0:
        raise ValueError("cannot summarize an empty set of replications")
    q1, med, q3 = np.quantile(arr, [0.25, 0.5, 0.75], method="linear")
    return PeakSummary(int(arr.size), float(arr.min()), float(q1), float(med), float(q3), float(arr.max()), float(arr.mean()))


def summarize_peaks(results: Iterable[ReplicationResult]) -> PeakSummary:
    return summarize_values(r.peak_infected for r in results)


def bin_index(prob: np.ndarray) -> np.ndarray:
    """0 for exactly zero, else 1 + index of the first upper edge >= value."""
    prob = np.asarray(prob, dtype=float)
    return np.where(prob == 0.0, 0, 1 + np.searchsorted(BIN_EDGES, prob, side="left"))


def histogram_counts(result: ReplicationResult, week: int = 0) -> np.ndarray:
    """Cell counts per (day of week, bin) for one replication."""
    days = result.cell_probabilities.shape[0]
    if not 0 <= week * 7 < days:
        raise ValueError(f"week {week} is outside the {days}-day horizon")
    block = result.cell_probabilities[week * 7 : week * 7 + 7]
    out = np.zeros((7, N_BINS), dtype=np.int64)
    for dow, cells in enumerate(block):
        out[dow] = np.bincount(bin_index(cells).ravel(), minlength=N_BINS)
    return out


@dataclass(frozen=True)
class ProbabilityHistogram:
    counts: np.ndarray  # (7, bins) cell counts

    @property
    def fractions(self) -> np.ndarray:
        totals = self.counts.sum(axis=1, keepdims=True)
        return np.divide(self.counts, totals, out=np.zeros(self.counts.shape), where=totals > 0)

    @property
    def cells_per_day(self) -> int:
        return int(self.counts[0].sum())

    def fraction(self, day: int, label: str) -> float:
        return float(self.fractions[day, BIN_LABELS.index(label)])


def histogram(results: Iterable[ReplicationResult], week: int = 0) -> ProbabilityHistogram:
    total = np.zeros((7, N_BINS), dtype=np.int64)
    for r in results:
        total += histogram_counts(r, week)
    return ProbabilityHistogram(total)


@dataclass(frozen=True)
class ScheduleRow:
    schedule_type: ScheduleType
    face_to_face_pct: float
    peer_pct: float


def face_to_face_report(timetables: dict[ScheduleType, Timetable], config: SchoolConfig) -> list[ScheduleRow]:
    return [
        ScheduleRow(t, face_to_face_percentage(tt, config), peer_exposure_percentage(tt))
        for t, tt in timetables.items()
    ]


def format_schedule_report(rows: Sequence[ScheduleRow]) -> str:
    lines = [f"{'type':<7}{'alias':<14}{'face-to-face %':>16}{'peers met %':>13}"]
    for row in rows:
        t = row.schedule_type
        lines.append(f"{t.label:<7}{t.info.alias:<14}{row.face_to_face_pct:>16.1f}{row.peer_pct:>13.1f}")
    return "\n".join(lines)


PEAKS_HEADER = ["type", "mode", "ventilation", "pattern_id", "replication", "seed", "peak", "total_infected", "peak_day"]
SUMMARY_HEADER = ["type", "mode", "ventilation", "n", "min", "q1", "median", "q3", "max", "mean", "f2f_pct"]
HISTOGRAM_HEADER = ["type", "mode", "ventilation", "day", "bin", "fraction"]


def _num(x: float) -> str:
    return f"{x:.6f}".rstrip("0").rstrip(".") if x != int(x) else str(int(x))


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[object]]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_num(v) if isinstance(v, float) else v for v in row])


def summary_row(type_name: str, mode: str, ventilation: float, summary: PeakSummary, f2f: float) -> list[object]:
    s = summary
    return [type_name, mode, float(ventilation), s.n, s.min, s.q1, s.median, s.q3, s.max, s.mean, float(f2f)]


def histogram_rows(type_name: str, mode: str, ventilation: float, hist: ProbabilityHistogram) -> list[list[object]]:
    fr = hist.fractions
    return [
        [type_name, mode, float(ventilation), day, BIN_LABELS[b], float(fr[day, b])]
        for day in range(7)
        for b in range(N_BINS)
    ]
