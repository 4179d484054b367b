"""Tracking indicators: RMSE and time above threshold (TAT) of the real
error, trial averaging and per-condition summaries."""
from __future__ import annotations

import csv
import io
import json
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .copstream import CoPSample
from .feedback import ActuatorCommand
from .refpath import ReferencePath
from .simwalker import Condition

AXES = ("x", "y")
REPORT_HEADER = ("walker", "condition", "rmse_x_cm", "rmse_y_cm", "tat_x_pct", "tat_y_pct")


@dataclass(eq=False)
class TrialRecord:
    """Reference and measured CoP on a shared grid plus the command log.

    ``commands`` holds ``(tick time, command)`` pairs in emission order.
    """

    reference: ReferencePath
    measured: Sequence[CoPSample]
    commands: list[tuple[float, ActuatorCommand]] = field(default_factory=list)
    condition: Condition = Condition.NF_O
    trial_index: int = 0
    seed: int = 0
    walker: str = ""

    def __post_init__(self):
        if len(self.measured) != len(self.reference):
            raise ValueError(
                f"measured has {len(self.measured)} samples, reference has {len(self.reference)}"
            )

    def real_errors(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Signed ``reference - measured`` per sample, and the validity mask."""
        valid = np.array([s.valid for s in self.measured], dtype=bool)
        x = np.array([s.x for s in self.measured], dtype=float)
        y = np.array([s.y for s in self.measured], dtype=float)
        return self.reference.x - x, self.reference.y - y, valid


@dataclass(frozen=True)
class IndicatorSet:
    """RMSE in meters and TAT in percent, per axis."""

    rmse_x: float
    rmse_y: float
    tat_x: float
    tat_y: float

    def report_row(self) -> dict:
        return {
            "rmse_x_cm": 100.0 * self.rmse_x,
            "rmse_y_cm": 100.0 * self.rmse_y,
            "tat_x_pct": self.tat_x,
            "tat_y_pct": self.tat_y,
        }


def _axis_error(record: TrialRecord, axis: str):
    if axis not in AXES:
        raise ValueError(f"axis must be 'x' or 'y', got {axis!r}")
    if len(record.measured) == 0:
        raise ValueError("empty trial record")
    ex, ey, valid = record.real_errors()
    return (ex if axis == "x" else ey), valid


def rmse(record: TrialRecord, axis: str) -> float:
    """Root mean square of the real error on one axis.

    Invalid samples are left out and N shrinks accordingly.
    """
    err, valid = _axis_error(record, axis)
    if not valid.all():
        warnings.warn(
            f"{(~valid).sum()} invalid samples excluded from RMSE", RuntimeWarning, stacklevel=2
        )
        err = err[valid]
        if err.size == 0:
            raise ValueError("no valid samples in trial record")
    # scaled by the largest error so constant series come out exact and
    # tiny errors do not underflow when squared
    peak = float(np.max(np.abs(err)))
    if peak == 0.0 or not np.isfinite(peak):
        return peak
    scaled = err / peak
    return peak * float(np.sqrt(np.mean(scaled * scaled)))


def tat(record: TrialRecord, axis: str, th: float = 0.1) -> float:
    """Percentage of samples whose real error strictly exceeds ``th``.

    Invalid samples count as above threshold.
    """
    if not th > 0:
        raise ValueError("threshold must be positive")
    err, valid = _axis_error(record, axis)
    above = (np.abs(err) > th) | ~valid
    return 100.0 * np.count_nonzero(above) / err.size


def indicators(record: TrialRecord, th: float = 0.1) -> IndicatorSet:
    return IndicatorSet(rmse(record, "x"), rmse(record, "y"), tat(record, "x", th), tat(record, "y", th))


def trial_average(records: Sequence[TrialRecord], th: float = 0.1) -> IndicatorSet:
    """Arithmetic mean of each indicator over trials of one condition."""
    if not records:
        raise ValueError("no records to average")
    conditions = {r.condition for r in records}
    if len(conditions) > 1:
        raise ValueError(f"mixed conditions: {sorted(c.value for c in conditions)}")
    sets = [indicators(r, th) for r in records]
    return mean_indicators(sets)


def mean_indicators(sets: Sequence[IndicatorSet]) -> IndicatorSet:
    arr = np.array([[s.rmse_x, s.rmse_y, s.tat_x, s.tat_y] for s in sets])
    return IndicatorSet(*(float(v) for v in arr.mean(axis=0)))


@dataclass
class Summary:
    """Per (walker, condition) indicator rows plus per-condition quartiles."""

    th: float
    rows: list[tuple[str, Condition, IndicatorSet]]

    def by_condition(self) -> dict[Condition, list[IndicatorSet]]:
        out: dict[Condition, list[IndicatorSet]] = {}
        for _, cond, ind in self.rows:
            out.setdefault(cond, []).append(ind)
        return {c: out[c] for c in Condition if c in out}

    def quartiles(self) -> dict[Condition, dict[str, dict[str, float]]]:
        """Boxplot statistics (min, q1, median, q3, max) in cm and %."""
        stats = {}
        for cond, sets in self.by_condition().items():
            table = {}
            for key in ("rmse_x_cm", "rmse_y_cm", "tat_x_pct", "tat_y_pct"):
                values = np.array([s.report_row()[key] for s in sets])
                q1, med, q3 = np.percentile(values, [25, 50, 75])
                table[key] = {
                    "min": float(values.min()),
                    "q1": float(q1),
                    "median": float(med),
                    "q3": float(q3),
                    "max": float(values.max()),
                }
            stats[cond] = table
        return stats

    def medians(self) -> dict[Condition, IndicatorSet]:
        """Median of each indicator across walkers, in meters and percent."""
        out = {}
        for cond, sets in self.by_condition().items():
            arr = np.array([[s.rmse_x, s.rmse_y, s.tat_x, s.tat_y] for s in sets])
            out[cond] = IndicatorSet(*(float(v) for v in np.median(arr, axis=0)))
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(REPORT_HEADER)
        for walker, cond, ind in self.rows:
            row = ind.report_row()
            writer.writerow([walker, cond.value] + [f"{row[k]:.1f}" for k in REPORT_HEADER[2:]])
        return buf.getvalue()

    def to_json(self) -> str:
        doc = {
            "th_cop": self.th,
            "rows": [
                {"walker": w, "condition": c.value, **ind.report_row()} for w, c, ind in self.rows
            ],
            "conditions": {c.value: v for c, v in self.quartiles().items()},
        }
        return json.dumps(doc, indent=2, sort_keys=False) + "\n"


def summarize(records: Sequence[TrialRecord], th: float = 0.1) -> Summary:
    """Average trials per (walker, condition) and collect them in a Summary.

    Rows keep the walkers' first-appearance order and the standard
    condition order within each walker.
    """
    groups: dict[tuple[str, Condition], list[TrialRecord]] = {}
    walkers: list[str] = []
    for r in records:
        if r.walker not in walkers:
            walkers.append(r.walker)
        groups.setdefault((r.walker, r.condition), []).append(r)
    rows = []
    for w in walkers:
        for cond in Condition:
            if (w, cond) in groups:
                rows.append((w, cond, trial_average(groups[(w, cond)], th)))
    return Summary(th, rows)
