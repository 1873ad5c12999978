import dataclasses
import enum
import json
import math
import time
from contextlib import contextmanager
from typing import Any, Dict, Generator, List, Optional, Sequence, Union

import numpy as np

from rshelab.types import ConfigMapping, FloatArray
from rshelab.utils import mean_and_se

# A CSV cell: numbers are written with 17 significant digits, strings verbatim.
Cell = Union[float, int, str]


@enum.unique
class Status(enum.Enum):
    PASS = "pass"
    WARN = "warn"
    FAIL = "fail"


@dataclasses.dataclass(frozen=True)
class Estimate:
    """A Monte Carlo estimate; ``at`` is the time point or case it belongs to."""

    name: str
    value: float
    se: float
    count: int
    at: Optional[float] = None

    @staticmethod
    def from_samples(
        name: str, samples: FloatArray, at: Optional[float] = None
    ) -> "Estimate":
        mean, se = mean_and_se(samples)
        return Estimate(name, mean, se, int(len(samples)), at)


@dataclasses.dataclass(frozen=True)
class Verdict:
    """``low <= observed <= high``; a failed soft verdict is reported as a warning."""

    name: str
    observed: float
    low: float = -math.inf
    high: float = math.inf
    hard: bool = True
    detail: str = ""

    @property
    def status(self) -> Status:
        if self.low <= self.observed <= self.high:
            return Status.PASS
        return Status.FAIL if self.hard else Status.WARN


def at_most(name: str, observed: float, high: float, **kwargs: Any) -> Verdict:
    return Verdict(name, observed, high=high, **kwargs)


def at_least(name: str, observed: float, low: float, **kwargs: Any) -> Verdict:
    return Verdict(name, observed, low=low, **kwargs)


def _plain(v: Any) -> Cell:
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, str):
        return v
    return float(v)


def _json_float(x: float) -> Any:
    if math.isnan(x) or math.isinf(x):
        return str(x)
    return x


@dataclasses.dataclass
class ExperimentReport:
    """Table, estimates and verdicts of one experiment."""

    name: str
    config: ConfigMapping
    columns: List[str]
    rows: List[List[Cell]] = dataclasses.field(default_factory=list)
    estimates: List[Estimate] = dataclasses.field(default_factory=list)
    verdicts: List[Verdict] = dataclasses.field(default_factory=list)
    notes: Dict[str, Any] = dataclasses.field(default_factory=dict)
    wall_clock: float = 0.0

    def add_row(self, *values: Cell) -> None:
        if len(values) != len(self.columns):
            raise ValueError(
                f"{self.name}: row has {len(values)} values but the table has "
                f"{len(self.columns)} columns {self.columns}"
            )
        self.rows.append([_plain(v) for v in values])

    def add_estimate(self, estimate: Estimate) -> None:
        self.estimates.append(estimate)

    def add_verdict(self, verdict: Verdict) -> None:
        self.verdicts.append(verdict)

    def extend(self, other: "ExperimentReport", prefix: str = "") -> None:
        for e in other.estimates:
            self.estimates.append(dataclasses.replace(e, name=prefix + e.name))
        for v in other.verdicts:
            self.verdicts.append(dataclasses.replace(v, name=prefix + v.name))

    @property
    def status(self) -> Status:
        statuses = {v.status for v in self.verdicts}
        if Status.FAIL in statuses:
            return Status.FAIL
        if Status.WARN in statuses:
            return Status.WARN
        return Status.PASS

    @property
    def hard_failures(self) -> List[Verdict]:
        return [v for v in self.verdicts if v.status is Status.FAIL]

    @contextmanager
    def timed(self) -> Generator[None, None, None]:
        start = time.perf_counter()
        try:
            yield
        finally:
            self.wall_clock += time.perf_counter() - start

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "status": self.status.value,
            "config": self.config,
            "estimates": [
                {
                    "name": e.name,
                    "value": _json_float(e.value),
                    "se": _json_float(e.se),
                    "count": e.count,
                    "at": e.at,
                }
                for e in self.estimates
            ],
            "verdicts": [
                {
                    "name": v.name,
                    "status": v.status.value,
                    "observed": _json_float(v.observed),
                    "low": _json_float(v.low),
                    "high": _json_float(v.high),
                    "hard": v.hard,
                    "detail": v.detail,
                }
                for v in self.verdicts
            ],
            "notes": self.notes,
            "wall_clock_seconds": self.wall_clock,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def column(report: ExperimentReport, name: str) -> List[Cell]:
    i = report.columns.index(name)
    return [row[i] for row in report.rows]


def summarize(values: Sequence[float]) -> Dict[str, float]:
    """Minimum, median and maximum."""
    ordered = sorted(values)
    k = len(ordered)
    if k == 0:
        return {"min": math.nan, "median": math.nan, "max": math.nan}
    mid = ordered[k // 2] if k % 2 else 0.5 * (ordered[k // 2 - 1] + ordered[k // 2])
    return {"min": ordered[0], "median": mid, "max": ordered[-1]}


VIOLATION_COLUMNS = ["case", "n", "trials", "violations", "worst_excess"]


def tally(report: ExperimentReport, case: str, n: int, excess: FloatArray) -> None:
    """Record one inequality checked on many trials; ``excess > 0`` is a violation."""
    excess = np.asarray(excess, dtype=np.float64)
    violations = int(np.count_nonzero(excess > 0))
    worst = float(np.max(excess)) if excess.size else 0.0
    report.add_row(case, n, excess.size, violations, worst)
    report.add_verdict(at_most(f"{case}[n={n}]", violations, 0))
