"""Convergence tables and density reports, with JSON and CSV serialisation."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

RADIUS_ROLES = ("outer-R", "inner-r", "nsa-r", "sequence")
FUNCTIONALS = ("rho", "rho_tilde", "rho_nsa_upper", "rho_nsa_lower", "rho_family", "ow_average", "orbit_profile")
CSV_COLUMNS = ("functional", "r", "R_or_t", "estimate", "error_bound", "flags")


@dataclass(frozen=True)
class RadiusSchedule:
    """Finite increasing radii standing in for a limit."""

    radii: tuple[float, ...]
    role: str = "outer-R"

    def __post_init__(self):
        radii = tuple(float(r) for r in self.radii)
        object.__setattr__(self, "radii", radii)
        if self.role not in RADIUS_ROLES:
            raise ValueError(f"unknown schedule role {self.role!r}")
        if not radii:
            raise ValueError("schedule must be nonempty")
        if any(r <= 0 for r in radii):
            raise ValueError("radii must be positive")
        if any(b <= a for a, b in zip(radii, radii[1:])):
            raise ValueError("radii must be strictly increasing")
        if self.role == "nsa-r" and radii[0] < 1:
            raise ValueError("NSA schedules start at r >= 1")

    def __iter__(self):
        return iter(self.radii)

    def __len__(self):
        return len(self.radii)

    @property
    def trailing_half(self) -> tuple[float, ...]:
        return self.radii[len(self.radii) // 2 :]


@dataclass(frozen=True)
class TableRow:
    r: Optional[float]
    R: float
    estimate: float
    error_bound: float
    flags: str = ""


def _trend(values: Sequence[float]) -> str:
    if len(values) < 2:
        return "single row"
    diffs = [b - a for a, b in zip(values, values[1:])]
    if all(d <= 0 for d in diffs):
        return "non-increasing"
    if all(d >= 0 for d in diffs):
        return "non-decreasing"
    return "oscillating"


@dataclass(frozen=True)
class ConvergenceTable:
    rows: tuple[TableRow, ...]
    extrapolated: float
    trend: str = ""
    flags: dict = field(default_factory=dict)

    @classmethod
    def from_rows(cls, rows: Sequence[TableRow], extrapolated: Optional[float] = None, flags: Optional[dict] = None):
        rows = tuple(rows)
        if extrapolated is None:
            extrapolated = rows[-1].estimate
        return cls(rows, float(extrapolated), _trend([row.estimate for row in rows]), dict(flags or {}))

    @property
    def estimates(self) -> list[float]:
        return [row.estimate for row in self.rows]

    def last(self) -> TableRow:
        return self.rows[-1]


@dataclass(frozen=True)
class DensityReport:
    functional: str
    table: ConvergenceTable
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.functional not in FUNCTIONALS:
            raise ValueError(f"unknown functional {self.functional!r}")

    @property
    def value(self) -> float:
        return self.table.extrapolated

    @property
    def error_bound(self) -> float:
        return self.table.last().error_bound

    def to_dict(self) -> dict:
        return {
            "functional": self.functional,
            "extrapolated": self.table.extrapolated,
            "trend": self.table.trend,
            "flags": self.table.flags,
            "rows": [asdict(row) for row in self.table.rows],
            "config": self.config,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DensityReport":
        rows = tuple(TableRow(**row) for row in data["rows"])
        table = ConvergenceTable(rows, float(data["extrapolated"]), data.get("trend", ""), dict(data.get("flags", {})))
        return cls(data["functional"], table, dict(data.get("config", {})))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "DensityReport":
        return cls.from_dict(json.loads(text))

    def csv_rows(self) -> list[list[str]]:
        return [
            [
                self.functional,
                "" if row.r is None else _fmt(row.r),
                _fmt(row.R),
                _fmt(row.estimate),
                _fmt(row.error_bound),
                row.flags,
            ]
            for row in self.table.rows
        ]


def _fmt(x: float) -> str:
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    return repr(float(x))


def reports_to_csv(reports: Sequence[DensityReport]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for report in reports:
        writer.writerows(report.csv_rows())
    return buf.getvalue()


def reports_to_json(reports: Sequence[DensityReport]) -> str:
    return json.dumps([r.to_dict() for r in reports], indent=2, sort_keys=True)


def reports_from_json(text: str) -> list[DensityReport]:
    data = json.loads(text)
    if isinstance(data, dict):
        data = [data]
    return [DensityReport.from_dict(d) for d in data]
