"""Result records and their JSON/CSV serialization."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

__all__ = ["Quantity", "ResultRecord", "emit", "load_record", "CSV_COLUMNS"]

CSV_COLUMNS = ("scenario", "quantity", "value", "tolerance", "pass")


@dataclass
class Quantity:
    """A named number; with a tolerance it is a check (``value <= tolerance`` unless stated)."""

    name: str
    value: float
    tolerance: float | None = None
    passed: bool | None = None

    def __post_init__(self):
        self.value = float(self.value)
        if self.passed is None:
            self.passed = True if self.tolerance is None else bool(self.value <= self.tolerance)
        self.passed = bool(self.passed)


@dataclass
class ResultRecord:
    scenario: str
    config: dict
    quantities: list = field(default_factory=list)
    wall_time: float = 0.0
    version: str = ""
    seed: int = 0
    error: str | None = None

    @property
    def passed(self) -> bool:
        return self.error is None and all(q.passed for q in self.quantities)

    def get(self, name: str) -> Quantity:
        for q in self.quantities:
            if q.name == name:
                return q
        raise KeyError(name)

    def failures(self) -> list:
        return [q for q in self.quantities if not q.passed]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ResultRecord":
        d = dict(d)
        d.pop("passed", None)
        d["quantities"] = [Quantity(**q) for q in d["quantities"]]
        return cls(**d)


def _stem(record: ResultRecord) -> str:
    return f"{record.scenario}-seed{record.seed}"


def emit(record: ResultRecord, fmt: str, out_dir: str | Path) -> Path:
    """Write the record once; JSON keeps everything, CSV keeps the quantity table."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if fmt == "json":
        path = out / f"{_stem(record)}.json"
        path.write_text(json.dumps(record.to_dict(), indent=2, sort_keys=True) + "\n")
        return path
    if fmt == "csv":
        path = out / f"{_stem(record)}.csv"
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_COLUMNS)
            for q in record.quantities:
                tol = "" if q.tolerance is None else repr(q.tolerance)
                w.writerow([record.scenario, q.name, repr(q.value), tol, str(q.passed).lower()])
        return path
    raise ValueError(f"unknown format {fmt!r}")


def load_record(path: str | Path) -> ResultRecord:
    return ResultRecord.from_dict(json.loads(Path(path).read_text()))
