"""Accuracy breakdowns and the official-baseline reproduction comparator."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Mapping

from .types import CATEGORY_AXES, Dataset, JudgeResult

TOLERANCE = Decimal("2.0")
VERDICTS = ("pass", "fail", "no_baseline")


class MissingJudgeResult(ValueError):
    pass


def percent(correct: int, total: int, places: int = 2) -> Decimal:
    """100 * correct / total, rounded half-up; exact for any terminating decimal."""
    q = Fraction(100 * correct, total)
    exact = Decimal(q.numerator) / Decimal(q.denominator)
    return exact.quantize(Decimal(1).scaleb(-places), rounding=ROUND_HALF_UP)


def render_percent(correct: int, total: int, places: int = 1) -> str:
    return f"{percent(correct, total, places)}%"


@dataclass(frozen=True)
class SliceScore:
    correct: int
    total: int

    @property
    def accuracy(self) -> Decimal:
        return percent(self.correct, self.total)

    def to_dict(self) -> dict[str, Any]:
        return {"accuracy": float(self.accuracy), "correct": self.correct, "total": self.total}


@dataclass(frozen=True)
class MetricReport:
    benchmark: str
    model_id: str
    overall: SliceScore
    breakdowns: Mapping[str, Mapping[str, SliceScore]] = field(default_factory=dict)
    reasons: Mapping[str, int] = field(default_factory=dict)

    @property
    def accuracy(self) -> Decimal:
        return self.overall.accuracy

    def to_dict(self) -> dict[str, Any]:
        return {
            "benchmark": self.benchmark,
            "model_id": self.model_id,
            "overall": self.overall.to_dict(),
            "breakdowns": {axis: {k: s.to_dict() for k, s in sorted(sl.items())}
                           for axis, sl in sorted(self.breakdowns.items())},
            "reasons": dict(sorted(self.reasons.items())),
        }


def compute_metrics(results: Iterable[JudgeResult], dataset: Dataset, model_id: str = "",
                    benchmark: str | None = None) -> MetricReport:
    by_id: dict[str, JudgeResult] = {}
    for r in results:
        if r.sample_id in by_id:
            raise ValueError(f"sample {r.sample_id!r} judged more than once")
        by_id[r.sample_id] = r
    missing = [s.sample_id for s in dataset if s.sample_id not in by_id]
    if missing:
        raise MissingJudgeResult(f"{len(missing)} samples lack a judge result, e.g. {missing[:5]}")
    extra = set(by_id) - {s.sample_id for s in dataset}
    if extra:
        raise ValueError(f"judge results for unknown samples: {sorted(extra)[:5]}")
    if not len(dataset):
        raise MissingJudgeResult("empty dataset")

    correct = sum(by_id[s.sample_id].correct for s in dataset)
    slices: dict[str, dict[str, list[int]]] = {}
    reasons: dict[str, int] = {}
    for s in dataset:
        r = by_id[s.sample_id]
        reasons[r.reason] = reasons.get(r.reason, 0) + 1
        for axis in CATEGORY_AXES:
            value = s.categories.get(axis)
            if value is None:
                continue
            c = slices.setdefault(axis, {}).setdefault(value, [0, 0])
            c[0] += r.correct
            c[1] += 1
    breakdowns = {axis: {v: SliceScore(c, n) for v, (c, n) in vals.items()} for axis, vals in slices.items()}
    return MetricReport(benchmark or dataset.name, model_id, SliceScore(correct, len(dataset)), breakdowns, reasons)


# -- official comparison -------------------------------------------------------------------

def _dec(v: Any) -> Decimal | None:
    return None if v is None else Decimal(str(v))


def verdict(official: Any, reproduced: Any) -> str:
    o, r = _dec(official), _dec(reproduced)
    if o is None:
        return "no_baseline"
    return "pass" if r >= o or abs(r - o) <= TOLERANCE else "fail"


@dataclass(frozen=True)
class ComparisonRow:
    model: str
    benchmark: str
    official: Decimal | None
    reproduced: Decimal
    verdict: str

    @property
    def delta(self) -> Decimal | None:
        return None if self.official is None else self.reproduced - self.official

    def to_dict(self) -> dict[str, Any]:
        return {
            "model": self.model,
            "benchmark": self.benchmark,
            "official": None if self.official is None else str(self.official),
            "reproduced": str(self.reproduced),
            "delta": None if self.delta is None else str(self.delta),
            "verdict": self.verdict,
        }


@dataclass(frozen=True)
class ReproductionVerdicts:
    rows: tuple[ComparisonRow, ...]

    def count(self, v: str) -> int:
        return sum(r.verdict == v for r in self.rows)

    @property
    def rate(self) -> Decimal | None:
        n = self.count("pass") + self.count("fail")
        return None if n == 0 else percent(self.count("pass"), n)

    def rate_display(self, places: int = 1) -> str:
        n = self.count("pass") + self.count("fail")
        return "n/a" if n == 0 else render_percent(self.count("pass"), n, places)

    def failures(self) -> list[tuple[str, str]]:
        return [(r.model, r.benchmark) for r in self.rows if r.verdict == "fail"]

    def to_dict(self) -> dict[str, Any]:
        return {
            "rows": [r.to_dict() for r in self.rows],
            "summary": {
                "pass": self.count("pass"),
                "fail": self.count("fail"),
                "no_baseline": self.count("no_baseline"),
                "rate": None if self.rate is None else str(self.rate),
                "rate_display": self.rate_display(),
            },
        }


@dataclass(frozen=True)
class OfficialTable:
    """Official scores keyed by (model, benchmark); benchmarks use the table's short names."""

    official: Mapping[tuple[str, str], Decimal | None]
    reported: Mapping[tuple[str, str], Decimal] = field(default_factory=dict)
    benchmarks: Mapping[str, str] = field(default_factory=dict)
    groups: Mapping[str, str] = field(default_factory=dict)
    provenance: str = ""

    def get(self, model: str, benchmark: str) -> Decimal | None:
        return self.official.get((model, benchmark))


def load_official_table(path: str | Path | None = None) -> OfficialTable:
    if path is None:
        text = resources.files("guirl").joinpath("data/official/grounding_reproduction.json").read_text()
    else:
        text = Path(path).read_text()
    doc = json.loads(text)
    official: dict[tuple[str, str], Decimal | None] = {}
    reported: dict[tuple[str, str], Decimal] = {}
    groups: dict[str, str] = {}
    for row in doc["rows"]:
        groups[row["model"]] = row.get("group", "")
        for bench, cell in row["cells"].items():
            official[(row["model"], bench)] = _dec(cell.get("official"))
            if cell.get("reproduced") is not None:
                reported[(row["model"], bench)] = _dec(cell["reproduced"])
    return OfficialTable(official, reported, doc.get("benchmarks", {}), groups, doc.get("provenance", ""))


def compare_official(reproduced: Mapping[tuple[str, str], Any] | Iterable[MetricReport],
                     table: OfficialTable) -> ReproductionVerdicts:
    """One row per reproduced cell; cells without an official number are no_baseline."""
    if isinstance(reproduced, Mapping):
        cells = [(m, b, _dec(v)) for (m, b), v in reproduced.items()]
    else:
        cells = [(r.model_id, r.benchmark, r.accuracy) for r in reproduced]
    rows = []
    for model, bench, value in cells:
        off = table.get(model, bench)
        rows.append(ComparisonRow(model, bench, off, value, verdict(off, value)))
    return ReproductionVerdicts(tuple(rows))
