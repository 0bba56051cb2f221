"""Benchmark samples, pinned model profiles, predictions and judge results, with JSONL I/O."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Union

CONVENTIONS = ("normalized_0_1000", "absolute_pixels")
PARSERS = ("first_point", "bbox_center", "action_json")
REASONS = ("hit", "miss", "refusal_match", "refusal_mismatch", "parse_failure")
CATEGORY_AXES = ("platform", "element_type", "task_category")


class DatasetError(ValueError):
    pass


class DegeneratePolygon(DatasetError):
    pass


# -- ground truth ----------------------------------------------------------------------

@dataclass(frozen=True)
class BBox:
    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        if self.x2 < self.x1 or self.y2 < self.y1:
            raise DatasetError(f"bbox corners out of order: {self}")

    @property
    def center(self) -> tuple[float, float]:
        return ((self.x1 + self.x2) / 2, (self.y1 + self.y2) / 2)

    def as_list(self) -> list[float]:
        return [self.x1, self.y1, self.x2, self.y2]


@dataclass(frozen=True)
class Polygon:
    vertices: tuple[tuple[float, float], ...]

    def __post_init__(self):
        object.__setattr__(self, "vertices", tuple((v[0], v[1]) for v in self.vertices))
        if len(self.vertices) < 3:
            raise DegeneratePolygon(f"polygon needs >= 3 vertices, got {len(self.vertices)}")


@dataclass(frozen=True)
class Refusal:
    """Ground truth for an instruction with no matching element; also a parsed refusal."""


@dataclass(frozen=True)
class ActionRecord:
    """A mobile action. ``point`` for click-like gold may come with a ``bbox``; swipes may carry ``start``/``end``."""

    type: str
    point: tuple[float, float] | None = None
    bbox: BBox | None = None
    text: str | None = None
    direction: str | None = None
    start: tuple[float, float] | None = None
    end: tuple[float, float] | None = None

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"type": self.type}
        if self.point is not None:
            d["point"] = list(self.point)
        if self.bbox is not None:
            d["bbox"] = self.bbox.as_list()
        for k in ("text", "direction"):
            if getattr(self, k) is not None:
                d[k] = getattr(self, k)
        if self.start is not None:
            d["start"] = list(self.start)
        if self.end is not None:
            d["end"] = list(self.end)
        return d

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "ActionRecord":
        def pt(v):
            return None if v is None else (v[0], v[1])

        return cls(str(d["type"]), pt(d.get("point")), BBox(*d["bbox"]) if d.get("bbox") is not None else None,
                   d.get("text"), d.get("direction"), pt(d.get("start")), pt(d.get("end")))


GroundTruth = Union[BBox, Polygon, Refusal, ActionRecord]


def truth_to_dict(gt: GroundTruth) -> dict[str, Any]:
    if isinstance(gt, BBox):
        return {"bbox": gt.as_list()}
    if isinstance(gt, Polygon):
        return {"polygon": [list(v) for v in gt.vertices]}
    if isinstance(gt, Refusal):
        return {"refusal": True}
    return {"action": gt.to_dict()}


def truth_from_dict(d: Mapping[str, Any]) -> GroundTruth:
    present = [k for k in ("bbox", "polygon", "refusal", "action") if d.get(k) not in (None, False)]
    if len(present) != 1:
        raise DatasetError(f"ground truth needs exactly one of bbox/polygon/refusal/action, got {present}")
    k = present[0]
    if k == "bbox":
        return BBox(*d["bbox"])
    if k == "polygon":
        return Polygon(tuple(tuple(v) for v in d["polygon"]))
    if k == "refusal":
        return Refusal()
    return ActionRecord.from_dict(d["action"])


# -- samples ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BenchmarkSample:
    sample_id: str
    image_ref: str
    image_dims: tuple[int, int]
    instruction: str
    ground_truth: GroundTruth
    categories: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "image_dims", (int(self.image_dims[0]), int(self.image_dims[1])))
        object.__setattr__(self, "categories", dict(self.categories))
        W, H = self.image_dims
        if W <= 0 or H <= 0:
            raise DatasetError(f"{self.sample_id}: image_dims must be positive")
        gt = self.ground_truth
        pts: list[tuple[float, float]] = []
        if isinstance(gt, BBox):
            pts = [(gt.x1, gt.y1), (gt.x2, gt.y2)]
        elif isinstance(gt, Polygon):
            pts = list(gt.vertices)
        elif isinstance(gt, ActionRecord) and gt.bbox is not None:
            pts = [(gt.bbox.x1, gt.bbox.y1), (gt.bbox.x2, gt.bbox.y2)]
        for x, y in pts:
            if not (0 <= x <= W and 0 <= y <= H):
                raise DatasetError(f"{self.sample_id}: ground truth point {(x, y)} outside image {W}x{H}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "sample_id": self.sample_id,
            "image_ref": self.image_ref,
            "image_dims": list(self.image_dims),
            "instruction": self.instruction,
            "ground_truth": truth_to_dict(self.ground_truth),
            "categories": dict(self.categories),
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "BenchmarkSample":
        return cls(str(d["sample_id"]), str(d["image_ref"]), tuple(d["image_dims"]), str(d["instruction"]),
                   truth_from_dict(d["ground_truth"]), d.get("categories", {}))


@dataclass(frozen=True)
class Dataset:
    name: str
    samples: tuple[BenchmarkSample, ...]
    root: Path = Path(".")

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    def image_path(self, sample: BenchmarkSample) -> Path:
        p = Path(sample.image_ref)
        return p if p.is_absolute() else self.root / p


def load_dataset(path: str | Path) -> Dataset:
    """Line-delimited BenchmarkSample records. Validation (including degenerate polygons) happens here."""
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"dataset file not found: {path}")
    samples = []
    seen = set()
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                s = BenchmarkSample.from_dict(json.loads(line))
            except DegeneratePolygon as exc:
                raise DegeneratePolygon(f"{path}:{lineno}: {exc}") from None
            except (KeyError, TypeError, ValueError) as exc:
                raise DatasetError(f"{path}:{lineno}: {exc}") from None
            if s.sample_id in seen:
                raise DatasetError(f"{path}:{lineno}: duplicate sample_id {s.sample_id!r}")
            seen.add(s.sample_id)
            samples.append(s)
    return Dataset(path.stem, tuple(samples), path.parent)


def write_jsonl(path: str | Path, records: Iterable[Mapping[str, Any]]) -> None:
    with open(path, "w") as fh:
        for r in records:
            fh.write(dumps(r) + "\n")


def read_jsonl(path: str | Path) -> list[dict[str, Any]]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def dumps(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


# -- profiles --------------------------------------------------------------------------

@dataclass(frozen=True)
class ZoomSettings:
    tile_fraction: float
    enabled: bool = True

    def __post_init__(self):
        if not 0 < self.tile_fraction <= 1:
            raise ValueError(f"tile_fraction must be in (0, 1], got {self.tile_fraction}")


@dataclass(frozen=True)
class ModelProfile:
    """Every evaluation knob for one model, frozen for the whole run."""

    model_id: str
    prompt_template_id: str = "ground_point"
    coordinate_convention: str = "absolute_pixels"
    max_pixels: int = 12_845_056
    temperature: float = 0.0
    parser_id: str = "first_point"
    zoom: ZoomSettings | None = None
    refusal_token: str = "REFUSE"
    click_tolerance: float = 0.14

    def __post_init__(self):
        if self.coordinate_convention not in CONVENTIONS:
            raise ValueError(f"coordinate_convention must be one of {CONVENTIONS}")
        if self.parser_id not in PARSERS:
            raise ValueError(f"parser_id must be one of {PARSERS}")
        if self.max_pixels <= 0:
            raise ValueError("max_pixels must be > 0")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if not self.refusal_token:
            raise ValueError("refusal_token must be non-empty")
        if isinstance(self.zoom, Mapping):
            object.__setattr__(self, "zoom", ZoomSettings(**self.zoom))

    @property
    def zoom_enabled(self) -> bool:
        return self.zoom is not None and self.zoom.enabled

    def to_dict(self) -> dict[str, Any]:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["zoom"] = None if self.zoom is None else {"tile_fraction": self.zoom.tile_fraction,
                                                    "enabled": self.zoom.enabled}
        return d

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "ModelProfile":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown profile keys: {sorted(unknown)}")
        return cls(**d)


# -- predictions and judgements --------------------------------------------------------

@dataclass(frozen=True)
class Point:
    x: int
    y: int


@dataclass(frozen=True)
class ParseFailure:
    detail: str = ""


Parsed = Union[Point, ActionRecord, Refusal, ParseFailure]


def parsed_to_dict(p: Parsed) -> dict[str, Any]:
    if isinstance(p, Point):
        return {"kind": "point", "x": p.x, "y": p.y}
    if isinstance(p, ActionRecord):
        return {"kind": "action", "action": p.to_dict()}
    if isinstance(p, Refusal):
        return {"kind": "refusal"}
    return {"kind": "parse_failure", "detail": p.detail}


def parsed_from_dict(d: Mapping[str, Any]) -> Parsed:
    kind = d["kind"]
    if kind == "point":
        return Point(int(d["x"]), int(d["y"]))
    if kind == "action":
        return ActionRecord.from_dict(d["action"])
    if kind == "refusal":
        return Refusal()
    if kind == "parse_failure":
        return ParseFailure(d.get("detail", ""))
    raise ValueError(f"unknown parsed kind {kind!r}")


@dataclass(frozen=True)
class Prediction:
    sample_id: str
    raw_output: str
    parsed: Parsed
    trace: tuple[Mapping[str, Any], ...] = ()

    def to_dict(self) -> dict[str, Any]:
        d = {"sample_id": self.sample_id, "raw_output": self.raw_output, "parsed": parsed_to_dict(self.parsed)}
        if self.trace:
            d["trace"] = [dict(t) for t in self.trace]
        return d

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "Prediction":
        return cls(str(d["sample_id"]), d.get("raw_output", ""), parsed_from_dict(d["parsed"]),
                   tuple(d.get("trace", ())))


@dataclass(frozen=True)
class JudgeResult:
    sample_id: str
    correct: bool
    reason: str

    def __post_init__(self):
        if self.reason not in REASONS:
            raise ValueError(f"unknown judge reason {self.reason!r}")
        if self.reason == "parse_failure" and self.correct:
            raise ValueError("a parse failure is never correct")

    def to_dict(self) -> dict[str, Any]:
        return {"sample_id": self.sample_id, "correct": self.correct, "reason": self.reason}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "JudgeResult":
        return cls(str(d["sample_id"]), bool(d["correct"]), str(d["reason"]))
