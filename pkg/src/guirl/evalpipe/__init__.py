"""Infer -> Judge -> Metric evaluation with pinned model profiles and an official-baseline comparator."""

from .benchgen import generate
from .infer import (
    CorruptShard,
    InferInterrupted,
    InferSummary,
    check_shard,
    infer,
    predict_sample,
    read_shards,
    shard_bounds,
    shard_name,
)
from .judges import (
    ActionTolerances,
    UnknownActionType,
    judge_files,
    judge_multi_action,
    judge_point_in_box,
    judge_polygon_refusal,
    judge_predictions,
    judge_sample,
    point_in_polygon,
    read_judgements,
)
from .metrics import (
    MetricReport,
    MissingJudgeResult,
    OfficialTable,
    ReproductionVerdicts,
    compare_official,
    compute_metrics,
    load_official_table,
    percent,
    render_percent,
    verdict,
)
from .parsing import parse_output
from .profiles import load_profiles, profile_for
from .types import (
    ActionRecord,
    BBox,
    BenchmarkSample,
    Dataset,
    DatasetError,
    DegeneratePolygon,
    JudgeResult,
    ModelProfile,
    ParseFailure,
    Point,
    Polygon,
    Prediction,
    Refusal,
    ZoomSettings,
    load_dataset,
)
from .zoom import Crop, inverse_remap, remap, zoom_ground, zoom_pipeline
