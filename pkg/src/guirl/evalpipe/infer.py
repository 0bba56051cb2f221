"""Sharded, resumable inference.

The dataset is cut into ``shard_count`` contiguous shards. Each finished shard is written to a temp
file and renamed to ``pred.shard-<k>.jsonl``; a ``.sha256`` sidecar (also renamed into place) records
its digest, record count and the run context. On resume, shards whose sidecar matches are skipped and
anything else is recomputed.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from ..clawctl.endpoint import EndpointError
from .imaging import load_image
from .types import BenchmarkSample, Dataset, ModelProfile, ParseFailure, Prediction, dumps
from .zoom import ground_once, zoom_pipeline

log = logging.getLogger(__name__)


class CorruptShard(RuntimeError):
    pass


class InferInterrupted(RuntimeError):
    """Raised by the ``interrupt`` hook to emulate a kill at a shard boundary."""


def shard_name(k: int) -> str:
    return f"pred.shard-{k}.jsonl"


def shard_bounds(n: int, shard_count: int) -> list[tuple[int, int]]:
    if shard_count < 1:
        raise ValueError("shard_count must be >= 1")
    return [(k * n // shard_count, (k + 1) * n // shard_count) for k in range(shard_count)]


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def atomic_write(path: Path, data: bytes) -> None:
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def run_context(dataset: Dataset, profile: ModelProfile, shard_count: int) -> str:
    """Digest of everything that determines shard contents; a resume under a different context recomputes."""
    blob = dumps({"samples": [s.to_dict() for s in dataset], "profile": profile.to_dict(), "shards": shard_count})
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def write_shard(out_dir: Path, k: int, preds: list[Prediction], context: str) -> Path:
    path = out_dir / shard_name(k)
    data = "".join(dumps(p.to_dict()) + "\n" for p in preds).encode()
    atomic_write(path, data)
    side = {"sha256": hashlib.sha256(data).hexdigest(), "records": len(preds), "context": context}
    atomic_write(path.with_name(path.name + ".sha256"), (dumps(side) + "\n").encode())
    return path


def check_shard(out_dir: Path, k: int, expected_records: int, context: str) -> None:
    """Raises CorruptShard unless the shard and its sidecar exist and agree."""
    path = out_dir / shard_name(k)
    side = path.with_name(path.name + ".sha256")
    if not path.exists() or not side.exists():
        raise CorruptShard(f"shard {k}: missing {'data' if not path.exists() else 'checksum'} file")
    try:
        meta = json.loads(side.read_text())
    except ValueError:
        raise CorruptShard(f"shard {k}: unreadable checksum sidecar") from None
    if meta.get("context") != context:
        raise CorruptShard(f"shard {k}: written under a different dataset/profile/shard layout")
    if meta.get("records") != expected_records:
        raise CorruptShard(f"shard {k}: {meta.get('records')} records, expected {expected_records}")
    if sha256_file(path) != meta.get("sha256"):
        raise CorruptShard(f"shard {k}: checksum mismatch")


def predict_sample(sample: BenchmarkSample, dataset: Dataset, profile: ModelProfile, client) -> Prediction:
    try:
        image = load_image(dataset.image_path(sample))
        if profile.zoom_enabled:
            return zoom_pipeline(sample.sample_id, image, sample.instruction, profile, client)
        raw, parsed, _ = ground_once(image, sample.instruction, profile, client)
        return Prediction(sample.sample_id, raw, parsed)
    except EndpointError as exc:
        log.warning("%s: endpoint failed after %d attempts; recorded as parse failure", sample.sample_id, exc.attempts)
        return Prediction(sample.sample_id, "", ParseFailure(f"endpoint error: {exc}"))


@dataclass
class InferSummary:
    out_dir: Path
    shards: list[Path]
    computed: list[int] = field(default_factory=list)
    skipped: list[int] = field(default_factory=list)
    recomputed: list[int] = field(default_factory=list)


def infer(dataset: Dataset, profile: ModelProfile, client, out_dir: str | Path, shard_count: int = 1,
          worker_count: int = 1, resume: bool = True,
          interrupt: Callable[[int], bool] | None = None) -> InferSummary:
    """``interrupt(n_completed)`` is consulted after each shard is written; returning True aborts the run
    with InferInterrupted, leaving completed shards on disk exactly as a kill would."""
    if worker_count < 1:
        raise ValueError("worker_count must be >= 1")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    bounds = shard_bounds(len(dataset), shard_count)
    context = run_context(dataset, profile, shard_count)
    summary = InferSummary(out, [out / shard_name(k) for k in range(shard_count)])

    pending = []
    for k, (lo, hi) in enumerate(bounds):
        if resume and (out / shard_name(k)).exists():
            try:
                check_shard(out, k, hi - lo, context)
                summary.skipped.append(k)
                continue
            except CorruptShard as exc:
                log.warning("recomputing: %s", exc)
                summary.recomputed.append(k)
        pending.append(k)

    lock = threading.Lock()
    done = [0]

    def run_shard(k: int) -> None:
        lo, hi = bounds[k]
        preds = [predict_sample(s, dataset, profile, client) for s in dataset.samples[lo:hi]]
        write_shard(out, k, preds, context)
        with lock:
            summary.computed.append(k)
            done[0] += 1
            if interrupt is not None and interrupt(done[0]):
                raise InferInterrupted(f"interrupted after {done[0]} shard(s)")

    if worker_count == 1 or len(pending) <= 1:
        for k in pending:
            run_shard(k)
    else:
        with ThreadPoolExecutor(max_workers=min(worker_count, len(pending))) as ex:
            for fut in [ex.submit(run_shard, k) for k in pending]:
                fut.result()
    summary.computed.sort()
    return summary


def read_shards(out_dir: str | Path, shard_count: int | None = None) -> list[Prediction]:
    out = Path(out_dir)
    paths = sorted(out.glob("pred.shard-*.jsonl"), key=lambda p: int(p.name.split("-")[1].split(".")[0]))
    if shard_count is not None:
        paths = [out / shard_name(k) for k in range(shard_count)]
    preds = []
    for p in paths:
        with open(p) as fh:
            preds.extend(Prediction.from_dict(json.loads(line)) for line in fh if line.strip())
    return preds
