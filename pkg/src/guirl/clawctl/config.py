"""Run configuration: one JSON file, validated completely up front, frozen into the run directory."""

from __future__ import annotations

import dataclasses
import json
import types
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Union, get_args, get_origin, get_type_hints

from ..evalpipe.profiles import profile_for
from ..evalpipe.types import ModelProfile
from ..trainer import TrainConfig
from .endpoint import EndpointSpec

MODES = ("train", "eval", "doctor", "benchgen")
RUN_FILE = "run.json"


class ConfigError(ValueError):
    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("invalid configuration:\n" + "\n".join(f"  - {e}" for e in self.errors))


@dataclass(frozen=True)
class EvalConfig:
    dataset: str | None = None
    model_id: str = "mock-pixels"
    profile: ModelProfile | None = None
    profiles_path: str | None = None
    endpoint: EndpointSpec = EndpointSpec("mock://echo")
    shard_count: int = 4
    worker_count: int = 1
    resume: bool = True
    benchmark: str | None = None
    official_model: str | None = None
    official_table: str | None = None

    def __post_init__(self):
        if self.shard_count < 1 or self.worker_count < 1:
            raise ValueError("shard_count and worker_count must be >= 1")


@dataclass(frozen=True)
class BenchgenConfig:
    kind: str = "point"
    n: int = 100
    seed: int = 0
    image_dims: tuple[int, ...] = (1000, 1000)
    refusal_rate: float = 0.2
    out_dir: str | None = None

    def __post_init__(self):
        from ..evalpipe.benchgen import KINDS

        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if len(self.image_dims) != 2 or min(self.image_dims) < 16:
            raise ValueError("image_dims must be [W, H] with both >= 16")
        if not 0 <= self.refusal_rate <= 1:
            raise ValueError("refusal_rate must be in [0, 1]")


@dataclass(frozen=True)
class RunConfig:
    mode: str = "train"
    run_dir: str = "runs/default"
    seed: int = 0
    train: TrainConfig = field(default_factory=TrainConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    benchgen: BenchgenConfig = field(default_factory=BenchgenConfig)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.seed < 0:
            raise ValueError("seed must be >= 0")

    def to_dict(self) -> dict[str, Any]:
        return _plain(dataclasses.asdict(self))


def _plain(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


# -- schema walk ---------------------------------------------------------------------------

_BAD = object()


def _coerce(value: Any, tp: Any, path: str, errors: list[str]) -> Any:
    origin, args = get_origin(tp), get_args(tp)
    if tp is Any:
        return value
    if origin in (Union, types.UnionType):
        if value is None:
            if type(None) in args:
                return None
            errors.append(f"{path}: must not be null")
            return _BAD
        options = [a for a in args if a is not type(None)]
        if len(options) == 1:
            return _coerce(value, options[0], path, errors)
        for opt in options:
            trial: list[str] = []
            out = _coerce(value, opt, path, trial)
            if not trial:
                return out
        errors.append(f"{path}: does not match any of {options}")
        return _BAD
    if dataclasses.is_dataclass(tp):
        return _build(tp, value, path, errors)
    if origin is tuple:
        if not isinstance(value, (list, tuple)):
            errors.append(f"{path}: expected a list")
            return _BAD
        item = args[0] if args else Any
        items = [_coerce(v, item, f"{path}[{i}]", errors) for i, v in enumerate(value)]
        return _BAD if any(v is _BAD for v in items) else tuple(items)
    if tp is bool:
        if not isinstance(value, bool):
            errors.append(f"{path}: expected true/false, got {value!r}")
            return _BAD
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            errors.append(f"{path}: expected an integer, got {value!r}")
            return _BAD
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            errors.append(f"{path}: expected a number, got {value!r}")
            return _BAD
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            errors.append(f"{path}: expected a string, got {value!r}")
            return _BAD
        return value
    if origin is dict or tp is dict:
        if not isinstance(value, dict):
            errors.append(f"{path}: expected an object")
            return _BAD
        return value
    return value


def _build(cls: type, data: Any, path: str, errors: list[str]) -> Any:
    if isinstance(data, cls):
        return data
    if not isinstance(data, Mapping):
        errors.append(f"{path}: expected an object, got {type(data).__name__}")
        return _BAD
    hints = get_type_hints(cls)
    fields = {f.name: f for f in dataclasses.fields(cls) if f.init}
    for k in sorted(set(data) - set(fields)):
        errors.append(f"{path}.{k}: unknown key")
    kwargs: dict[str, Any] = {}
    for name, f in fields.items():
        if name in data:
            v = _coerce(data[name], hints[name], f"{path}.{name}", errors)
            if v is not _BAD:
                kwargs[name] = v
        elif f.default is dataclasses.MISSING and f.default_factory is dataclasses.MISSING:
            errors.append(f"{path}.{name}: required")
    required = {n: kwargs[n] for n, f in fields.items() if n in kwargs and f.default is dataclasses.MISSING
                and f.default_factory is dataclasses.MISSING}
    if len(required) < sum(1 for f in fields.values() if f.default is dataclasses.MISSING
                           and f.default_factory is dataclasses.MISSING):
        return _BAD
    # Field-at-a-time construction attributes each semantic error to its key, so all are reported.
    bad = set()
    for name, v in kwargs.items():
        if name in required:
            continue
        try:
            cls(**{**required, name: v})
        except (ValueError, TypeError) as exc:
            errors.append(f"{path}.{name}: {exc}")
            bad.add(name)
    if bad:
        return _BAD
    try:
        return cls(**kwargs)
    except (ValueError, TypeError) as exc:
        errors.append(f"{path}: {exc}")
        return _BAD


def parse_config(doc: Any, mode: str | None = None) -> RunConfig:
    errors: list[str] = []
    if not isinstance(doc, Mapping):
        raise ConfigError(["top level: expected a JSON object"])
    doc = dict(doc)
    if mode is not None:
        if "mode" in doc and doc["mode"] != mode:
            errors.append(f"mode: config says {doc['mode']!r} but the command runs {mode!r}")
        doc["mode"] = mode
    train_seed = doc.get("train", {}).get("seed") if isinstance(doc.get("train"), Mapping) else None
    cfg = _build(RunConfig, doc, "config", errors)
    if cfg is not _BAD and train_seed is not None and train_seed != cfg.seed:
        errors.append(f"config.train.seed: {train_seed} conflicts with the run seed {cfg.seed}; set only 'seed'")
    if errors:
        raise ConfigError(errors)
    return resolve(cfg)


def resolve(cfg: RunConfig) -> RunConfig:
    """Fill derived values (learning rate, run seed, pinned profile) so run.json is self-contained."""
    train = dataclasses.replace(cfg.train, seed=cfg.seed, learning_rate=cfg.train.lr)
    ev = cfg.eval
    if ev.profile is None:
        try:
            ev = dataclasses.replace(ev, profile=profile_for(ev.model_id, ev.profiles_path))
        except (KeyError, FileNotFoundError) as exc:
            if cfg.mode == "eval":
                raise ConfigError([f"config.eval.model_id: {exc}"]) from None
    elif ev.profile.model_id != ev.model_id:
        raise ConfigError([f"config.eval.profile.model_id {ev.profile.model_id!r} != model_id {ev.model_id!r}"])
    return dataclasses.replace(cfg, train=train, eval=ev)


def load_config(path: str | Path, mode: str | None = None) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError([f"config file not found: {path}"])
    try:
        doc = json.loads(path.read_text())
    except ValueError as exc:
        raise ConfigError([f"{path}: not valid JSON ({exc})"]) from None
    return parse_config(doc, mode)


def dump_config(cfg: RunConfig) -> str:
    return json.dumps(cfg.to_dict(), indent=1, sort_keys=True) + "\n"


def freeze(cfg: RunConfig, run_dir: str | Path | None = None) -> Path:
    """Write run.json; refuses to overwrite a run directory frozen with a different config."""
    d = Path(run_dir or cfg.run_dir)
    d.mkdir(parents=True, exist_ok=True)
    target = d / RUN_FILE
    text = dump_config(cfg)
    if target.exists() and target.read_text() != text:
        raise ConfigError([f"{target} already holds a different resolved config; use a fresh run_dir"])
    target.write_text(text)
    return target
