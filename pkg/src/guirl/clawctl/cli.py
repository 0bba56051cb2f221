"""clawctl: train, evaluate, inspect the env pool, generate synthetic benchmarks.

Exit codes: 0 success, 1 validation or usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

from ..envpool import EnvPool, PoolError
from ..evalpipe import (
    DatasetError,
    MissingJudgeResult,
    compare_official,
    compute_metrics,
    generate,
    infer,
    judge_files,
    load_dataset,
    load_official_table,
    read_judgements,
)
from ..evalpipe.metrics import MetricReport, SliceScore
from ..simdevice import SimDeviceError
from ..trainer import EmptySuite, train
from .config import ConfigError, RunConfig, freeze, load_config, parse_config
from .endpoint import EndpointClient, EndpointError, EndpointSpec

log = logging.getLogger("clawctl")

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_help(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="clawctl", description="GUI-agent RL training and reproducible grounding evaluation.")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", metavar="{train,eval,env,bench}", parser_class=_Parser)

    t = sub.add_parser("train", help="train the toy policy on the simulated suite")
    t.add_argument("--config", required=True, help="run config (JSON)")
    t.add_argument("--run-dir", help="override run_dir")

    e = sub.add_parser("eval", help="Infer -> Judge -> Metric -> Report")
    esub = e.add_subparsers(dest="stage", metavar="{infer,judge,metric,report}", parser_class=_Parser)
    for stage, desc in (("infer", "query the endpoint, write prediction shards"),
                        ("judge", "judge prediction shards against ground truth"),
                        ("metric", "accuracy with per-category breakdowns"),
                        ("report", "compare against the official score table")):
        sp = esub.add_parser(stage, help=desc)
        sp.add_argument("--config", required=True, help="run config (JSON)")
        sp.add_argument("--run-dir", help="override run_dir")
        if stage == "report":
            sp.add_argument("--published", action="store_true",
                            help="compare the table's own reproduced column instead of metrics.json")

    en = sub.add_parser("env", help="environment pool utilities")
    ensub = en.add_subparsers(dest="action", metavar="{doctor}", parser_class=_Parser)
    d = ensub.add_parser("doctor", help="initialise the pool, probe every env, print the status report")
    d.add_argument("--config", help="run config (JSON); defaults apply when omitted")

    b = sub.add_parser("bench", help="synthetic benchmarks")
    bsub = b.add_subparsers(dest="action", metavar="{gen}", parser_class=_Parser)
    g = bsub.add_parser("gen", help="generate a synthetic benchmark with known ground truth")
    g.add_argument("--config", help="run config (JSON)")
    g.add_argument("--kind", help="point | polygon | action")
    g.add_argument("--n", type=int, help="number of samples")
    g.add_argument("--seed", type=int, help="generator seed")
    g.add_argument("--out", help="output directory")
    return p


# -- helpers ----------------------------------------------------------------------------------

def _load(args, mode: str) -> RunConfig:
    cfg = load_config(args.config, mode) if getattr(args, "config", None) else parse_config({}, mode)
    if getattr(args, "run_dir", None):
        cfg = dataclasses.replace(cfg, run_dir=args.run_dir)
    return cfg


def make_client(spec: EndpointSpec, profile=None, dataset=None) -> EndpointClient:
    """``mock://<mode>`` URLs are served in-process by the deterministic mock."""
    if spec.base_url.startswith("mock://"):
        from .mockserver import MockServer, echo_answers

        mode = spec.base_url[len("mock://"):].strip("/") or "echo"
        kwargs = {}
        if mode == "flaky":
            kwargs = {"script": (500, 500)}
        server = MockServer(mode, profile.coordinate_convention if profile else "absolute_pixels",
                            profile.refusal_token if profile else "REFUSE",
                            answers=echo_answers(dataset) if dataset is not None else None, **kwargs)
        return EndpointClient(spec, transport=server.transport())
    return EndpointClient(spec)


def _dataset(cfg: RunConfig):
    if not cfg.eval.dataset:
        raise ConfigError(["config.eval.dataset: required for eval commands"])
    return load_dataset(cfg.eval.dataset)


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")


# -- commands ---------------------------------------------------------------------------------

def cmd_train(args) -> int:
    cfg = _load(args, "train")
    freeze(cfg)
    report, _ = train(cfg.train, cfg.run_dir, frozen_config=cfg.to_dict())
    print(f"greedy SR {report.initial_sr:.2f} -> {report.final_sr:.2f} over {report.updates} updates "
          f"(rotations {report.rotations}, aborted episodes {report.aborted_episodes})")
    print(f"run directory: {cfg.run_dir}")
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = _load(args, "eval")
    run = Path(cfg.run_dir)
    ev = cfg.eval
    if args.stage == "report" and args.published:
        table = load_official_table(ev.official_table)
        verdicts = compare_official(table.reported, table)
        freeze(cfg)
        _write_json(run / "reproduction.json", verdicts.to_dict())
        _print_verdicts(verdicts)
        return EXIT_OK
    dataset = _dataset(cfg)
    freeze(cfg)
    pred_dir = run / "predictions"
    if args.stage == "infer":
        with make_client(ev.endpoint, ev.profile, dataset) as client:
            summary = infer(dataset, ev.profile, client, pred_dir, ev.shard_count, ev.worker_count, ev.resume)
        print(f"shards computed {summary.computed}, skipped {summary.skipped}, recomputed {summary.recomputed}")
        return EXIT_OK
    if args.stage == "judge":
        if not pred_dir.is_dir():
            raise ConfigError([f"{pred_dir}: no predictions; run `clawctl eval infer` first"])
        results = judge_files(pred_dir, dataset, run / "judge.jsonl", ev.profile)
        print(f"judged {len(results)} samples -> {run / 'judge.jsonl'}")
        return EXIT_OK
    if args.stage == "metric":
        path = run / "judge.jsonl"
        if not path.is_file():
            raise ConfigError([f"{path}: no judge results; run `clawctl eval judge` first"])
        report = compute_metrics(read_judgements(path), dataset, ev.model_id, ev.benchmark)
        _write_json(run / "metrics.json", report.to_dict())
        print(f"{report.model_id or '-'} on {report.benchmark}: {report.accuracy}% "
              f"({report.overall.correct}/{report.overall.total})")
        return EXIT_OK
    path = run / "metrics.json"
    if not path.is_file():
        raise ConfigError([f"{path}: no metrics; run `clawctl eval metric` first"])
    doc = json.loads(path.read_text())
    report = MetricReport(doc["benchmark"], doc["model_id"],
                          SliceScore(doc["overall"]["correct"], doc["overall"]["total"]))
    model = ev.official_model or ev.model_id
    report = dataclasses.replace(report, model_id=model, benchmark=ev.benchmark or report.benchmark)
    verdicts = compare_official([report], load_official_table(ev.official_table))
    _write_json(run / "reproduction.json", verdicts.to_dict())
    _print_verdicts(verdicts)
    return EXIT_OK


def _print_verdicts(v) -> None:
    for r in v.rows:
        off = "-" if r.official is None else f"{r.official}"
        print(f"{r.model:24s} {r.benchmark:7s} official {off:>6s} reproduced {r.reproduced!s:>6s}  {r.verdict}")
    print(f"pass {v.count('pass')}  fail {v.count('fail')}  no_baseline {v.count('no_baseline')}  "
          f"reproduction rate {v.rate_display()}")


def cmd_doctor(args) -> int:
    cfg = _load(args, "doctor")
    pool = EnvPool(cfg.train.pool)
    try:
        health = {h.env_id: pool.health_check(h) for h in pool.handles() if h.status == "idle"}
        report = pool.doctor()
        report["unhealthy"] = sorted(k for k, v in health.items() if not v)
        print(json.dumps(report, indent=1, sort_keys=True))
    finally:
        pool.teardown_all()
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = _load(args, "benchgen")
    bg = cfg.benchgen
    overrides = {k: v for k, v in (("kind", args.kind), ("n", args.n), ("seed", args.seed)) if v is not None}
    if overrides:
        try:
            bg = dataclasses.replace(bg, **overrides)
        except ValueError as exc:
            raise ConfigError([str(exc)]) from None
    out = Path(args.out or bg.out_dir or Path(cfg.run_dir) / "bench")
    path = generate(bg.kind, bg.n, out, bg.seed, tuple(bg.image_dims), bg.refusal_rate)
    print(path)
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INVALID
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_INVALID
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handlers = {"train": cmd_train, "eval": cmd_eval, "env": cmd_doctor, "bench": cmd_bench}
    command = args.command
    sub_missing = (command == "eval" and not args.stage) or (command in ("env", "bench") and not args.action)
    if command is None or sub_missing:
        parser.print_help(sys.stderr)
        return EXIT_INVALID
    try:
        return handlers[command](args)
    except (ConfigError, DatasetError) as exc:
        print(f"clawctl: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (EndpointError, PoolError, SimDeviceError, EmptySuite, MissingJudgeResult, OSError, RuntimeError) as exc:
        print(f"clawctl: runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
