import json

import pytest

from guirl.clawctl.cli import main
from guirl.clawctl.config import ConfigError, dump_config, freeze, load_config, parse_config


def _write(path, doc):
    path.write_text(json.dumps(doc))
    return path


# -- config ----------------------------------------------------------------------------

def test_empty_config_resolves_defaults():
    cfg = parse_config({}, "train")
    assert cfg.train.group_size == 8 and cfg.train.temperature == 0.7
    assert cfg.train.learning_rate == cfg.train.lr
    assert cfg.train.pool.pool_size == 64 and cfg.train.max_steps == 50


def test_all_errors_reported_at_once():
    doc = {"bogus": 1, "seed": -1, "train": {"group_size": 1, "temperature": "hot", "pool": {"pool_size": 0}},
           "eval": {"shard_count": "4"}}
    with pytest.raises(ConfigError) as err:
        parse_config(doc, "train")
    text = "\n".join(err.value.errors)
    for key in ("config.bogus", "config.seed", "config.train.group_size", "config.train.temperature",
                "config.train.pool.pool_size", "config.eval.shard_count"):
        assert key in text


def test_mode_and_seed_conflicts():
    with pytest.raises(ConfigError, match="mode"):
        parse_config({"mode": "eval"}, "train")
    with pytest.raises(ConfigError, match="seed"):
        parse_config({"seed": 1, "train": {"seed": 2}}, "train")


def test_unknown_model_fails_for_eval():
    with pytest.raises(ConfigError, match="model_id"):
        parse_config({"eval": {"model_id": "nope"}}, "eval")


def test_dump_round_trip(tmp_path):
    cfg = parse_config({"seed": 3, "eval": {"model_id": "mock-zoom-50"}}, "eval")
    p = tmp_path / "c.json"
    p.write_text(dump_config(cfg))
    assert load_config(p, "eval") == cfg


def test_freeze_refuses_a_different_config(tmp_path):
    freeze(parse_config({"seed": 1}, "train"), tmp_path)
    freeze(parse_config({"seed": 1}, "train"), tmp_path)
    with pytest.raises(ConfigError, match="different"):
        freeze(parse_config({"seed": 2}, "train"), tmp_path)


def test_missing_or_broken_file(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "none.json")
    (tmp_path / "bad.json").write_text("{")
    with pytest.raises(ConfigError, match="JSON"):
        load_config(tmp_path / "bad.json")


# -- cli -------------------------------------------------------------------------------

def test_help_and_usage_exit_codes(capsys):
    assert main(["--help"]) == 0
    assert main([]) == 1
    assert main(["eval"]) == 1
    assert main(["frobnicate"]) == 1
    assert main(["train"]) == 1


def test_invalid_config_exit_1(tmp_path, capsys):
    cfg = _write(tmp_path / "c.json", {"train": {"group_size": 0}})
    assert main(["train", "--config", str(cfg)]) == 1
    assert "group_size" in capsys.readouterr().err
    assert main(["train", "--config", str(tmp_path / "missing.json")]) == 1


def test_eval_chain(tmp_path, capsys):
    assert main(["bench", "gen", "--kind", "point", "--n", "12", "--out", str(tmp_path / "bench")]) == 0
    bench = tmp_path / "bench" / "point.jsonl"
    run = tmp_path / "run"
    cfg = _write(tmp_path / "c.json", {"run_dir": str(run), "eval": {
        "dataset": str(bench), "model_id": "mock-pixels", "shard_count": 3,
        "benchmark": "SS-Pro", "official_model": "GUI-G2"}})
    for stage in ("infer", "judge", "metric", "report"):
        assert main(["eval", stage, "--config", str(cfg)]) == 0, stage
    for name in ("run.json", "judge.jsonl", "metrics.json", "reproduction.json", "predictions/pred.shard-2.jsonl"):
        assert (run / name).exists(), name
    metrics = json.loads((run / "metrics.json").read_text())
    assert metrics["overall"]["correct"] == 12
    rows = json.loads((run / "reproduction.json").read_text())["rows"]
    assert rows[0]["verdict"] == "pass"
    assert main(["eval", "infer", "--config", str(cfg)]) == 0
    assert "computed [], skipped [0, 1, 2]" in capsys.readouterr().out


def test_published_report(tmp_path, capsys):
    cfg = _write(tmp_path / "c.json", {"run_dir": str(tmp_path / "r")})
    assert main(["eval", "report", "--published", "--config", str(cfg)]) == 0
    out = capsys.readouterr().out
    assert "pass 46  fail 2" in out and "95.8%" in out


def test_judge_before_infer_is_a_usage_error(tmp_path):
    from guirl.evalpipe import generate

    bench = generate("point", 2, tmp_path / "b", image_dims=(32, 32))
    cfg = _write(tmp_path / "c.json", {"run_dir": str(tmp_path / "r"), "eval": {"dataset": str(bench)}})
    assert main(["eval", "judge", "--config", str(cfg)]) == 1


def test_incomplete_judgements_exit_2(tmp_path):
    from guirl.evalpipe import generate

    bench = generate("point", 3, tmp_path / "b", image_dims=(32, 32))
    run = tmp_path / "r"
    run.mkdir()
    (run / "judge.jsonl").write_text(json.dumps({"sample_id": "point-0-00000", "correct": True, "reason": "hit"})
                                     + "\n")
    cfg = _write(tmp_path / "c.json", {"run_dir": str(run), "eval": {"dataset": str(bench)}})
    assert main(["eval", "metric", "--config", str(cfg)]) == 2


def test_train_and_doctor(tmp_path, capsys):
    cfg = _write(tmp_path / "c.json", {"run_dir": str(tmp_path / "t"), "seed": 1, "train": {
        "max_updates": 2, "batch_tasks": 2, "group_size": 2, "pool": {"pool_size": 2, "spare_count": 1}}})
    assert main(["train", "--config", str(cfg)]) == 0
    frozen = json.loads((tmp_path / "t" / "run.json").read_text())
    assert frozen["train"]["seed"] == 1 and frozen["mode"] == "train"
    assert main(["env", "doctor"]) == 0
    assert '"pool_size": 64' in capsys.readouterr().out
