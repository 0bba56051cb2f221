import dataclasses

import pytest
from PIL import Image

from guirl.clawctl.endpoint import EndpointClient, EndpointError, EndpointSpec
from guirl.clawctl.mockserver import MockServer, echo_answers, locate_target
from guirl.evalpipe import (
    Refusal,
    ZoomSettings,
    generate,
    infer,
    judge_predictions,
    load_dataset,
    load_profiles,
    profile_for,
)
from guirl.evalpipe.imaging import cap_pixels, load_image
from guirl.evalpipe.infer import check_shard, read_shards, run_context, shard_bounds, shard_name, CorruptShard
from guirl.evalpipe.types import ParseFailure
from guirl.evalpipe.zoom import zoom_ground, zoom_pipeline


@pytest.fixture(scope="module")
def sets(tmp_path_factory):
    root = tmp_path_factory.mktemp("bench")
    dims = (320, 240)
    return {k: load_dataset(generate(k, 20, root / k, seed=1, image_dims=dims)) for k in ("point", "polygon", "action")}


def _client(server, **spec):
    return EndpointClient(EndpointSpec("http://mock", **spec), sleep=lambda s: None, transport=server.transport())


def _run(ds, profile, out, mode="echo", **kw):
    server = MockServer(mode, profile.coordinate_convention, profile.refusal_token, answers=echo_answers(ds))
    with _client(server) as client:
        return infer(ds, profile, client, out, **kw), read_shards(out)


@pytest.mark.parametrize("kind,model", [("point", "mock-pixels"), ("point", "mock-normalized"),
                                        ("point", "mock-bbox"), ("polygon", "mock-pixels"),
                                        ("action", "mock-action")])
def test_echo_mock_is_perfect(sets, tmp_path, kind, model):
    ds, profile = sets[kind], profile_for(model)
    _, preds = _run(ds, profile, tmp_path)
    assert all(r.correct for r in judge_predictions(preds, ds, profile))


def test_refuse_mode_only_wins_refusals(sets, tmp_path):
    ds = sets["polygon"]
    _, preds = _run(ds, profile_for("mock-pixels"), tmp_path, mode="refuse")
    results = judge_predictions(preds, ds)
    assert [r.correct for r in results] == [isinstance(s.ground_truth, Refusal) for s in ds]


def test_shard_bounds_cover_dataset():
    assert shard_bounds(10, 4) == [(0, 2), (2, 5), (5, 7), (7, 10)]
    assert shard_bounds(2, 4)[0] == (0, 0)


def test_workers_and_shards_do_not_change_output(sets, tmp_path):
    ds, profile = sets["point"], profile_for("mock-pixels")
    _, one = _run(ds, profile, tmp_path / "a", shard_count=1, worker_count=4)
    _, many = _run(ds, profile, tmp_path / "b", shard_count=4, worker_count=4)
    assert one == many


def test_resume_skips_valid_and_recomputes_corrupt(sets, tmp_path):
    ds, profile = sets["point"], profile_for("mock-pixels")
    _run(ds, profile, tmp_path, shard_count=4)
    reference = (tmp_path / shard_name(2)).read_bytes()
    (tmp_path / shard_name(2)).write_bytes(reference[:-10])
    with pytest.raises(CorruptShard):
        check_shard(tmp_path, 2, 5, run_context(ds, profile, 4))
    summary, _ = _run(ds, profile, tmp_path, shard_count=4)
    assert summary.skipped == [0, 1, 3] and summary.recomputed == [2] and summary.computed == [2]
    assert (tmp_path / shard_name(2)).read_bytes() == reference


def test_changed_profile_invalidates_shards(sets, tmp_path):
    ds = sets["point"]
    _run(ds, profile_for("mock-pixels"), tmp_path, shard_count=2)
    summary, _ = _run(ds, dataclasses.replace(profile_for("mock-pixels"), temperature=0.5), tmp_path, shard_count=2)
    assert summary.recomputed == [0, 1]


def test_retries_are_logged():
    server = MockServer("flaky", script=(500, 500))
    with _client(server) as client:
        client.chat([{"role": "user", "content": "hello"}])
        assert client.retries_logged == 2


def test_exhausted_retries_raise():
    server = MockServer("flaky", script=(500, 503, 500))
    with _client(server) as client, pytest.raises(EndpointError) as err:
        client.chat([{"role": "user", "content": "hello"}])
    assert err.value.attempts == 3


def test_timeouts_become_parse_failures(sets, tmp_path):
    ds = sets["point"]
    _, preds = _run(ds, profile_for("mock-pixels"), tmp_path, mode="slow")
    assert all(isinstance(p.parsed, ParseFailure) for p in preds)
    assert {r.reason for r in judge_predictions(preds, ds)} == {"parse_failure"}


def test_client_errors_are_not_retried():
    import httpx

    calls = []

    def route(request):
        calls.append(1)
        return httpx.Response(400, json={"error": "bad"})

    client = EndpointClient(EndpointSpec("http://x"), sleep=lambda s: None, transport=httpx.MockTransport(route))
    with pytest.raises(EndpointError):
        client.chat([])
    assert len(calls) == 1


def test_zoom_stage_one_refusal_is_final(sets):
    ds = sets["point"]
    s = ds.samples[0]
    server = MockServer("refuse")
    with _client(server) as client:
        pred = zoom_pipeline(s.sample_id, load_image(ds.image_path(s)), s.instruction, profile_for("mock-zoom-25"),
                             client)
    assert pred.parsed == Refusal() and len(server.requests) == 1


def test_zoom_unparseable_coarse_falls_back(sets):
    ds = sets["point"]
    s = ds.samples[0]
    server = MockServer("garbage")
    with _client(server) as client:
        pred = zoom_pipeline(s.sample_id, load_image(ds.image_path(s)), s.instruction, profile_for("mock-zoom-50"),
                             client)
    assert [t["stage"] for t in pred.trace] == [1, "fallback"]
    assert isinstance(pred.parsed, ParseFailure)


def test_zoom_crop_stays_inside_image():
    for cp in [(0, 0), (1000, 800), (500, 3), (999, 500)]:
        c = zoom_ground((1000, 800), cp, 0.25)
        assert 0 <= c.x1 and c.x2 <= 1000 and 0 <= c.y1 and c.y2 <= 800
        assert c.size == (250, 200)
    with pytest.raises(ValueError):
        zoom_ground((100, 100), (5, 5), 0)
    with pytest.raises(ValueError):
        zoom_ground((1000, 800), (1000, 1000), 0.5)


def test_cap_pixels():
    img = Image.new("RGB", (4000, 3000))
    small = cap_pixels(img, 1_000_000)
    assert small.size[0] * small.size[1] <= 1_000_000
    assert cap_pixels(img, 10**8) is img or cap_pixels(img, 10**8).size == img.size


def test_locate_target_inside_painted_box():
    img = Image.new("RGB", (50, 40), (240, 240, 240))
    img.paste((255, 0, 0), (10, 5, 20, 15))
    x, y = locate_target(img)
    assert 10 <= x < 20 and 5 <= y < 15
    assert locate_target(Image.new("RGB", (5, 5))) is None


def test_benchgen_is_deterministic(tmp_path):
    a = generate("polygon", 5, tmp_path / "a", seed=4, image_dims=(64, 64))
    b = generate("polygon", 5, tmp_path / "b", seed=4, image_dims=(64, 64))
    assert a.read_text() == b.read_text()


def test_shipped_profiles():
    profiles = load_profiles()
    assert len(profiles) >= 20
    assert profiles["mock-zoom-25"].zoom == ZoomSettings(0.25)
    with pytest.raises(KeyError):
        profile_for("no-such-model")
