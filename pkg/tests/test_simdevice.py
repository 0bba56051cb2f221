import pytest
from hypothesis import given, settings, strategies as st

from guirl.simdevice import (
    Back,
    Done,
    EnvFaulted,
    EpisodeTerminated,
    FaultPlan,
    ScreenState,
    SimDevice,
    SimDeviceError,
    TaskSpec,
    action_from_dict,
    action_to_dict,
    load_suite,
    task_oracle,
    verify_outcome,
)

SUITE = load_suite()


def test_suite_shape():
    assert len(SUITE) == 20
    diffs = sorted(t.difficulty for t in SUITE)
    assert diffs[0] >= 2 and diffs[-1] <= 10


def test_reset_is_deterministic():
    task = SUITE.tasks[3]
    a, b = SimDevice(), SimDevice()
    assert a.reset(task) == b.reset(task)
    assert a.reset(task).anchor == b.reset(task).anchor


def test_step_before_reset():
    with pytest.raises(SimDeviceError):
        SimDevice().step(Back())


def test_done_ends_episode():
    dev = SimDevice()
    dev.reset(SUITE.tasks[0])
    res = dev.step(Done())
    assert res.terminal
    with pytest.raises(EpisodeTerminated):
        dev.step(Back())


@pytest.mark.parametrize("task", SUITE.tasks, ids=lambda t: t.task_id)
def test_oracle_solves_every_task(task):
    dev = SimDevice()
    obs = dev.reset(task)
    oracle = task_oracle(task)
    for _ in range(task.max_steps):
        nxt = oracle.next_action(obs)
        if nxt is None:
            break
        obs = dev.step(nxt).obs
    assert verify_outcome(obs, task)


def test_crash_fault_and_restart():
    dev = SimDevice()
    dev.reset(SUITE.tasks[0])
    dev.inject(FaultPlan(crash_prob=1.0))
    with pytest.raises(EnvFaulted):
        dev.step(Back())
    assert dev.probe().crashed
    assert dev.faults_fired == 1
    dev.inject(None)
    dev.restart()
    assert not dev.probe().crashed
    dev.step(Back())


def test_stall_probe_exceeds_any_timeout():
    dev = SimDevice()
    dev.reset(SUITE.tasks[0])
    dev.inject(FaultPlan(stall_prob=1.0))
    with pytest.raises(EnvFaulted):
        dev.step(Back())
    assert dev.probe().stalled and dev.probe().latency_ms > 60_000


def test_fault_sequence_reproducible():
    def faults(seed):
        dev = SimDevice()
        out = []
        for _ in range(40):
            dev.reset(SUITE.tasks[1]) if not dev.crashed else None
            dev.inject(FaultPlan(crash_prob=0.3, rng_seed=seed))
            try:
                dev.step(Back())
                out.append(0)
            except EnvFaulted:
                out.append(1)
                dev.inject(None)
                dev.restart()
        return out

    assert faults(5) == faults(5)


@given(st.sampled_from(SUITE.tasks))
@settings(max_examples=20)
def test_screen_state_round_trip(task):
    s = SimDevice().reset(task)
    again = ScreenState.from_dict(s.to_dict())
    assert again == s and again.anchor == s.anchor


def test_task_spec_round_trip():
    for t in SUITE:
        assert TaskSpec.from_dict(t.to_dict()) == t


def test_action_dict_round_trip():
    for a in (Back(), Done()):
        assert action_from_dict(action_to_dict(a)) == a
