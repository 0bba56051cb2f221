import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from guirl.clawctl.endpoint import EndpointClient, EndpointSpec
from guirl.clawctl.mockserver import MockServer
from guirl.rewardkit import (
    JudgeRequest,
    JudgeUnavailable,
    LengthMismatch,
    MockJudge,
    RemoteJudge,
    RewardSignal,
    compose,
    outcome_reward,
    parse_score,
    parse_verdict,
    prm_step_score,
)
from guirl.simdevice import Back, SimDevice, load_suite, task_oracle
from guirl.trainer import OracleGreedyPolicy, RandomPolicy, RewardConfig, run_episode
from guirl.trainer.rollout import score_trajectory

SUITE = load_suite()
TASK = SUITE.tasks[5]


@given(st.integers(0, 1), st.lists(st.floats(0, 1), min_size=1, max_size=40), st.floats(0, 5))
def test_compose_identity(outcome, scores, lam):
    r = compose(outcome, scores, lam)
    assert len(r) == len(scores)
    assert abs(math.fsum(r) - (outcome + lam * math.fsum(scores))) <= 1e-12


def test_outcome_lands_on_last_step():
    assert compose(1, [0.0, 1.0, 0.0], 0.5) == [0.0, 0.5, 1.0]


def test_compose_length_checks():
    with pytest.raises(LengthMismatch):
        compose(1, [], 0.1)
    with pytest.raises(LengthMismatch):
        compose(1, [0.0], 0.1, length=2)
    with pytest.raises(ValueError):
        compose(1, [0.0], 0.1, placement="terminal")


def test_reward_signal_validation():
    with pytest.raises(ValueError):
        RewardSignal(2, (0.0,))
    with pytest.raises(ValueError):
        RewardSignal(1, (1.5,))
    assert RewardSignal(1, (1.0, 0.0), 0.1).total == pytest.approx(1.1)


@pytest.mark.parametrize("reply,want", [("success", 1), ("Failure.", 0), ("I think: yes", 1), ("FAILED", 0)])
def test_parse_verdict(reply, want):
    assert parse_verdict(reply) == want


def test_parse_verdict_garbage():
    with pytest.raises(JudgeUnavailable):
        parse_verdict("maybe")


def test_parse_score_clamped():
    assert parse_score("score: 0.75") == 0.75
    assert parse_score("7") == 1.0
    with pytest.raises(JudgeUnavailable):
        parse_score("none")


def _oracle_episode(task=TASK):
    dev = SimDevice()
    obs = dev.reset(task)
    return run_episode(dev, obs, task, OracleGreedyPolicy(), 1.0, np.random.default_rng(0), greedy=True)


def test_rule_prm_scores_progress():
    traj = _oracle_episode()
    sig = score_trajectory(traj, TASK, RewardConfig())
    assert sig.outcome == 1
    assert all(s == 1.0 for s in sig.step_scores[:-1])


def test_rule_prm_zero_for_no_progress():
    dev = SimDevice()
    s0 = dev.reset(TASK)
    s1 = dev.step(Back()).obs
    assert prm_step_score(JudgeRequest(TASK.instruction, s0, s1, (Back(),)), TASK) == 0.0


def test_random_policy_rarely_succeeds_on_hard_task():
    hard = max(SUITE.tasks, key=lambda t: t.difficulty)
    wins = 0
    for k in range(30):
        dev = SimDevice()
        obs = dev.reset(hard)
        traj = run_episode(dev, obs, hard, RandomPolicy(), 1.0, np.random.default_rng(k))
        wins += outcome_reward(traj.states[-1], hard)
    assert wins / 30 < 0.2


def test_mock_judge_outcome_mode():
    traj = _oracle_episode()
    sig = score_trajectory(traj, TASK, RewardConfig(outcome_mode="judge", prm_mode="off"), judge=MockJudge("failure"))
    assert sig.outcome == 0


def test_remote_step_judge_failure_scores_zero():
    traj = _oracle_episode()
    sig = score_trajectory(traj, TASK, RewardConfig(prm_mode="remote"), judge=MockJudge(fail=True))
    assert set(sig.step_scores) == {0.0}


def test_judge_mode_without_judge():
    with pytest.raises(JudgeUnavailable):
        outcome_reward(SimDevice().reset(TASK), TASK, "judge")


def test_remote_judge_against_mock_endpoint():
    server = MockServer("judge", suite=SUITE)
    with EndpointClient(EndpointSpec("http://mock"), transport=server.transport()) as client:
        judge = RemoteJudge(client)
        traj = _oracle_episode()
        sig = score_trajectory(traj, TASK, RewardConfig(outcome_mode="judge", prm_mode="remote"), judge=judge)
        rule = score_trajectory(traj, TASK, RewardConfig())
    assert sig.outcome == rule.outcome == 1
    assert sig.step_scores == rule.step_scores


def test_request_digest_stable():
    s0 = SimDevice().reset(TASK)
    a = JudgeRequest(TASK.instruction, s0, s0, (Back(),))
    b = JudgeRequest(TASK.instruction, s0, s0, (Back(),))
    assert a.digest() == b.digest()
