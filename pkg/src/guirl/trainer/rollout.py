"""Group rollout collection over the environment pool."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from ..envpool import EnvPool, SparesExhausted
from ..rewardkit import JudgeRequest, RewardSignal, compose, outcome_reward, prm_step_score
from ..simdevice import Done, EnvFaulted, TaskSpec
from ..trajectory import RolloutGroup, StepRecord, Trajectory
from .policy import Policy

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RewardConfig:
    lambda_step: float = 0.1
    prm_mode: str = "rule"
    outcome_mode: str = "system"

    def __post_init__(self):
        if self.lambda_step < 0:
            raise ValueError("lambda_step must be >= 0")
        if self.prm_mode not in ("rule", "remote", "off"):
            raise ValueError(f"unknown prm_mode {self.prm_mode!r}")
        if self.outcome_mode not in ("system", "judge"):
            raise ValueError(f"unknown outcome_mode {self.outcome_mode!r}")


@dataclass
class GroupResult:
    group: RolloutGroup
    signals: list[RewardSignal]
    discarded: list[Trajectory] = field(default_factory=list)
    restarts: int = 0
    aborted: int = 0


def episode_rng(*key: int) -> np.random.Generator:
    return np.random.default_rng([int(k) for k in key])


def run_episode(device, obs, task: TaskSpec, policy: Policy, temperature: float, rng: np.random.Generator,
                rollout_id: int = 0, greedy: bool = False, max_steps: int | None = None) -> Trajectory:
    """One episode on an already-reset device. EnvFaulted propagates with the partial
    trajectory attached as ``exc.partial``."""
    budget = min(task.max_steps, max_steps or task.max_steps)
    traj = Trajectory(task.task_id, rollout_id, termination="step_budget")
    traj.states.append(obs)
    for _ in range(budget):
        d = policy.act(obs, task, temperature, rng, greedy=greedy)
        try:
            res = device.step(d.action)
        except EnvFaulted as exc:
            traj.termination = "rotated_restart"
            exc.partial = traj
            raise
        traj.steps.append(StepRecord(obs.anchor, d.action, d.logprob, 0.0, d.candidate_count))
        traj.decisions.append(d.cache)
        obs = res.obs
        traj.states.append(obs)
        if isinstance(d.action, Done):
            traj.termination = "done"
            break
        if res.terminal:
            break
    return traj


def score_trajectory(traj: Trajectory, task: TaskSpec, reward: RewardConfig, registry=None, judge=None) -> RewardSignal:
    final = traj.states[-1]
    outcome = outcome_reward(final, task, reward.outcome_mode, judge)
    scores = []
    history = []
    for t, step in enumerate(traj.steps):
        history.append(step.action)
        if reward.prm_mode == "off":
            scores.append(0.0)
            continue
        req = JudgeRequest(task.instruction, traj.states[t], traj.states[t + 1], tuple(history))
        scores.append(prm_step_score(req, task, reward.prm_mode, judge, registry))
    return RewardSignal(outcome, tuple(scores), reward.lambda_step)


def apply_rewards(traj: Trajectory, signal: RewardSignal) -> None:
    traj.outcome = signal.outcome
    rewards = compose(signal.outcome, signal.step_scores, signal.lambda_step, length=len(traj.steps))
    traj.steps = [StepRecord(s.anchor, s.action, s.logprob, r, s.candidate_count, sc)
                  for s, r, sc in zip(traj.steps, rewards, signal.step_scores)]


def collect_group(task: TaskSpec, policy: Policy, pool: EnvPool, group_size: int, temperature: float,
                  reward: RewardConfig = RewardConfig(), seed_key: tuple[int, ...] = (0,), workers: int = 1,
                  greedy: bool = False, judge=None, max_steps: int | None = None) -> GroupResult:
    """G rollouts of one task. Faults rotate the env and restart the episode from reset;
    an episode that runs out of spares is dropped from the group."""

    def one(rollout_id: int):
        discarded: list[Trajectory] = []
        attempt = 0
        key = (*seed_key, rollout_id)
        worker = f"{task.task_id}#{rollout_id}"
        handle, obs = pool.acquire(task, worker, episode_key=(key, attempt))
        try:
            while True:
                rng = episode_rng(*key, attempt)
                try:
                    return run_episode(handle.device, obs, task, policy, temperature, rng, rollout_id, greedy,
                                       max_steps), discarded, attempt, None
                except EnvFaulted as exc:
                    partial = getattr(exc, "partial", None)
                    if partial is not None:
                        discarded.append(partial)
                    attempt += 1
                    try:
                        handle = pool.rotate_spare(handle, episode_key=(key, attempt))
                    except SparesExhausted as err:
                        log.warning("episode %s aborted: %s", worker, err)
                        return None, discarded, attempt, err
                    obs = handle.last_obs
        finally:
            if handle.status == "leased" and handle.lease_owner == worker:
                pool.release(handle, worker)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            outcomes = list(ex.map(one, range(group_size)))
    else:
        outcomes = [one(i) for i in range(group_size)]

    trajs, signals, discarded = [], [], []
    restarts = aborted = 0
    for traj, disc, attempts, err in outcomes:
        discarded.extend(disc)
        restarts += attempts
        if traj is None:
            aborted += 1
            continue
        signal = score_trajectory(traj, task, reward, pool.registry, judge)
        apply_rewards(traj, signal)
        trajs.append(traj)
        signals.append(signal)
    return GroupResult(RolloutGroup(task.task_id, trajs), signals, discarded, restarts, aborted)
