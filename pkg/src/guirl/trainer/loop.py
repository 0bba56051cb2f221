"""REINFORCE-with-group-advantage training loop for the linear-softmax toy policy."""

from __future__ import annotations

import dataclasses
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from ..credit import ESTIMATORS, AdvantageSet, CreditConfig, estimate
from ..envpool import EnvPool, PoolConfig
from ..simdevice import AppRegistry, SimDevice, TaskSuite, default_registry, load_suite, verify_outcome
from ..trajectory import RolloutGroup, digest
from .policy import FeatureMap, LinearSoftmaxPolicy, Policy, PolicyParams, grad_logprob
from .rollout import RewardConfig, collect_group, episode_rng, run_episode

log = logging.getLogger(__name__)

TOY_LEARNING_RATE = 1e-2
REMOTE_LEARNING_RATE = 1e-6


class ShapeMismatch(ValueError):
    pass


class NonFiniteGradient(ValueError):
    pass


class EmptySuite(ValueError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    group_size: int = 8
    temperature: float = 0.7
    learning_rate: float | None = None
    epochs: int = 3
    batch_tasks: int = 8
    max_updates: int | None = None
    max_steps: int = 50
    estimator: str = "gigpo"
    credit: CreditConfig = CreditConfig()
    reward: RewardConfig = RewardConfig()
    seed: int = 0
    policy: str = "linear"
    suite: str = "core"
    task_tags: tuple[str, ...] = ()
    init_scale: float = 0.01
    eval_every: int = 10
    workers: int = 1
    pool: PoolConfig = PoolConfig()

    def __post_init__(self):
        if self.group_size < 2:
            raise ValueError("group_size must be >= 2")
        if self.temperature <= 0:
            raise ValueError("temperature must be > 0")
        if self.learning_rate is not None and self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.epochs < 0 or self.batch_tasks < 1 or self.max_steps < 1:
            raise ValueError("epochs >= 0, batch_tasks >= 1 and max_steps >= 1 required")
        if self.max_updates is not None and self.max_updates < 0:
            raise ValueError("max_updates must be >= 0")
        if self.estimator not in ESTIMATORS:
            raise ValueError(f"estimator must be one of {ESTIMATORS}")
        if self.policy not in ("linear", "remote"):
            raise ValueError(f"unknown policy kind {self.policy!r}")
        if self.eval_every < 1 or self.workers < 1:
            raise ValueError("eval_every and workers must be >= 1")
        object.__setattr__(self, "task_tags", tuple(self.task_tags))

    @property
    def lr(self) -> float:
        if self.learning_rate is not None:
            return self.learning_rate
        return TOY_LEARNING_RATE if self.policy == "linear" else REMOTE_LEARNING_RATE

    def resolved(self) -> "TrainConfig":
        return dataclasses.replace(self, learning_rate=self.lr)

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self.resolved())


# -- gradient and update -------------------------------------------------------------

def policy_gradient(group: RolloutGroup, advantages: AdvantageSet, params: PolicyParams, temperature: float,
                    return_digest: bool = False):
    """sum_{i,t} A(i,t) * grad_W log pi(a_{i,t} | s_{i,t})."""
    if advantages.shape() != [len(t) for t in group.trajectories]:
        raise ShapeMismatch(f"advantages {advantages.shape()} vs trajectories {[len(t) for t in group.trajectories]}")
    grad = np.zeros_like(params.W)
    consumed: list[list[float]] = []
    for traj, row in zip(group.trajectories, advantages.combined_adv):
        if len(traj.decisions) != len(traj.steps):
            raise ShapeMismatch(f"trajectory {traj.rollout_id} lacks cached policy inputs")
        used = []
        for cache, a in zip(traj.decisions, row):
            used.append(a)
            if a == 0.0 or cache is None:
                continue
            X, tau, idx = cache
            grad += a * grad_logprob(params.W, X, tau, idx, temperature)
        consumed.append(used)
    if return_digest:
        return grad, digest(consumed)
    return grad


def update(params: PolicyParams, grad: np.ndarray, learning_rate: float) -> PolicyParams:
    if grad.shape != params.W.shape:
        raise ShapeMismatch(f"gradient {grad.shape} vs parameters {params.W.shape}")
    if not np.all(np.isfinite(grad)):
        raise NonFiniteGradient("gradient has non-finite entries")
    return PolicyParams(params.W + learning_rate * grad, params.feature_version)


# -- evaluation ------------------------------------------------------------------------

def evaluate_policy(policy: Policy | PolicyParams, suite: TaskSuite | Sequence, episodes_per_task: int = 1,
                    greedy: bool = True, temperature: float = 0.7, seed: int = 0,
                    registry: AppRegistry | None = None, features: FeatureMap | None = None,
                    per_task: dict | None = None) -> float:
    tasks = list(suite)
    if not tasks:
        raise EmptySuite("cannot evaluate on an empty suite")
    registry = registry or default_registry()
    if isinstance(policy, PolicyParams):
        policy = LinearSoftmaxPolicy(policy, features or FeatureMap.for_registry(registry))
    device = SimDevice(registry, "eval")
    wins = 0
    for k, task in enumerate(tasks):
        task_wins = 0
        for e in range(episodes_per_task):
            obs = device.reset(task)
            traj = run_episode(device, obs, task, policy, temperature, episode_rng(seed, 0xE7A1, k, e), greedy=greedy)
            task_wins += verify_outcome(traj.states[-1], task)
        wins += task_wins
        if per_task is not None:
            per_task[task.task_id] = task_wins / episodes_per_task
    return wins / (len(tasks) * episodes_per_task)


# -- training --------------------------------------------------------------------------

@dataclass
class RunReport:
    config: dict[str, Any]
    feature_version: str
    initial_sr: float
    final_sr: float
    updates: int
    history: list[dict[str, Any]] = field(default_factory=list)
    rotations: int = 0
    faults: int = 0
    aborted_episodes: int = 0
    dropped_groups: int = 0
    final_per_task: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)


def schedule(n_tasks: int, batch_tasks: int, n_updates: int, seed: int) -> list[list[int]]:
    """Epoch-wise shuffled batches of task indices, cycling epochs until n_updates batches exist."""
    batches: list[list[int]] = []
    epoch = 0
    while len(batches) < n_updates:
        order = np.random.default_rng([seed, 0x5EED, epoch]).permutation(n_tasks).tolist()
        for i in range(0, n_tasks, batch_tasks):
            batches.append(order[i:i + batch_tasks])
        epoch += 1
    return batches[:n_updates]


def _suite_for(config: TrainConfig, suite: TaskSuite | None) -> TaskSuite:
    suite = suite or load_suite(config.suite)
    if config.task_tags:
        suite = TaskSuite(suite.suite_id, tuple(t for t in suite if set(config.task_tags) & set(t.tags)))
    return suite


def train(config: TrainConfig, run_dir: str | Path | None = None, suite: TaskSuite | None = None,
          registry: AppRegistry | None = None, pool: EnvPool | None = None,
          initial_params: PolicyParams | None = None,
          frozen_config: dict[str, Any] | None = None) -> tuple[RunReport, PolicyParams]:
    """``frozen_config`` replaces the train config as the content of run.json (the CLI freezes the whole run)."""
    if config.policy != "linear":
        raise ValueError("train() optimises the linear toy policy; remote policies are rollout-only here")
    registry = registry or default_registry()
    suite = _suite_for(config, suite)
    tasks = list(suite)
    if not tasks:
        raise EmptySuite("no tasks selected for training")
    features = FeatureMap.for_registry(registry)
    params = initial_params or PolicyParams.init(features, np.random.default_rng([config.seed, 0x1417]),
                                                 config.init_scale)
    pool = pool or EnvPool(config.pool, registry)
    n_updates = config.max_updates if config.max_updates is not None else \
        config.epochs * math.ceil(len(tasks) / config.batch_tasks)
    resolved = config.to_dict()

    writer = _RunWriter(run_dir, frozen_config if frozen_config is not None else resolved)
    initial_sr = evaluate_policy(params, tasks, registry=registry, features=features, seed=config.seed)
    report = RunReport(resolved, features.version, initial_sr, initial_sr, n_updates)
    report.history.append({"update": 0, "greedy_sr": initial_sr})
    lr = config.lr

    for u, batch in enumerate(schedule(len(tasks), config.batch_tasks, n_updates, config.seed)):
        policy = LinearSoftmaxPolicy(params, features)
        grad = np.zeros_like(params.W)
        n_groups = 0
        successes, returns = [], []
        for k in batch:
            task = tasks[k]
            res = collect_group(task, policy, pool, config.group_size, config.temperature, config.reward,
                                seed_key=(config.seed, u, k), workers=config.workers, max_steps=config.max_steps)
            report.rotations += res.restarts
            report.aborted_episodes += res.aborted
            writer.trajectories(u, res.group.trajectories, res.discarded)
            successes.extend(t.outcome for t in res.group.trajectories)
            returns.extend(s.total for s in res.signals)
            if len(res.group) < 2:
                report.dropped_groups += 1
                log.warning("update %d: group for %s shrank to %d, dropped", u, task.task_id, len(res.group))
                continue
            adv = estimate(res.group, config.estimator, config.credit)
            g, consumed = policy_gradient(res.group, adv, params, config.temperature, return_digest=True)
            produced = digest(adv.combined_adv)
            if consumed != produced:
                raise AssertionError("policy gradient consumed advantages other than the estimator produced")
            writer.advantages(u, task.task_id, adv, produced, consumed)
            grad += g
            n_groups += 1
        if n_groups:
            params = update(params, grad, lr)
        entry = {
            "update": u + 1,
            "tasks": [tasks[k].task_id for k in batch],
            "train_success": float(np.mean(successes)) if successes else 0.0,
            "mean_return": float(np.mean(returns)) if returns else 0.0,
            "rotations": report.rotations,
        }
        if (u + 1) % config.eval_every == 0 or u + 1 == n_updates:
            entry["greedy_sr"] = evaluate_policy(params, tasks, registry=registry, features=features, seed=config.seed)
        report.history.append(entry)

    per_task: dict[str, float] = {}
    report.final_sr = evaluate_policy(params, tasks, registry=registry, features=features, seed=config.seed,
                                      per_task=per_task)
    report.final_per_task = per_task
    report.faults = pool.faults_fired()
    writer.report(report)
    writer.params(params)
    return report, params


class _RunWriter:
    def __init__(self, run_dir, resolved: dict[str, Any]):
        self.dir = Path(run_dir) if run_dir is not None else None
        if self.dir is None:
            return
        self.dir.mkdir(parents=True, exist_ok=True)
        (self.dir / "run.json").write_text(json.dumps(resolved, indent=1, sort_keys=True) + "\n")
        self._traj = open(self.dir / "trajectories.jsonl", "w")
        self._adv = open(self.dir / "advantages.jsonl", "w")

    def trajectories(self, update: int, kept, discarded) -> None:
        if self.dir is None:
            return
        for t in list(kept) + list(discarded):
            rec = {"update": update, **t.to_dict()}
            self._traj.write(json.dumps(rec, sort_keys=True, separators=(",", ":")) + "\n")

    def advantages(self, update: int, task_id: str, adv: AdvantageSet, produced: str, consumed: str) -> None:
        if self.dir is None:
            return
        rec = {"update": update, "task_id": task_id, "digest": produced, "consumed_digest": consumed, **adv.to_dict()}
        self._adv.write(json.dumps(rec, sort_keys=True, separators=(",", ":")) + "\n")

    def report(self, report: RunReport) -> None:
        if self.dir is None:
            return
        self._traj.close()
        self._adv.close()
        (self.dir / "report.json").write_text(json.dumps(report.to_dict(), indent=1, sort_keys=True) + "\n")

    def params(self, params: PolicyParams) -> None:
        if self.dir is None:
            return
        np.save(self.dir / "params.npy", params.W)
