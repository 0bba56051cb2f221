"""Group-relative advantage estimators.

``grpo_advantages`` gives every step of a trajectory the group-normalized episode return.
``gigpo_advantages`` adds a step-level term: steps are bucketed by the anchor hash of the
state they were taken from, and within each bucket the discounted return from that step
is normalized against the other members. No value network and no extra rollouts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from .trajectory import RolloutGroup

ESTIMATORS = ("grpo", "gigpo")


@dataclass(frozen=True)
class CreditConfig:
    gamma: float = 0.95
    omega: float = 1.0
    std_floor: float = 1e-8

    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError(f"gamma must be in (0, 1], got {self.gamma}")
        if self.omega < 0:
            raise ValueError(f"omega must be >= 0, got {self.omega}")
        if self.std_floor <= 0:
            raise ValueError(f"std_floor must be > 0, got {self.std_floor}")


@dataclass
class AdvantageSet:
    episode_adv: list[float]
    step_adv: list[list[float]]
    combined_adv: list[list[float]]
    estimator: str = "grpo"
    buckets: dict[str, list[tuple[int, int]]] = field(default_factory=dict, repr=False)

    def shape(self) -> list[int]:
        return [len(row) for row in self.combined_adv]

    def to_dict(self) -> dict:
        return {
            "estimator": self.estimator,
            "episode_adv": self.episode_adv,
            "step_adv": self.step_adv,
            "combined_adv": self.combined_adv,
        }


def _mean_std(xs: Sequence[float]) -> tuple[float, float]:
    n = len(xs)
    mean = math.fsum(xs) / n
    var = math.fsum((x - mean) ** 2 for x in xs) / n
    return mean, math.sqrt(var)


def normalize(xs: Sequence[float], std_floor: float) -> list[float]:
    """(x - mean) / popstd, or all zeros when popstd falls below the floor."""
    mean, std = _mean_std(xs)
    if std < std_floor:
        return [0.0] * len(xs)
    return [(x - mean) / std for x in xs]


def _rewards(group: RolloutGroup, rewards: Sequence[Sequence[float]] | None) -> list[list[float]]:
    if rewards is None:
        return [t.rewards for t in group.trajectories]
    rewards = [list(r) for r in rewards]
    if len(rewards) != len(group.trajectories) or any(len(r) != len(t) for r, t in zip(rewards, group.trajectories)):
        raise ValueError("reward sequences do not align with the group's trajectories")
    return rewards


def episode_returns(group: RolloutGroup, rewards: Sequence[Sequence[float]] | None = None) -> list[float]:
    return [math.fsum(r) for r in _rewards(group, rewards)]


def discounted_returns(rewards: Sequence[float], gamma: float) -> list[float]:
    out = [0.0] * len(rewards)
    acc = 0.0
    for t in range(len(rewards) - 1, -1, -1):
        acc = rewards[t] + gamma * acc
        out[t] = acc
    return out


def anchor_groups(group: RolloutGroup) -> dict[str, list[tuple[int, int]]]:
    buckets: dict[str, list[tuple[int, int]]] = {}
    for i, traj in enumerate(group.trajectories):
        for t, step in enumerate(traj.steps):
            buckets.setdefault(step.anchor, []).append((i, t))
    return buckets


def _check_size(group: RolloutGroup) -> None:
    if len(group.trajectories) < 2:
        raise ValueError("group-relative estimators need at least 2 trajectories")


def grpo_advantages(group: RolloutGroup, config: CreditConfig = CreditConfig(),
                    rewards: Sequence[Sequence[float]] | None = None) -> AdvantageSet:
    _check_size(group)
    ep = normalize(episode_returns(group, rewards), config.std_floor)
    lens = [len(t) for t in group.trajectories]
    return AdvantageSet(
        episode_adv=ep,
        step_adv=[[0.0] * n for n in lens],
        combined_adv=[[a] * n for a, n in zip(ep, lens)],
        estimator="grpo",
    )


def gigpo_advantages(group: RolloutGroup, config: CreditConfig = CreditConfig(),
                     rewards: Sequence[Sequence[float]] | None = None) -> AdvantageSet:
    _check_size(group)
    rew = _rewards(group, rewards)
    ep = normalize([math.fsum(r) for r in rew], config.std_floor)
    disc = [discounted_returns(r, config.gamma) for r in rew]
    step = [[0.0] * len(r) for r in rew]
    buckets = anchor_groups(group)
    for members in buckets.values():
        if len(members) < 2:
            continue
        normed = normalize([disc[i][t] for i, t in members], config.std_floor)
        for (i, t), a in zip(members, normed):
            step[i][t] = a
    if config.omega == 0:
        # The step level is switched off entirely, so the output is GRPO's, field for field.
        step = [[0.0] * len(r) for r in rew]
        combined = [[ep[i]] * len(row) for i, row in enumerate(step)]
    else:
        combined = [[ep[i] + config.omega * a for a in row] for i, row in enumerate(step)]
    return AdvantageSet(ep, step, combined, estimator="gigpo", buckets=buckets)


def estimate(group: RolloutGroup, estimator: str, config: CreditConfig = CreditConfig()) -> AdvantageSet:
    """Dispatch by name. Other estimators (PPO-style, Reinforce++) would register here."""
    if estimator == "grpo":
        return grpo_advantages(group, config)
    if estimator == "gigpo":
        return gigpo_advantages(group, config)
    raise ValueError(f"unknown estimator {estimator!r}; expected one of {ESTIMATORS}")
