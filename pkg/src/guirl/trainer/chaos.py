"""Fault-injection drill: many concurrent episodes on a pool whose devices crash or stall at random."""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from ..envpool import EnvPool, PoolConfig
from ..simdevice import FaultPlan, load_suite
from .policy import OracleGreedyPolicy
from .rollout import RewardConfig, collect_group


@dataclass
class ChaosReport:
    episodes: int
    completed: int
    aborted: int
    rotations: int
    faults: int
    restarts: int
    successes: int
    conserved: bool
    wall_s: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def run_chaos(pool_size: int = 64, spare_count: int = 16, fault_prob: float = 0.05, episodes: int = 500,
              group_size: int = 10, concurrent_groups: int = 6, seed: int = 0, suite=None) -> ChaosReport:
    """Per-step fault probability is split evenly between crashes and stalls."""
    suite = list(suite or load_suite())
    plan = FaultPlan(stall_prob=fault_prob / 2, crash_prob=fault_prob / 2, rng_seed=seed)
    pool = EnvPool(PoolConfig(pool_size=pool_size, spare_count=spare_count, fault_plan=plan))
    policy = OracleGreedyPolicy(pool.registry)
    reward = RewardConfig(lambda_step=0.0, prm_mode="off")
    n_groups = -(-episodes // group_size)
    sizes = [min(group_size, episodes - g * group_size) for g in range(n_groups)]

    def one(g: int):
        task = suite[g % len(suite)]
        return collect_group(task, policy, pool, sizes[g], 1.0, reward, seed_key=(seed, g), workers=sizes[g],
                             greedy=True)

    start = time.perf_counter()
    with ThreadPoolExecutor(max_workers=concurrent_groups) as ex:
        results = list(ex.map(one, range(n_groups)))
    wall = time.perf_counter() - start
    report = ChaosReport(
        episodes=episodes,
        completed=sum(len(r.group) for r in results),
        aborted=sum(r.aborted for r in results),
        rotations=pool.rotations,
        faults=pool.faults_fired(),
        restarts=sum(r.restarts for r in results),
        successes=sum(t.outcome for r in results for t in r.group.trajectories),
        conserved=pool.check_conservation(),
        wall_s=wall,
    )
    pool.teardown_all()
    return report
