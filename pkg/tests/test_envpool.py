import threading

import pytest

from guirl.envpool import (
    EnvPool,
    NotLeaseOwner,
    PoolConfig,
    PoolExhausted,
    PoolNotInitialized,
    SparesExhausted,
)
from guirl.simdevice import Back, EnvFaulted, FaultPlan, load_suite
from guirl.trainer import OracleGreedyPolicy, RewardConfig, collect_group

TASK = load_suite().tasks[0]


def _crash(handle):
    handle.device.inject(FaultPlan(crash_prob=1.0))
    with pytest.raises(EnvFaulted):
        handle.device.step(Back())


def test_acquire_release_cycle():
    pool = EnvPool(PoolConfig(pool_size=2, spare_count=1))
    h, obs = pool.acquire(TASK, "w0")
    assert h.status == "leased" and obs is not None
    assert pool.counts()["leased"] == 1
    pool.release(h, "w0")
    assert pool.counts()["idle"] == 2
    assert pool.check_conservation()


def test_release_by_non_owner_rejected():
    pool = EnvPool(PoolConfig(pool_size=1, spare_count=0))
    h, _ = pool.acquire(TASK, "w0")
    with pytest.raises(NotLeaseOwner):
        pool.release(h, "w1")


def test_exhaustion_times_out():
    pool = EnvPool(PoolConfig(pool_size=1, spare_count=0))
    pool.acquire(TASK, "w0")
    with pytest.raises(PoolExhausted):
        pool.acquire(TASK, "w1", timeout=0.05)


def test_waiter_wakes_on_release():
    pool = EnvPool(PoolConfig(pool_size=1, spare_count=0))
    h, _ = pool.acquire(TASK, "w0")
    got = []
    t = threading.Thread(target=lambda: got.append(pool.acquire(TASK, "w1", timeout=5)[0]))
    t.start()
    pool.release(h, "w0")
    t.join()
    assert got and got[0].lease_owner == "w1"


def test_rotation_replaces_faulted_env_and_resets_task():
    pool = EnvPool(PoolConfig(pool_size=2, spare_count=2, recycle_retired=False))
    h, obs = pool.acquire(TASK, "w0")
    _crash(h)
    new = pool.rotate_spare(h)
    assert h.status == "retired"
    assert new.status == "leased" and new.lease_owner == "w0"
    assert new.last_obs == obs
    assert pool.rotations == 1 == pool.faults_fired()
    assert pool.spare_depth == 1
    assert pool.check_conservation()


def test_refuses_to_rotate_healthy_env():
    pool = EnvPool(PoolConfig(pool_size=1, spare_count=1))
    h, _ = pool.acquire(TASK, "w0")
    with pytest.raises(Exception, match="healthy"):
        pool.rotate_spare(h)


def test_spares_exhausted_without_recycling():
    pool = EnvPool(PoolConfig(pool_size=1, spare_count=1, recycle_retired=False))
    h, _ = pool.acquire(TASK, "w0")
    _crash(h)
    h2 = pool.rotate_spare(h)
    _crash(h2)
    with pytest.raises(SparesExhausted):
        pool.rotate_spare(h2)
    assert pool.check_conservation()


def test_recycling_keeps_spares_available():
    pool = EnvPool(PoolConfig(pool_size=1, spare_count=1))
    h, _ = pool.acquire(TASK, "w0")
    for _ in range(5):
        _crash(h)
        h = pool.rotate_spare(h)
    assert pool.rotations == 5 == pool.faults_fired()
    assert pool.check_conservation()


def test_unhealthy_idle_env_rotated_at_acquire():
    pool = EnvPool(PoolConfig(pool_size=1, spare_count=1))
    h, _ = pool.acquire(TASK, "w0")
    pool.release(h, "w0")
    h.device.crashed = True
    h2, _ = pool.acquire(TASK, "w1")
    assert h2 is not h and pool.rotations == 1


def test_periodic_teardown_recreates_device():
    pool = EnvPool(PoolConfig(pool_size=1, spare_count=0, teardown_every_episodes=2))
    for i in range(4):
        h, _ = pool.acquire(TASK, f"w{i}")
        pool.release(h, f"w{i}")
    assert pool.teardowns == 2 and h.generation == 2


def test_teardown_then_use_requires_init():
    pool = EnvPool(PoolConfig(pool_size=1, spare_count=0))
    pool.teardown_all()
    with pytest.raises(PoolNotInitialized):
        pool.acquire(TASK, "w0")
    pool.init()
    pool.acquire(TASK, "w0")


def test_doctor_report():
    pool = EnvPool(PoolConfig(pool_size=3, spare_count=2))
    rep = pool.doctor()
    assert rep["counts"]["idle"] == 3 and rep["spare_depth"] == 2


def test_faulty_group_rotates_once_per_fault():
    plan = FaultPlan(crash_prob=0.1, stall_prob=0.1, rng_seed=3)
    pool = EnvPool(PoolConfig(pool_size=8, spare_count=4, fault_plan=plan))
    res = collect_group(TASK, OracleGreedyPolicy(), pool, 8, 1.0, RewardConfig(), seed_key=(1,), workers=4,
                        greedy=True)
    assert res.aborted == 0 and len(res.group) == 8
    assert res.restarts == pool.rotations == pool.faults_fired() > 0
    assert all(t.outcome == 1 for t in res.group.trajectories)
    assert pool.check_conservation()


def test_config_validation():
    with pytest.raises(ValueError):
        PoolConfig(pool_size=0)
    with pytest.raises(ValueError):
        PoolConfig(backend="remote")
