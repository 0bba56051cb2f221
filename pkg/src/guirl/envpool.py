"""Environment manager: leases, health probes, spare rotation and periodic teardown.

All pool bookkeeping happens under one condition variable, so acquire, release,
rotate_spare and health_check are atomic with respect to each other. Stepping a
leased environment happens outside the lock and is exclusive to the lease owner.

A handle that fails its probe is retired and never leased again. Its container is
"restarted" and comes back as a brand-new spare handle on the next pool operation
(when ``recycle_retired`` is set), so long chaos runs do not drain a finite spare queue.
"""

from __future__ import annotations

import hashlib
import itertools
import logging
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Callable

from .simdevice import (
    AppRegistry,
    FaultPlan,
    ScreenState,
    SimDevice,
    TaskSpec,
    default_registry,
)

log = logging.getLogger(__name__)

STATUSES = ("idle", "leased", "unhealthy", "retired")


class PoolError(RuntimeError):
    pass


class PoolExhausted(PoolError):
    pass


class SparesExhausted(PoolError):
    pass


class NotLeaseOwner(PoolError):
    pass


class PoolNotInitialized(PoolError):
    pass


@dataclass(frozen=True)
class PoolConfig:
    pool_size: int = 64
    spare_count: int = 16
    health_timeout_ms: int = 5_000
    teardown_every_episodes: int = 50
    fault_plan: FaultPlan | None = None
    acquire_timeout_s: float = 30.0
    recycle_retired: bool = True
    backend: str = "simulated"
    remote_urls: tuple[str, ...] = ()

    def __post_init__(self):
        if self.pool_size < 1:
            raise ValueError("pool_size must be >= 1")
        if self.spare_count < 0:
            raise ValueError("spare_count must be >= 0")
        if self.health_timeout_ms <= 0:
            raise ValueError("health_timeout_ms must be > 0")
        if self.teardown_every_episodes < 1:
            raise ValueError("teardown_every_episodes must be >= 1")
        if self.acquire_timeout_s < 0:
            raise ValueError("acquire_timeout_s must be >= 0")
        if self.backend not in ("simulated", "remote"):
            raise ValueError(f"unknown backend {self.backend!r}")
        if self.backend == "remote" and not self.remote_urls:
            raise ValueError("remote backend needs at least one URL in remote_urls")


@dataclass(frozen=True)
class Health:
    healthy: bool
    reason: str | None = None

    def __bool__(self) -> bool:
        return self.healthy


Healthy = Health(True)


def Unhealthy(reason: str) -> Health:
    return Health(False, reason)


@dataclass(eq=False)
class EnvHandle:
    env_id: str
    backend: str
    device: Any = field(repr=False)
    status: str = "idle"
    lease_owner: Any = None
    episodes_served: int = 0
    generation: int = 0
    task: TaskSpec | None = field(default=None, repr=False)
    last_obs: ScreenState | None = field(default=None, repr=False)
    faults_retired: int = field(default=0, repr=False)

    @property
    def faults_fired(self) -> int:
        return self.faults_retired + getattr(self.device, "faults_fired", 0)


def episode_fault_seed(base: int, episode_key: Any) -> int:
    digest = hashlib.sha256(f"{base}|{episode_key}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


class EnvPool:
    def __init__(self, config: PoolConfig = PoolConfig(), registry: AppRegistry | None = None,
                 device_factory: Callable[[str, int], Any] | None = None, initialize: bool = True):
        self.config = config
        self.registry = registry or default_registry()
        self._factory = device_factory or self._default_factory
        self._cond = threading.Condition()
        self._initialized = False
        self._all: list[EnvHandle] = []
        self._active: list[EnvHandle] = []
        self._spares: deque[EnvHandle] = deque()
        self._recovering: list[EnvHandle] = []
        self.rotation_log: list[dict[str, Any]] = []
        self.spares_promoted = 0
        self.spares_recycled = 0
        self.teardowns = 0
        self._ids = itertools.count()
        if initialize:
            self.init()

    def _default_factory(self, env_id: str, index: int):
        if self.config.backend == "remote":
            from .remote import RemoteDevice

            urls = self.config.remote_urls
            return RemoteDevice(urls[index % len(urls)], device_id=env_id)
        return SimDevice(self.registry, env_id)

    def _new_handle(self, prefix: str) -> EnvHandle:
        n = next(self._ids)
        env_id = f"{prefix}-{n:04d}"
        backend = "simulated" if self.config.backend == "simulated" else "remote"
        h = EnvHandle(env_id, backend, self._factory(env_id, n))
        self._all.append(h)
        return h

    # -- lifecycle ---------------------------------------------------------------

    def init(self) -> None:
        with self._cond:
            if self._initialized:
                return
            self._active = [self._new_handle("env") for _ in range(self.config.pool_size)]
            self._spares = deque(self._new_handle("spare") for _ in range(self.config.spare_count))
            self._recovering = []
            self._initial_spares = self.config.spare_count
            self.spares_promoted = self.spares_recycled = 0
            self.rotation_log = []
            self._initialized = True

    def teardown_all(self) -> None:
        with self._cond:
            for h in self._active + list(self._spares) + self._recovering:
                h.status = "retired"
                h.lease_owner = None
            self._active, self._spares, self._recovering = [], deque(), []
            self._initialized = False
            self._cond.notify_all()

    def _require_init(self) -> None:
        if not self._initialized:
            raise PoolNotInitialized("pool is torn down; call init() first")

    def _recover(self) -> None:
        # Containers retired by earlier rotations come back as fresh spares.
        if not self.config.recycle_retired:
            self._recovering = []
            return
        while self._recovering:
            self._recovering.pop(0)
            self._spares.append(self._new_handle("spare"))
            self.spares_recycled += 1

    def _probe(self, handle: EnvHandle) -> Health:
        try:
            p = handle.device.probe()
        except Exception as exc:  # a probe that cannot complete is a failed probe
            return Unhealthy(f"probe error: {exc}")
        if p.crashed:
            return Unhealthy("crash")
        if p.stalled or p.latency_ms > self.config.health_timeout_ms:
            return Unhealthy("stall")
        return Healthy

    def health_check(self, handle: EnvHandle) -> Health:
        with self._cond:
            if handle.status == "retired":
                raise PoolError(f"{handle.env_id} is retired")
            return self._probe(handle)

    def _install(self, handle: EnvHandle, task: TaskSpec, episode_key: Any) -> ScreenState:
        plan = self.config.fault_plan
        if plan is not None and (plan.crash_prob or plan.stall_prob):
            key = episode_key if episode_key is not None else f"{handle.env_id}/{handle.episodes_served}"
            handle.device.inject(FaultPlan(plan.stall_prob, plan.crash_prob, episode_fault_seed(plan.rng_seed, key)))
        else:
            handle.device.inject(None)
        handle.task = task
        handle.last_obs = handle.device.reset(task)
        return handle.last_obs

    def acquire(self, task: TaskSpec, worker_id: Any, episode_key: Any = None,
                timeout: float | None = None) -> tuple[EnvHandle, ScreenState]:
        timeout = self.config.acquire_timeout_s if timeout is None else timeout
        deadline = time.monotonic() + timeout
        with self._cond:
            while True:
                self._require_init()
                self._recover()
                handle = self._take_idle_locked(worker_id)
                if handle is not None:
                    break
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    raise PoolExhausted(f"no healthy environment within {timeout:.1f}s")
                self._cond.wait(remaining)
        obs = self._install(handle, task, episode_key)
        return handle, obs

    def _take_idle_locked(self, worker_id: Any) -> EnvHandle | None:
        for i, h in enumerate(self._active):
            if h.status != "idle":
                continue
            health = self._probe(h)
            if health:
                h.status, h.lease_owner = "leased", worker_id
                return h
            h.status = "unhealthy"
            log.warning("%s failed health check at acquire: %s", h.env_id, health.reason)
        for h in self._active:
            if h.status == "unhealthy" and self._spares:
                new = self._rotate_locked(h, worker_id, reason="unhealthy at acquire")
                return new
        return None

    def _rotate_locked(self, handle: EnvHandle, owner: Any, reason: str) -> EnvHandle:
        self._recover()
        if not self._spares:
            raise SparesExhausted(f"no spare to replace {handle.env_id}")
        spare = self._spares.popleft()
        handle.status = "retired"
        handle.lease_owner = None
        self._active[self._active.index(handle)] = spare
        self._recovering.append(handle)
        spare.status, spare.lease_owner = "leased", owner
        self.spares_promoted += 1
        self.rotation_log.append({"retired": handle.env_id, "promoted": spare.env_id, "reason": reason})
        return spare

    def rotate_spare(self, handle: EnvHandle, episode_key: Any = None) -> EnvHandle:
        """Retire an unhealthy leased handle and lease a spare, reset to the same task."""
        with self._cond:
            self._require_init()
            if handle.status == "retired":
                raise PoolError(f"{handle.env_id} already retired")
            if handle.status == "leased":
                health = self._probe(handle)
                if health:
                    raise PoolError(f"{handle.env_id} is healthy; refusing to rotate")
                handle.status = "unhealthy"
            owner = handle.lease_owner
            reason = self._probe(handle).reason or "unhealthy"
            try:
                new = self._rotate_locked(handle, owner, reason)
            except SparesExhausted:
                handle.lease_owner = None
                self._cond.notify_all()
                raise
        if handle.task is not None:
            self._install(new, handle.task, episode_key)
        return new

    def release(self, handle: EnvHandle, worker_id: Any) -> None:
        with self._cond:
            if handle.status != "leased" or handle.lease_owner != worker_id:
                raise NotLeaseOwner(f"{handle.env_id} is not leased by {worker_id!r}")
            handle.lease_owner = None
            handle.episodes_served += 1
            if handle.episodes_served % self.config.teardown_every_episodes == 0:
                self._recreate_locked(handle)
            handle.status = "idle" if self._probe(handle) else "unhealthy"
            self._recover()
            self._cond.notify_all()

    def _recreate_locked(self, handle: EnvHandle) -> None:
        handle.faults_retired += getattr(handle.device, "faults_fired", 0)
        handle.device = self._factory(handle.env_id, self._all.index(handle))
        handle.generation += 1
        handle.last_obs = None
        self.teardowns += 1

    # -- introspection -------------------------------------------------------------

    def counts(self) -> dict[str, int]:
        with self._cond:
            c = {s: 0 for s in STATUSES}
            for h in self._active:
                c[h.status] += 1
            c["retired"] = sum(1 for h in self._all if h.status == "retired")
            return c

    @property
    def spare_depth(self) -> int:
        with self._cond:
            return len(self._spares)

    @property
    def rotations(self) -> int:
        return self.spares_promoted

    def faults_fired(self) -> int:
        with self._cond:
            return sum(h.faults_fired for h in self._all)

    def handles(self) -> list[EnvHandle]:
        with self._cond:
            return list(self._all)

    def check_conservation(self) -> bool:
        with self._cond:
            active = set(map(id, self._active))
            spares = set(map(id, self._spares))
            retired = {id(h) for h in self._all if h.status == "retired"}
            pieces = [active, spares, retired]
            disjoint = sum(map(len, pieces)) == len(set().union(*pieces))
            total = len(set().union(*pieces)) == len(self._all)
            if not self._initialized:
                return disjoint and total
            ledger = self._initial_spares + self.spares_recycled - len(self._spares) == self.spares_promoted
            return disjoint and total and ledger

    def doctor(self) -> dict[str, Any]:
        counts = self.counts()
        with self._cond:
            return {
                "initialized": self._initialized,
                "backend": self.config.backend,
                "pool_size": self.config.pool_size,
                "counts": counts,
                "spare_depth": len(self._spares),
                "spares_promoted": self.spares_promoted,
                "spares_recycled": self.spares_recycled,
                "teardowns": self.teardowns,
                "faults_fired": sum(h.faults_fired for h in self._all),
                "rotation_log": list(self.rotation_log),
            }

