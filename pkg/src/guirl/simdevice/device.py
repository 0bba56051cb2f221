from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Any, NamedTuple

from .apps import AppRegistry, default_registry
from .types import (
    Action,
    Done,
    EnvFaulted,
    EpisodeTerminated,
    FaultPlan,
    ScreenState,
    SimDeviceError,
    TaskSpec,
)

# Simulated probe latency of a stalled device; any health timeout below this trips.
STALL_LATENCY_MS = 10**9


class StepResult(NamedTuple):
    obs: ScreenState
    terminal: bool
    info: dict[str, Any]


@dataclass
class ProbeResult:
    latency_ms: float
    crashed: bool = False
    stalled: bool = False


@dataclass
class SimDevice:
    """One simulated phone. Single-threaded; instances share nothing mutable."""

    registry: AppRegistry = field(default_factory=default_registry)
    device_id: str = "sim-0"

    def __post_init__(self):
        self.task: TaskSpec | None = None
        self.state: ScreenState | None = None
        self.steps = 0
        self.terminal = False
        self.crashed = False
        self.stalled = False
        self.faults_fired = 0
        self._plan: FaultPlan | None = None
        self._fault_rng: random.Random | None = None

    def reset(self, task: TaskSpec) -> ScreenState:
        if self.crashed or self.stalled:
            raise EnvFaulted("crash" if self.crashed else "stall", self.device_id)
        app = self.registry.get(task.app_id)
        self.task = task
        self.state = app.initial_state(task.init_seed)
        self.steps = 0
        self.terminal = False
        return self.state

    def step(self, action: Action) -> StepResult:
        if self.task is None or self.state is None:
            raise SimDeviceError("step before reset")
        if self.terminal:
            raise EpisodeTerminated(f"episode on {self.device_id} already terminal")
        if self.crashed or self.stalled:
            raise EnvFaulted("crash" if self.crashed else "stall", self.device_id)
        self._maybe_fault()
        app = self.registry.get(self.task.app_id)
        self.state, invalid = app.transition(self.state, action)
        self.steps += 1
        self.terminal = isinstance(action, Done) or self.steps >= self.task.max_steps
        info: dict[str, Any] = {"invalid": invalid, "steps": self.steps}
        return StepResult(self.state, self.terminal, info)

    # -- faults ------------------------------------------------------------------

    def inject(self, plan: FaultPlan | None) -> None:
        self._plan = plan
        self._fault_rng = random.Random(plan.rng_seed) if plan is not None else None

    def _maybe_fault(self) -> None:
        plan, rng = self._plan, self._fault_rng
        if plan is None or rng is None or (plan.crash_prob == 0 and plan.stall_prob == 0):
            return
        u = rng.random()
        if u < plan.crash_prob:
            self.crashed = True
        elif u < plan.crash_prob + plan.stall_prob:
            self.stalled = True
        else:
            return
        self.faults_fired += 1
        raise EnvFaulted("crash" if self.crashed else "stall", self.device_id)

    def restart(self) -> None:
        """Container restart: clear fault flags and return to the current task's reset state."""
        self.crashed = False
        self.stalled = False
        if self.task is not None:
            self.reset(self.task)

    def probe(self) -> ProbeResult:
        if self.crashed:
            return ProbeResult(0.0, crashed=True)
        if self.stalled:
            return ProbeResult(float(STALL_LATENCY_MS), stalled=True)
        return ProbeResult(0.0)


def reset(env: SimDevice, task: TaskSpec) -> ScreenState:
    return env.reset(task)


def step(env: SimDevice, action: Action) -> StepResult:
    return env.step(action)


def inject(env: SimDevice, plan: FaultPlan | None) -> None:
    env.inject(plan)
