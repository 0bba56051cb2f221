"""Device backend reached over HTTP: the same reset/step/probe surface as SimDevice.

Wire protocol (JSON bodies):

    GET  /health   -> {"crashed": bool, "stalled": bool, "faults_fired": int}
    POST /reset    {"task": TaskSpec}            -> {"obs": ScreenState}
    POST /step     {"action": Action}            -> {"obs", "terminal", "info"}
    POST /inject   {"plan": FaultPlan | null}    -> {}
    POST /restart  {}                            -> {}

A faulted device answers 503 with {"error": "env_faulted", "kind": "crash" | "stall"}.
"""

from __future__ import annotations

import dataclasses
import time
from typing import Any

import httpx

from .simdevice import (
    Action,
    EnvFaulted,
    EpisodeTerminated,
    FaultPlan,
    InvalidAction,
    ScreenState,
    SimDeviceError,
    TaskSpec,
    action_to_dict,
)
from .simdevice.device import STALL_LATENCY_MS, ProbeResult, StepResult


class RemoteDevice:
    def __init__(self, base_url: str, device_id: str = "remote-0", timeout_ms: int = 5_000,
                 transport: httpx.BaseTransport | None = None):
        self.base_url = base_url
        self.device_id = device_id
        self.faults_fired = 0
        self._http = httpx.Client(base_url=base_url, timeout=timeout_ms / 1000.0, transport=transport)

    def close(self) -> None:
        self._http.close()

    def _call(self, method: str, path: str, body: dict[str, Any] | None = None) -> dict[str, Any]:
        try:
            resp = self._http.request(method, path, json=body)
        except httpx.TransportError as exc:
            raise EnvFaulted("crash", self.device_id) from exc
        data = resp.json() if resp.content else {}
        if resp.status_code == 503 and data.get("error") == "env_faulted":
            self.faults_fired = int(data.get("faults_fired", self.faults_fired))
            raise EnvFaulted(data.get("kind", "crash"), self.device_id)
        if resp.status_code == 409:
            raise EpisodeTerminated(data.get("message", "episode already terminal"))
        if resp.status_code == 400:
            raise InvalidAction(data.get("message", "invalid request"))
        if resp.status_code >= 400:
            raise SimDeviceError(f"{path}: HTTP {resp.status_code}")
        return data

    def reset(self, task: TaskSpec) -> ScreenState:
        return ScreenState.from_dict(self._call("POST", "/reset", {"task": task.to_dict()})["obs"])

    def step(self, action: Action) -> StepResult:
        data = self._call("POST", "/step", {"action": action_to_dict(action)})
        return StepResult(ScreenState.from_dict(data["obs"]), bool(data["terminal"]), dict(data.get("info", {})))

    def inject(self, plan: FaultPlan | None) -> None:
        self._call("POST", "/inject", {"plan": dataclasses.asdict(plan) if plan is not None else None})

    def restart(self) -> None:
        self._call("POST", "/restart", {})

    def probe(self) -> ProbeResult:
        start = time.perf_counter()
        try:
            data = self._call("GET", "/health")
        except (EnvFaulted, SimDeviceError):
            return ProbeResult(0.0, crashed=True)
        latency = (time.perf_counter() - start) * 1000.0
        self.faults_fired = int(data.get("faults_fired", self.faults_fired))
        if data.get("crashed"):
            return ProbeResult(latency, crashed=True)
        if data.get("stalled"):
            return ProbeResult(float(STALL_LATENCY_MS), stalled=True)
        return ProbeResult(latency)
