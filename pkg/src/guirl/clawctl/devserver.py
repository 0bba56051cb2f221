"""Serves one SimDevice over the remote-device wire protocol (see guirl.remote)."""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Any

import httpx

from ..simdevice import (
    EnvFaulted,
    EpisodeTerminated,
    FaultPlan,
    InvalidAction,
    SimDevice,
    SimDeviceError,
    TaskSpec,
    action_from_dict,
)


class DeviceServer:
    def __init__(self, device: SimDevice | None = None):
        self.device = device or SimDevice()
        self._lock = threading.Lock()

    def handle(self, method: str, path: str, body: dict[str, Any]) -> tuple[int, dict[str, Any]]:
        with self._lock:
            try:
                return 200, self._dispatch(method, path, body)
            except EnvFaulted as exc:
                return 503, {"error": "env_faulted", "kind": exc.kind, "faults_fired": self.device.faults_fired}
            except EpisodeTerminated as exc:
                return 409, {"error": "terminated", "message": str(exc)}
            except (InvalidAction, KeyError, TypeError, ValueError) as exc:
                return 400, {"error": "bad_request", "message": str(exc)}
            except SimDeviceError as exc:
                return 500, {"error": "device", "message": str(exc)}

    def _dispatch(self, method: str, path: str, body: dict[str, Any]) -> dict[str, Any]:
        dev = self.device
        if (method, path) == ("GET", "/health"):
            return {"crashed": dev.crashed, "stalled": dev.stalled, "faults_fired": dev.faults_fired}
        if (method, path) == ("POST", "/reset"):
            return {"obs": dev.reset(TaskSpec.from_dict(body["task"])).to_dict()}
        if (method, path) == ("POST", "/step"):
            res = dev.step(action_from_dict(body["action"]))
            return {"obs": res.obs.to_dict(), "terminal": res.terminal, "info": res.info}
        if (method, path) == ("POST", "/inject"):
            plan = body.get("plan")
            dev.inject(FaultPlan(**plan) if plan is not None else None)
            return {}
        if (method, path) == ("POST", "/restart"):
            dev.restart()
            return {}
        raise KeyError(f"no route {method} {path}")

    def transport(self) -> httpx.MockTransport:
        """In-process transport: no sockets involved."""

        def route(request: httpx.Request) -> httpx.Response:
            body = json.loads(request.content) if request.content else {}
            status, data = self.handle(request.method, request.url.path, body)
            return httpx.Response(status, json=data)

        return httpx.MockTransport(route)

    def serve(self, host: str = "127.0.0.1", port: int = 0) -> ThreadingHTTPServer:
        """Bind a threaded HTTP server; the caller runs serve_forever()."""
        handler = _handler_for(self.handle)
        return ThreadingHTTPServer((host, port), handler)


def _handler_for(handle):
    class Handler(BaseHTTPRequestHandler):
        def _reply(self, status: int, data: dict[str, Any]) -> None:
            blob = json.dumps(data).encode()
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(blob)))
            self.end_headers()
            self.wfile.write(blob)

        def _body(self) -> dict[str, Any]:
            n = int(self.headers.get("Content-Length") or 0)
            return json.loads(self.rfile.read(n)) if n else {}

        def do_GET(self):
            self._reply(*handle("GET", self.path, {}))

        def do_POST(self):
            self._reply(*handle("POST", self.path, self._body()))

        def log_message(self, *args):
            pass

    return Handler
