"""Deterministic chat-completions mock endpoint.

Modes
    echo     grounding answers from the image: the painted target's interior point nearest its centroid;
             no target -> the refusal token; action prompts are answered from ``answers`` or the target
    zoom     like echo, but coarse-pass requests are shifted by up to +-``noise`` pixels per axis
    judge    grades rewardkit judge requests with the simulator's privileged oracle
    policy   answers RemotePolicy prompts with the oracle's next action
    refuse   always the refusal token
    garbage  never parseable
    flaky    the HTTP statuses in ``script`` first, then behaves as ``then``
    slow     every request times out
"""

from __future__ import annotations

import hashlib
import json
import threading
from typing import Any, Mapping

import httpx
import numpy as np

from ..evalpipe.imaging import decode_image
from ..evalpipe.parsing import from_pixels
from ..evalpipe.prompts import COARSE_MARK, instruction_of

MODES = ("echo", "zoom", "judge", "policy", "refuse", "garbage", "flaky", "slow")


def locate_target(image, threshold: int = 60) -> tuple[int, int] | None:
    """Pixel (column, row) of the red target: the eroded-interior pixel nearest the red centroid."""
    a = np.asarray(image, dtype=np.int16)
    mask = (a[..., 0] > 255 - threshold) & (a[..., 1] < threshold) & (a[..., 2] < threshold)
    if not mask.any():
        return None
    core = mask.copy()
    core[1:, :] &= mask[:-1, :]
    core[:-1, :] &= mask[1:, :]
    core[:, 1:] &= mask[:, :-1]
    core[:, :-1] &= mask[:, 1:]
    core[0, :] = core[-1, :] = False
    core[:, 0] = core[:, -1] = False
    use = core if core.any() else mask
    ys, xs = np.nonzero(use)
    cy, cx = ys.mean(), xs.mean()
    i = int(np.argmin((xs - cx) ** 2 + (ys - cy) ** 2))
    return int(xs[i]), int(ys[i])


def _noise(key: str, amplitude: int) -> tuple[int, int]:
    h = hashlib.sha256(key.encode()).digest()
    span = 2 * amplitude + 1
    return (int.from_bytes(h[:4], "big") % span - amplitude, int.from_bytes(h[4:8], "big") % span - amplitude)


class MockServer:
    def __init__(self, mode: str = "echo", convention: str = "absolute_pixels", refusal_token: str = "REFUSE",
                 answers: Mapping[str, str] | None = None, noise: int = 100, script: tuple[int, ...] = (),
                 then: str = "echo", suite=None, registry=None):
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        self.mode = mode
        self.convention = convention
        self.refusal_token = refusal_token
        self.answers = dict(answers or {})
        self.noise = noise
        self.script = list(script)
        self.then = then
        self.suite = suite
        self.registry = registry
        self.requests: list[dict[str, Any]] = []
        self._lock = threading.Lock()

    # -- protocol ---------------------------------------------------------------

    def handle(self, body: dict[str, Any]) -> tuple[int, dict[str, Any]]:
        with self._lock:
            self.requests.append(body)
            mode = self.mode
            if mode == "flaky":
                if self.script:
                    status = self.script.pop(0)
                    if status != 200:
                        return status, {"error": {"message": f"scripted {status}"}}
                mode = self.then
        if mode == "slow":
            raise httpx.ReadTimeout("mock endpoint timed out")
        content = self.reply(body, mode)
        return 200, {"id": "mock", "object": "chat.completion", "model": body.get("model", "mock"),
                     "choices": [{"index": 0, "finish_reason": "stop",
                                  "message": {"role": "assistant", "content": content}}]}

    def transport(self) -> httpx.MockTransport:
        def route(request: httpx.Request) -> httpx.Response:
            if request.url.path != "/v1/chat/completions":
                return httpx.Response(404, json={"error": {"message": "not found"}})
            status, data = self.handle(json.loads(request.content))
            return httpx.Response(status, json=data)

        return httpx.MockTransport(route)

    # -- replies ----------------------------------------------------------------

    def reply(self, body: dict[str, Any], mode: str) -> str:
        if mode == "refuse":
            return self.refusal_token
        if mode == "garbage":
            return "lorem ipsum dolor sit amet"
        text, image = _split(body.get("messages", []))
        if mode == "judge":
            return self._judge(body.get("messages", []))
        if mode == "policy":
            return self._policy(text)
        instruction = instruction_of(text)
        if "JSON action" in text and instruction in self.answers:
            return self.answers[instruction]
        if image is None:
            return self.refusal_token
        img = decode_image(image)
        target = locate_target(img)
        if target is None:
            return self.refusal_token
        x, y = target
        if mode == "zoom" and COARSE_MARK in text:
            dx, dy = _noise(instruction, self.noise)
            x = min(max(x + dx, 0), img.size[0] - 1)
            y = min(max(y + dy, 0), img.size[1] - 1)
        px, py = from_pixels(x, y, self.convention, img.size)
        if "JSON action" in text:
            kind = "long_press" if instruction.lower().startswith("long-press") else "click"
            return json.dumps({"type": kind, "point": [px, py]})
        if "bounding box" in text:
            return f"[{px}, {py}, {px}, {py}]"
        return f"({px}, {py})"

    def _task(self, instruction: str):
        from ..simdevice import load_suite

        suite = self.suite or load_suite()
        for t in suite:
            if t.instruction == instruction:
                return t
        return None

    def _judge(self, messages) -> str:
        from ..simdevice import ScreenState, oracle_distance, UNREACHABLE, verify_outcome

        system = messages[0]["content"] if messages else ""
        payload = json.loads(messages[-1]["content"])
        task = self._task(payload.get("instruction", ""))
        if task is None:
            return "failure" if "success or failure" in system else "0"
        if "final_obs" in payload:
            ok = verify_outcome(ScreenState.from_dict(payload["final_obs"]), task)
            return "success" if ok else "failure"
        before = oracle_distance(ScreenState.from_dict(payload["prev_obs"]), task, self.registry)
        after = oracle_distance(ScreenState.from_dict(payload["cur_obs"]), task, self.registry)
        return "1" if after != UNREACHABLE and after < before else "0"

    def _policy(self, text: str) -> str:
        from ..simdevice import Done, ScreenState, action_to_dict, task_oracle

        try:
            doc = json.loads(text)
        except ValueError:
            return "no idea"
        task = self._task(doc.get("instruction", ""))
        if task is None:
            return json.dumps({"type": "done"})
        nxt = task_oracle(task, self.registry).next_action(ScreenState.from_dict(doc["screen"]))
        return json.dumps(action_to_dict(nxt if nxt is not None else Done()))


def _split(messages) -> tuple[str, str | None]:
    """Text of the last user message and its base64 image, if any."""
    if not messages:
        return "", None
    content = messages[-1].get("content")
    if isinstance(content, str):
        return content, None
    text, image = "", None
    for part in content or ():
        if part.get("type") == "text":
            text += part.get("text", "")
        elif part.get("type") == "image_url":
            url = part["image_url"]["url"]
            image = url.split(",", 1)[1] if "," in url else url
    return text, image


def echo_answers(dataset, convention: str = "absolute_pixels") -> dict[str, str]:
    """Scripted replies for text-only action samples, keyed by instruction."""
    from ..evalpipe.types import ActionRecord

    out = {}
    for s in dataset:
        gt = s.ground_truth
        if isinstance(gt, ActionRecord) and gt.bbox is None:
            out[s.instruction] = json.dumps(gt.to_dict(), sort_keys=True)
    return out
