"""Chat-completion client contract plus deterministic offline implementations.

Every optimizer loop talks to a client through a single method::

    send(messages, images=None, kind="any") -> str

``messages`` is a list of {"role", "content"} dicts, ``images`` an optional
list of PNG file paths for multi-modal clients and ``kind`` a loop-supplied
tag ("init", "feedback", "lhs-init", "lhs-update") that scripted stubs may
match on.  Transport failures raise :class:`LlmTransportError`; a client
never returns an empty response silently.

No model output is ever executed; responses are parsed strictly as data.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np


class LlmTransportError(RuntimeError):
    """The client could not obtain a response."""


@dataclass
class LlmExchange:
    """Audit record of one request/response round trip."""

    kind: str
    messages: list
    response: str
    outcome: str             # layout | parse-error | constraint-error | transport-error | data
    retry_index: int = 0
    latency_ms: int = 0
    note: str = ""

    def to_json_dict(self) -> dict:
        return {"kind": self.kind, "messages": self.messages,
                "response": self.response, "outcome": self.outcome,
                "retry_index": self.retry_index, "latency_ms": self.latency_ms,
                "note": self.note}


class ChatClient:
    """Base contract; see module docstring."""

    supports_images: bool = False

    def send(self, messages: list[dict], images: Optional[list[str]] = None,
             kind: str = "any") -> str:
        raise NotImplementedError


class ScriptedStubClient(ChatClient):
    """Replays canned responses; the offline stand-in used by every test.

    Entries are dicts {"match": "init"|"feedback"|"lhs-init"|"lhs-update"|"any",
    "response": str} consumed in order; an entry with "repeat": true is
    sticky and satisfies any later matching request.  A request with no
    matching entry raises a transport error.
    """

    def __init__(self, entries: list[dict]):
        self.entries = [dict(e) for e in entries]
        self.consumed = [False] * len(self.entries)
        self.requests: list[tuple[str, int]] = []

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedStubClient":
        return cls(json.loads(Path(path).read_text()))

    def send(self, messages, images=None, kind="any"):
        for i, entry in enumerate(self.entries):
            if self.consumed[i] and not entry.get("repeat"):
                continue
            match = entry.get("match", "any")
            if match == "any" or kind == "any" or match == kind:
                self.consumed[i] = True
                self.requests.append((kind, i))
                return entry["response"]
        raise LlmTransportError(f"script exhausted for request kind {kind!r}")


def _windows_json(vec: np.ndarray, n: int) -> str:
    windows = [
        {"x": round(float(vec[k]), 4),
         "theta_deg": round(math.degrees(float(vec[n + k])), 3),
         "psi_deg": round(math.degrees(float(vec[2 * n + k])), 3)}
        for k in range(n)
    ]
    return json.dumps({"windows": windows})


class BuiltinPseudoLlm(ChatClient):
    """Deterministic scripted explorer satisfying the client contract.

    It walks a fixed schedule of scenario-derived candidate layouts:
    every "init" request returns the first candidate, each "feedback"
    request advances to the next one (repeating the last when exhausted),
    and the LHS kinds map onto the same schedule (algorithm pick plus
    population slices).  The schedule does not depend on the feedback
    content, so the set of evaluated candidates is identical across runs
    that only differ in the daylight weighting.
    """

    def __init__(self, scenario):
        from .heuristics import repair_population, solution_bounds

        self.scenario = scenario
        self.n = scenario.room.n_windows
        self._feedback_i = 0
        self._inject_i = 0

        room = scenario.room
        summary = scenario.weight_summary()
        cx = summary["centroid_x"]
        hot = summary["hotspots"]
        wp = scenario.grid.workplane_z
        depth_mid = room.y0 + room.width / 2
        n = self.n

        def aim(x_window: float, target_xy: tuple[float, float]) -> tuple[float, float]:
            dx = target_xy[0] - x_window
            dy = target_xy[1] - room.y0
            dz = wp - room.win_center_z
            d = math.sqrt(dx * dx + dy * dy + dz * dz)
            theta = math.acos(max(-1.0, min(1.0, abs(dy) / d)))
            psi = math.atan2(dz / d, dx / d) % (2 * math.pi)
            return theta, psi

        def make(xs, targets=None, d_theta=0.0):
            xs = np.asarray(xs, dtype=float)
            thetas = np.zeros(n)
            psis = np.zeros(n)
            if targets is not None:
                for k in range(n):
                    t, p = aim(xs[k], targets[min(k, len(targets) - 1)])
                    thetas[k] = max(0.0, t + d_theta)
                    psis[k] = p
            vec = np.concatenate([xs, thetas, psis])
            return repair_population(vec, scenario)

        udw_xs = scenario.udw.xs
        spacing = max(scenario.cfg.d_min, room.win_width + 0.05)
        cluster = cx + spacing * (np.arange(n) - (n - 1) / 2)
        hot_xy = [(h["x"], h["y"]) for h in hot] or [(cx, depth_mid)]
        centroid_t = [(cx, summary["centroid_y"])]
        quarters = [room.x0 + room.length * (k + 1) / (n + 1) for k in range(n)]

        cands = [
            make(udw_xs),                                     # reference anchor
            make(udw_xs, centroid_t),
            make(cluster),
            make(cluster, centroid_t),
            make(cluster, hot_xy),
            make(quarters, centroid_t),
            make(cluster, centroid_t, d_theta=math.radians(5)),
            make(cluster, centroid_t, d_theta=math.radians(-5)),
            make(quarters, hot_xy),
            make(udw_xs, hot_xy),
            make(cluster, [hot_xy[0]]),
            make(quarters),
        ]
        self.candidates = cands

    def send(self, messages, images=None, kind="any"):
        n = self.n
        if kind in ("init", "any"):
            return _windows_json(self.candidates[0], n)
        if kind == "feedback":
            i = min(self._feedback_i + 1, len(self.candidates) - 1)
            self._feedback_i += 1
            return _windows_json(self.candidates[i], n)
        if kind == "lhs-init":
            pop = [json.loads(_windows_json(c, n)) for c in self.candidates]
            return json.dumps({
                "algorithm": "saga",
                "hyper_parameters": {"population_size": 50, "crossover_prob": 0.7,
                                     "mutation_prob": 0.3, "elite_count": 2,
                                     "temp_high": 100.0, "temp_low": 5.0,
                                     "cooling": 0.98},
                "population": pop,
            })
        if kind == "lhs-update":
            i = min(self._inject_i + 1, len(self.candidates) - 1)
            self._inject_i += 1
            inject = [json.loads(_windows_json(self.candidates[i], n))]
            return json.dumps({"inject": inject})
        raise LlmTransportError(f"unsupported request kind {kind!r}")


class HttpChatClient(ChatClient):
    """Thin JSON-over-HTTP client configured from the environment.

    Reads LUXLINK_LLM_URL, LUXLINK_LLM_KEY and LUXLINK_LLM_MODEL; payload
    and response follow the common chat-completions shape, with a fallback
    for servers that return a content-block list.  Network access is only
    attempted here; nothing else in the package performs I/O to remote
    services, and the test suite never constructs this client.
    """

    supports_images = False   # text-only transport; images are dropped

    def __init__(self, url: Optional[str] = None, api_key: Optional[str] = None,
                 model: Optional[str] = None, temperature: float = 0.7,
                 timeout_s: float = 60.0, max_retries: int = 2):
        self.url = url or os.environ.get("LUXLINK_LLM_URL", "")
        self.api_key = api_key or os.environ.get("LUXLINK_LLM_KEY", "")
        self.model = model or os.environ.get("LUXLINK_LLM_MODEL", "")
        self.temperature = temperature
        self.timeout_s = timeout_s
        self.max_retries = max_retries
        if not self.url:
            raise LlmTransportError("no endpoint URL configured (LUXLINK_LLM_URL)")

    def send(self, messages, images=None, kind="any"):
        import urllib.error
        import urllib.request

        payload = json.dumps({"model": self.model, "messages": messages,
                              "temperature": self.temperature}).encode()
        last_err: Exception | None = None
        for _ in range(self.max_retries + 1):
            req = urllib.request.Request(
                self.url, data=payload,
                headers={"Content-Type": "application/json",
                         "Authorization": f"Bearer {self.api_key}"})
            try:
                with urllib.request.urlopen(req, timeout=self.timeout_s) as resp:
                    data = json.loads(resp.read().decode())
                if "choices" in data:
                    text = data["choices"][0]["message"]["content"]
                elif "content" in data:
                    blocks = data["content"]
                    text = "".join(b.get("text", "") for b in blocks) \
                        if isinstance(blocks, list) else str(blocks)
                else:
                    raise LlmTransportError(f"unrecognised response shape: {list(data)}")
                if not text:
                    raise LlmTransportError("empty response body")
                return text
            except (urllib.error.URLError, TimeoutError, KeyError, ValueError) as err:
                last_err = err
        raise LlmTransportError(f"request failed after retries: {last_err}")
