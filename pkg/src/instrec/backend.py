"""Uniform interface to generative model services.

Two request modes cover everything the engine needs: whole-text generation
(reasoning construction and refinement) and per-step next-token scoring
(constrained decoding). The trie applies its own mask; backends never see it.

Ships a deterministic scripted mock for tests and a generic HTTP adapter.
"""

from __future__ import annotations

import base64
import json
import threading
import urllib.error
import urllib.request
from dataclasses import dataclass
from enum import Enum
from typing import Any, Protocol, Sequence

import numpy as np

from .exceptions import (
    BackendUnreachable,
    DimensionMismatch,
    InvariantViolation,
    MalformedResponse,
    NoScriptMatch,
)
from .types import Modality, Prompt, Trigger


class Mode(str, Enum):
    GENERATE_TEXT = "generate_text"
    SCORE_TOKENS = "score_tokens"


@dataclass(frozen=True)
class BackendRequest:
    """Carrier for one model call: prompt, trigger, mode, optional prefix."""

    prompt: Prompt
    trigger: Trigger
    mode: Mode
    prefix: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        if self.mode is Mode.SCORE_TOKENS and self.prefix is None:
            raise InvariantViolation("score_tokens requests require a prefix")


def serialize_request(req: BackendRequest) -> str:
    """Canonical plain-text form of a request.

    Mock script patterns are matched as substrings of this string, so the
    layout is part of the mock's contract: mode line, trigger line, prefix
    line, then the full prompt body with literal newlines.
    """
    prefix_repr = "none" if req.prefix is None else str(list(req.prefix))
    return "\n".join(
        [
            f"mode: {req.mode.value}",
            f"trigger: {req.trigger.id} {req.trigger.content_text()}",
            f"prefix: {prefix_repr}",
            f"prompt:\n{req.prompt.body}",
        ]
    )


class ModelBackend(Protocol):
    def generate_text(self, req: BackendRequest) -> str: ...

    def score_tokens(self, req: BackendRequest) -> np.ndarray: ...


@dataclass(frozen=True)
class ScriptEntry:
    """One mock rule: a substring pattern and exactly one response kind."""

    match: str
    text: str | None = None
    logits: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if (self.text is None) == (self.logits is None):
            raise InvariantViolation(
                "script entry needs exactly one of text / logits"
            )


class MockScript:
    """Ordered list of script entries; first match wins."""

    def __init__(self, entries: Sequence[ScriptEntry]):
        self.entries = list(entries)

    @classmethod
    def from_list(cls, raw: Sequence[dict[str, Any]]) -> MockScript:
        entries = []
        for item in raw:
            logits = item.get("logits")
            entries.append(
                ScriptEntry(
                    match=item["match"],
                    text=item.get("text"),
                    logits=tuple(float(x) for x in logits) if logits is not None else None,
                )
            )
        return cls(entries)

    @classmethod
    def load(cls, path: str) -> MockScript:
        with open(path, encoding="utf-8") as f:
            return cls.from_list(json.load(f))

    def to_list(self) -> list[dict[str, Any]]:
        out = []
        for e in self.entries:
            d: dict[str, Any] = {"match": e.match}
            if e.text is not None:
                d["text"] = e.text
            else:
                d["logits"] = list(e.logits)  # type: ignore[arg-type]
            out.append(d)
        return out


class MockBackend:
    """Deterministic test double: replays the first matching script entry.

    Matching requires the response kind to fit the request mode, so a text
    entry never answers a scoring request. Bit-exact for identical request
    sequences; internal lock keeps concurrent use serialized.
    """

    def __init__(self, script: MockScript, vocab_size: int | None = None):
        self.script = script
        self.vocab_size = vocab_size
        self._lock = threading.Lock()

    def _find(self, req: BackendRequest, want_text: bool) -> ScriptEntry:
        serialized = serialize_request(req)
        with self._lock:
            for entry in self.script.entries:
                if (entry.text is not None) == want_text and entry.match in serialized:
                    return entry
        raise NoScriptMatch(
            f"no {'text' if want_text else 'logits'} entry matches request "
            f"(mode={req.mode.value}, trigger={req.trigger.id})"
        )

    def generate_text(self, req: BackendRequest) -> str:
        if req.mode is not Mode.GENERATE_TEXT:
            raise InvariantViolation("generate_text called with wrong mode")
        return self._find(req, want_text=True).text  # type: ignore[return-value]

    def score_tokens(self, req: BackendRequest) -> np.ndarray:
        if req.mode is not Mode.SCORE_TOKENS:
            raise InvariantViolation("score_tokens called with wrong mode")
        entry = self._find(req, want_text=False)
        logits = np.asarray(entry.logits, dtype=np.float64)
        if self.vocab_size is not None and logits.shape != (self.vocab_size,):
            raise DimensionMismatch(
                f"script entry has {logits.shape[0]} logits, expected {self.vocab_size}"
            )
        return logits


def _trigger_wire(trigger: Trigger) -> dict[str, Any]:
    if trigger.modality is Modality.TEXT:
        return {"modality": "text", "text": trigger.text}
    if isinstance(trigger.image_ref, bytes):
        payload = trigger.image_ref
    else:
        with open(trigger.image_ref, "rb") as f:  # type: ignore[arg-type]
            payload = f.read()
    return {"modality": "image", "image_b64": base64.b64encode(payload).decode("ascii")}


class HttpBackend:
    """Generic adapter speaking the neutral /generate wire format.

    POST {endpoint}/generate with
    ``{"prompt", "trigger", "mode", "prefix"?}``; the response carries
    ``{"text"}`` or ``{"logits"}``. Non-200 statuses and transport errors
    raise BackendUnreachable. No automatic retries; callers decide.
    """

    def __init__(self, endpoint: str, timeout: float = 30.0, vocab_size: int | None = None):
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout
        self.vocab_size = vocab_size

    def _post(self, req: BackendRequest) -> dict[str, Any]:
        body: dict[str, Any] = {
            "prompt": req.prompt.body,
            "trigger": _trigger_wire(req.trigger),
            "mode": req.mode.value,
        }
        if req.prefix is not None:
            body["prefix"] = list(req.prefix)
        data = json.dumps(body).encode("utf-8")
        request = urllib.request.Request(
            f"{self.endpoint}/generate",
            data=data,
            headers={"Content-Type": "application/json"},
            method="POST",
        )
        try:
            with urllib.request.urlopen(request, timeout=self.timeout) as resp:
                if resp.status != 200:
                    raise BackendUnreachable(f"backend returned {resp.status}")
                payload = resp.read()
        except urllib.error.HTTPError as exc:
            raise BackendUnreachable(f"backend returned {exc.code}") from exc
        except (urllib.error.URLError, TimeoutError, OSError) as exc:
            raise BackendUnreachable(str(exc)) from exc
        try:
            return json.loads(payload)
        except json.JSONDecodeError as exc:
            raise MalformedResponse("backend response is not JSON") from exc

    def generate_text(self, req: BackendRequest) -> str:
        payload = self._post(req)
        text = payload.get("text")
        if not isinstance(text, str):
            raise MalformedResponse("response missing 'text'")
        return text

    def score_tokens(self, req: BackendRequest) -> np.ndarray:
        payload = self._post(req)
        logits = payload.get("logits")
        if not isinstance(logits, list):
            raise MalformedResponse("response missing 'logits'")
        arr = np.asarray(logits, dtype=np.float64)
        if self.vocab_size is not None and arr.shape != (self.vocab_size,):
            raise DimensionMismatch(
                f"backend returned {arr.shape[0]} logits, expected {self.vocab_size}"
            )
        return arr
