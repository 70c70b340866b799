"""Streaming description generation with safety/length/timeout handling.

Any text generator plugs in behind :class:`GeneratorBackend` (an iterator of
chunks). The stream runner enforces the online contract: safety is checked
on accumulated text after every chunk so patterns spanning chunk boundaries
still fire, an offending chunk is withheld entirely, output is cut at the
configured length, and a wall-clock timeout can never leave a hung stream.
"""

from __future__ import annotations

import hashlib
import json
import os
import queue
import re
import threading
import time
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterator, Protocol

from .prompts import GenerationContext

DEFAULT_MAX_CHARS = 1200
DEFAULT_TIMEOUT_SECONDS = 3.0


class GenerationCancelled(Exception):
    """Raised when the caller's cancel event fires mid-stream."""


class GeneratorBackend(Protocol):
    def generate(self, instruction: str, image_ref: str) -> Iterator[str]: ...


GeneratorFactory = Callable[[GenerationContext], "GeneratorBackend"]


class StreamStatus(str, Enum):
    COMPLETE = "Complete"
    TRUNCATED = "Truncated"
    SAFETY_HALTED = "SafetyHalted"
    TIMED_OUT = "TimedOut"
    BACKEND_ERROR = "BackendError"


@dataclass
class StreamOutcome:
    text: str
    status: StreamStatus
    chunk_count: int
    elapsed: float
    reason: str | None = None


@dataclass(frozen=True)
class SafetyVerdict:
    allowed: bool
    reason: str | None = None


SafetyPredicate = Callable[[str], SafetyVerdict]


@dataclass(frozen=True)
class StreamLimits:
    max_chars: int = DEFAULT_MAX_CHARS
    timeout_seconds: float = DEFAULT_TIMEOUT_SECONDS

    def __post_init__(self) -> None:
        if self.max_chars < 1:
            raise ValueError("max_chars must be >= 1")
        if self.timeout_seconds <= 0:
            raise ValueError("timeout must be positive")


class Blocklist:
    """Regex blocklist; the first matching pattern names the verdict reason."""

    def __init__(self, patterns: list[str] | tuple[str, ...] = ()):
        self.patterns = [(p, re.compile(p)) for p in patterns]

    @classmethod
    def from_file(cls, path: str) -> "Blocklist":
        with open(path, encoding="utf-8") as fh:
            return cls(json.load(fh))

    def check(self, text: str) -> SafetyVerdict:
        for source, compiled in self.patterns:
            if compiled.search(text):
                return SafetyVerdict(allowed=False, reason=source)
        return SafetyVerdict(allowed=True)

    def __call__(self, text: str) -> SafetyVerdict:
        return self.check(text)


def allow_all(_: str) -> SafetyVerdict:
    return SafetyVerdict(allowed=True)


def generate_stream(
    instruction: str,
    image_ref: str,
    backend: GeneratorBackend,
    safety: SafetyPredicate,
    limits: StreamLimits,
    consumer: Callable[[str], None] | None = None,
    cancel: threading.Event | None = None,
) -> StreamOutcome:
    """Run one generation, forwarding exposable chunks to ``consumer``.

    The backend runs in a worker thread so a stalled backend turns into a
    TimedOut outcome instead of a hung caller. After each received chunk the
    candidate output is first cut to ``max_chars``; the safety predicate then
    runs on that exposable prefix, and a disallowed verdict withholds the
    whole offending chunk.
    """
    start = time.perf_counter()
    events: queue.Queue = queue.Queue()
    stop = threading.Event()

    def worker() -> None:
        try:
            for chunk in backend.generate(instruction, image_ref):
                if stop.is_set():
                    return
                events.put(("chunk", chunk))
            events.put(("done", None))
        except Exception as exc:  # backend failures surface as a terminal status
            events.put(("error", exc))

    threading.Thread(target=worker, daemon=True).start()

    exposed = ""
    chunk_count = 0
    status: StreamStatus | None = None
    reason: str | None = None
    try:
        while status is None:
            if cancel is not None and cancel.is_set():
                raise GenerationCancelled()
            remaining = limits.timeout_seconds - (time.perf_counter() - start)
            if remaining <= 0:
                status = StreamStatus.TIMED_OUT
                break
            try:
                kind, payload = events.get(timeout=remaining)
            except queue.Empty:
                status = StreamStatus.TIMED_OUT
                break
            if kind == "done":
                status = StreamStatus.COMPLETE
            elif kind == "error":
                status = StreamStatus.BACKEND_ERROR
                reason = str(payload)
            else:
                chunk_count += 1
                candidate = exposed + payload
                truncated = len(candidate) > limits.max_chars
                if truncated:
                    candidate = candidate[: limits.max_chars]
                verdict = safety(candidate)
                if not verdict.allowed:
                    status = StreamStatus.SAFETY_HALTED
                    reason = verdict.reason
                    break
                delta = candidate[len(exposed):]
                if delta and consumer is not None:
                    consumer(delta)
                exposed = candidate
                if truncated:
                    status = StreamStatus.TRUNCATED
    finally:
        stop.set()

    return StreamOutcome(
        text=exposed,
        status=status,
        chunk_count=chunk_count,
        elapsed=time.perf_counter() - start,
        reason=reason,
    )


# ---------------------------------------------------------------------------
# Backends
# ---------------------------------------------------------------------------


class StaticBackend:
    """Streams a fixed text in fixed-size chunks; optional per-chunk delay."""

    def __init__(self, text: str, chunk_size: int = 24, delay: float = 0.0):
        if chunk_size < 1:
            raise ValueError("chunk_size must be >= 1")
        self.text = text
        self.chunk_size = chunk_size
        self.delay = delay

    def generate(self, instruction: str, image_ref: str) -> Iterator[str]:
        for i in range(0, len(self.text), self.chunk_size):
            if self.delay:
                time.sleep(self.delay)
            yield self.text[i : i + self.chunk_size]


_GENERIC_SENTENCES = (
    "Personal used item, condition as shown in the pictures, works perfectly, "
    "contact me if interested.",
    "Selling a personal item in good condition, details as shown in the pictures, "
    "message me if interested.",
    "Used item from a smoke-free home, exactly as pictured, happy to answer questions, "
    "feel free to reach out.",
)

_FILLER_HEAD = "Personal used "
_FILLER_TAIL = (
    ", condition as shown in the pictures, all original, "
    "for those interested, please contact me privately."
)


def mock_generate(ctx: GenerationContext) -> str:
    """Deterministic stand-in generator.

    Reference attribute values are rendered in template order between C2C
    filler phrases; without reference values the output is a generic sentence
    keyed by the image-ref hash, so the mock can never invent attributes.
    """
    ctx.validate()
    values: list[str] = []
    if ctx.template is not None and ctx.reference_attrs is not None:
        values = [
            ctx.reference_attrs.values[name]
            for name in ctx.template.names
            if name in ctx.reference_attrs.values
        ]
    if values:
        return _FILLER_HEAD + " ".join(values) + _FILLER_TAIL
    digest = hashlib.sha256(ctx.image_ref.encode("utf-8")).digest()
    return _GENERIC_SENTENCES[digest[0] % len(_GENERIC_SENTENCES)]


def mock_backend_factory(chunk_size: int = 24, delay: float = 0.0) -> GeneratorFactory:
    def factory(ctx: GenerationContext) -> GeneratorBackend:
        return StaticBackend(mock_generate(ctx), chunk_size=chunk_size, delay=delay)

    return factory


ENV_BASE_URL = "LISTINGKIT_LLM_BASE_URL"
ENV_API_KEY = "LISTINGKIT_LLM_API_KEY"


class HttpBackend:
    """External LLM over HTTP: POST {instruction, image_url}, chunked text back.

    Endpoint and credentials come from the environment unless given
    explicitly; a preconfigured httpx client can be injected for tests.
    """

    def __init__(
        self,
        base_url: str | None = None,
        api_key: str | None = None,
        path: str = "/generate",
        client=None,
    ):
        import httpx

        self.base_url = base_url or os.environ.get(ENV_BASE_URL, "")
        if not self.base_url:
            raise ValueError(f"no base URL configured (set {ENV_BASE_URL})")
        self.api_key = api_key if api_key is not None else os.environ.get(ENV_API_KEY, "")
        self.path = path
        self._client = client or httpx.Client(base_url=self.base_url, timeout=30.0)

    def generate(self, instruction: str, image_ref: str) -> Iterator[str]:
        headers = {}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        with self._client.stream(
            "POST",
            self.path,
            json={"instruction": instruction, "image_url": image_ref},
            headers=headers,
        ) as response:
            response.raise_for_status()
            for chunk in response.iter_text():
                if chunk:
                    yield chunk


def http_backend_factory(**kwargs) -> GeneratorFactory:
    backend = HttpBackend(**kwargs)
    return lambda ctx: backend
