from __future__ import annotations

import random
import threading
import time

import pytest

from listingkit.attributes import AttributeTemplate, ExtractedAttributes
from listingkit.catalog import CategoryNode
from listingkit.generation import (
    Blocklist,
    GenerationCancelled,
    StaticBackend,
    StreamLimits,
    StreamOutcome,
    StreamStatus,
    allow_all,
    generate_stream,
    mock_generate,
)
from listingkit.prompts import GenerationContext, Variant

from oracles import oracle_whole_word_match


class ScriptedBackend:
    def __init__(self, chunks, error=None, delay=0.0, hang_after=None):
        self.chunks = chunks
        self.error = error
        self.delay = delay
        self.hang_after = hang_after

    def generate(self, instruction, image_ref):
        for i, chunk in enumerate(self.chunks):
            if self.hang_after is not None and i >= self.hang_after:
                time.sleep(3600)
            if self.delay:
                time.sleep(self.delay)
            yield chunk
        if self.error is not None:
            raise self.error


LIMITS = StreamLimits(max_chars=100, timeout_seconds=2.0)


def run(backend, safety=allow_all, limits=LIMITS, consumer=None, cancel=None) -> StreamOutcome:
    return generate_stream("instr", "img", backend, safety, limits, consumer, cancel)


def test_complete_stream():
    received = []
    outcome = run(ScriptedBackend(["A", "B", "C"]), consumer=received.append)
    assert outcome.text == "ABC"
    assert outcome.status is StreamStatus.COMPLETE
    assert outcome.chunk_count == 3
    assert received == ["A", "B", "C"]


def test_safety_halt_withholds_offending_chunk():
    blocklist = Blocklist(["XX"])
    received = []
    outcome = run(ScriptedBackend(["okay", "XX more"]), safety=blocklist, consumer=received.append)
    assert outcome.status is StreamStatus.SAFETY_HALTED
    assert outcome.text == "okay"
    assert received == ["okay"]
    assert outcome.reason == "XX"


def test_safety_fires_across_chunk_boundary():
    blocklist = Blocklist(["forbidden"])
    outcome = run(ScriptedBackend(["text forb", "idden tail"]), safety=blocklist)
    assert outcome.status is StreamStatus.SAFETY_HALTED
    assert outcome.text == "text forb"  # only pre-offense text exposed


def test_truncation_to_exact_limit():
    outcome = run(ScriptedBackend(["x" * 80, "y" * 40]), limits=StreamLimits(50, 2.0))
    assert outcome.status is StreamStatus.TRUNCATED
    assert len(outcome.text) == 50
    assert outcome.text == "x" * 50


def test_exact_limit_without_overflow_is_complete():
    outcome = run(ScriptedBackend(["x" * 50]), limits=StreamLimits(50, 2.0))
    assert outcome.status is StreamStatus.COMPLETE
    assert len(outcome.text) == 50


def test_backend_error_keeps_partial_text():
    outcome = run(ScriptedBackend(["part", "ial"], error=RuntimeError("backend down")))
    assert outcome.status is StreamStatus.BACKEND_ERROR
    assert outcome.text == "partial"
    assert "backend down" in outcome.reason


def test_timeout_on_slow_backend():
    outcome = run(
        ScriptedBackend(["a"] * 50, delay=0.05),
        limits=StreamLimits(1000, 0.2),
    )
    assert outcome.status is StreamStatus.TIMED_OUT
    assert outcome.text.startswith("a")
    assert outcome.elapsed < 1.0


def test_timeout_on_hung_backend():
    start = time.perf_counter()
    outcome = run(
        ScriptedBackend(["early", "never"], hang_after=1),
        limits=StreamLimits(1000, 0.3),
    )
    assert outcome.status is StreamStatus.TIMED_OUT
    assert outcome.text == "early"
    assert time.perf_counter() - start < 2.0  # caller is never hung


def test_cancellation_within_chunk_boundary():
    cancel = threading.Event()
    received = []

    def consumer(chunk):
        received.append(chunk)
        if len(received) == 2:
            cancel.set()

    with pytest.raises(GenerationCancelled):
        run(ScriptedBackend(["a", "b", "c", "d"]), consumer=consumer, cancel=cancel)
    assert received == ["a", "b"]


def test_prefix_property_randomized():
    rng = random.Random(5)
    alphabet = "abcdefg XYZ"
    for _ in range(50):
        chunks = [
            "".join(rng.choice(alphabet) for _ in range(rng.randint(1, 12)))
            for _ in range(rng.randint(1, 10))
        ]
        full = "".join(chunks)
        blocklist = Blocklist([rng.choice(["XYZ", "q", "gg"])])
        limits = StreamLimits(max_chars=rng.randint(1, 80), timeout_seconds=2.0)
        outcome = run(ScriptedBackend(chunks), safety=blocklist, limits=limits)
        assert full.startswith(outcome.text)
        if outcome.status is StreamStatus.TRUNCATED:
            assert len(outcome.text) == limits.max_chars


def test_safety_monotonicity_under_blocklist_superset():
    rng = random.Random(6)
    for _ in range(30):
        chunks = ["".join(rng.choice("abcXYZ ") for _ in range(8)) for _ in range(6)]
        small = ["XYZ"]
        big = ["XYZ", "abc"]
        out_small = run(ScriptedBackend(chunks), safety=Blocklist(small))
        out_big = run(ScriptedBackend(chunks), safety=Blocklist(big))
        if out_small.status is StreamStatus.SAFETY_HALTED:
            assert out_big.status is StreamStatus.SAFETY_HALTED
            assert len(out_big.text) <= len(out_small.text)


# -- default safety -------------------------------------------------------------


def test_empty_blocklist_allows_everything():
    verdict = Blocklist([]).check("anything at all")
    assert verdict.allowed


def test_blocklist_reason_names_pattern():
    verdict = Blocklist([r"(?i)forbidden"]).check("Forbidden item")
    assert not verdict.allowed
    assert verdict.reason == r"(?i)forbidden"


def test_whole_word_pattern_regex_semantics():
    pattern = r"\bban\b"
    blocklist = Blocklist([pattern])
    for text in ("the ban hammer", "banned items", "urban area", "ban"):
        assert blocklist.check(text).allowed == (not oracle_whole_word_match(pattern, text))


# -- mock generator --------------------------------------------------------------

NODE = CategoryNode(id="cellphone", name="cell phone", attribute_template=("Brand", "Model", "Storage Capacity"))
TEMPLATE = AttributeTemplate("cellphone", NODE.attribute_template)


def test_mock_renders_reference_values_in_order():
    ctx = GenerationContext(
        image_ref="i",
        variant=Variant.IMAGE_TEMPLATE_REFERENCE,
        category=NODE,
        template=TEMPLATE,
        reference_attrs=ExtractedAttributes(
            "cellphone", {"Brand": "Huawei", "Model": "Mate10pro", "Storage Capacity": "6+64GB"}
        ),
    )
    text = mock_generate(ctx)
    assert text.index("Huawei") < text.index("Mate10pro") < text.index("6+64GB")


def test_mock_image_only_has_no_attribute_values():
    ctx = GenerationContext(image_ref="i", variant=Variant.IMAGE_ONLY)
    text = mock_generate(ctx)
    for value in ("Huawei", "Mate10pro", "6+64GB"):
        assert value not in text


def test_mock_deterministic():
    ctx = GenerationContext(image_ref="same-ref", variant=Variant.IMAGE_ONLY)
    assert mock_generate(ctx) == mock_generate(ctx)


def test_static_backend_chunks_concatenate():
    backend = StaticBackend("hello world", chunk_size=3)
    assert "".join(backend.generate("", "")) == "hello world"


# -- HTTP client backend ----------------------------------------------------------


def test_http_backend_streams_chunked_text():
    from fastapi import FastAPI
    from fastapi.responses import StreamingResponse
    from fastapi.testclient import TestClient

    from listingkit.generation import HttpBackend

    upstream = FastAPI()
    seen = {}

    @upstream.post("/generate")
    def handle(body: dict):
        seen.update(body)

        def chunks():
            for piece in ("streamed ", "from ", "upstream"):
                yield piece

        return StreamingResponse(chunks(), media_type="text/plain")

    backend = HttpBackend(
        base_url="http://llm", api_key="k", client=TestClient(upstream, base_url="http://llm")
    )
    text = "".join(backend.generate("the instruction", "img://1"))
    assert text == "streamed from upstream"
    assert seen == {"instruction": "the instruction", "image_url": "img://1"}


def test_http_backend_requires_base_url(monkeypatch):
    from listingkit.generation import ENV_BASE_URL, HttpBackend

    monkeypatch.delenv(ENV_BASE_URL, raising=False)
    with pytest.raises(ValueError):
        HttpBackend()
