from __future__ import annotations

import json

import pytest
from fastapi.testclient import TestClient

from listingkit.generation import Blocklist, SafetyVerdict
from listingkit.service import build_app


@pytest.fixture()
def client(pipeline):
    return TestClient(build_app(pipeline))


def generate_body(fixture_set, i=0, **options):
    q = fixture_set.queries[i]
    return {
        "request_id": f"r{i}",
        "user_id": "web",
        "image_ref": q.image_ref,
        "image_embedding": [float(x) for x in q.embedding],
        "options": options,
    }


def read_stream(client, body):
    chunks: list[str] = []
    trailer = None
    with client.stream("POST", "/v1/listings:generate", json=body) as response:
        assert response.status_code == 200
        assert response.headers["content-type"].startswith("text/event-stream")
        buffer = ""
        for piece in response.iter_text():
            buffer += piece
    for frame in buffer.split("\n\n"):
        if not frame.strip():
            continue
        lines = frame.split("\n")
        event = lines[0].removeprefix("event: ")
        data = json.loads(lines[1].removeprefix("data: "))
        if event == "chunk":
            chunks.append(data["text"])
        elif event == "trailer":
            trailer = data
    return chunks, trailer


def test_healthz(client, pipeline):
    doc = client.get("/healthz").json()
    assert doc["status"] == "ok"
    assert doc["products"] == pipeline.store.product_count()


def test_stream_chunks_and_trailer(client, fixture_set):
    chunks, trailer = read_stream(client, generate_body(fixture_set, 0))
    assert chunks, "expected at least one chunk"
    assert trailer["status"] == "Complete"
    assert trailer["draft_id"]
    assert trailer["trace"]["variant"] == "ImageTemplateReference"
    stages = [s["stage"] for s in trailer["trace"]["stages"]]
    assert stages == ["safety", "category", "retrieval", "extraction", "prompt", "generation"]
    # concatenated chunks equal the persisted draft text
    draft = client.get(f"/v1/drafts/{trailer['draft_id']}").json()
    assert "".join(chunks) == draft["generated_text"]


def test_truncation_status_in_trailer(client, fixture_set):
    chunks, trailer = read_stream(client, generate_body(fixture_set, 1, max_chars=25))
    assert trailer["status"] == "Truncated"
    assert len("".join(chunks)) == 25


def test_safety_halt_status_in_trailer(pipeline, fixture_set):
    q = fixture_set.queries[0]
    brand = pipeline.store.get_product(q.twin_id).attributes["Brand"]
    pipeline.text_safety = Blocklist([brand])
    client = TestClient(build_app(pipeline))
    chunks, trailer = read_stream(client, generate_body(fixture_set, 0))
    assert trailer["status"] == "SafetyHalted"
    assert brand not in "".join(chunks)
    assert trailer["reason"] == brand


def test_unsafe_image_rejected_without_stream(pipeline, fixture_set):
    pipeline.image_safety = lambda req: SafetyVerdict(allowed=False, reason="nsfw")
    client = TestClient(build_app(pipeline))
    response = client.post("/v1/listings:generate", json=generate_body(fixture_set, 0))
    assert response.status_code == 400
    assert response.json()["detail"]["error"] == "unsafe_image"


def test_invalid_request_rejected(client, fixture_set):
    body = generate_body(fixture_set, 0)
    del body["image_embedding"]
    response = client.post("/v1/listings:generate", json=body)
    assert response.status_code == 422


def test_template_override_alters_instruction_echo(client, fixture_set):
    _, full = read_stream(client, generate_body(fixture_set, 2))
    assert "Color" in full["trace"]["instruction"]
    template = [
        name
        for name in fixture_set.taxonomy.get("cellphone").attribute_template
        if name != "Color"
    ]
    _, trimmed = read_stream(client, generate_body(fixture_set, 2, template=template))
    assert "Color" not in trimmed["trace"]["instruction"]


def test_publish_round_trip(client, fixture_set):
    chunks, trailer = read_stream(client, generate_body(fixture_set, 3))
    draft_id = trailer["draft_id"]
    response = client.post(f"/v1/drafts/{draft_id}:publish", json={"final_text": "".join(chunks)})
    assert response.status_code == 200
    doc = response.json()
    assert doc["retained_ratio"] == pytest.approx(1.0)
    assert 0.0 <= doc["quality_score"] <= 1.0
    # second publish conflicts
    again = client.post(f"/v1/drafts/{draft_id}:publish", json={"final_text": "x"})
    assert again.status_code == 409
    assert client.get(f"/v1/drafts/{draft_id}").json()["state"] == "Published"


def test_publish_fully_rewritten_scores_zero(client, fixture_set):
    _, trailer = read_stream(client, generate_body(fixture_set, 4))
    response = client.post(
        f"/v1/drafts/{trailer['draft_id']}:publish", json={"final_text": "全新内容"}
    )
    assert response.json()["retained_ratio"] == pytest.approx(0.0)


def test_publish_unknown_draft_404(client):
    assert client.post("/v1/drafts/zzz:publish", json={"final_text": "x"}).status_code == 404


def test_get_unknown_draft_404(client):
    assert client.get("/v1/drafts/zzz").status_code == 404


def test_build_service_from_config_file(tmp_path, fixture_set):
    from listingkit.fixtures import export_fixture_files
    from listingkit.service import ServiceConfig, build_service

    paths = export_fixture_files(fixture_set, str(tmp_path / "fx"))
    config_path = tmp_path / "service.json"
    config_path.write_text(
        json.dumps(
            {
                "catalog_path": paths["catalog"],
                "taxonomy_path": paths["taxonomy"],
                "lexicon_path": paths["lexicon"],
                "blocklist": ["(?i)contraband"],
                "backend": "mock",
                "max_chars": 500,
            }
        )
    )
    config = ServiceConfig.from_file(str(config_path))
    app, pipeline = build_service(config)
    service_client = TestClient(app)
    health = service_client.get("/healthz").json()
    assert health["products"] == len(fixture_set.products)
    q = fixture_set.queries[0]
    chunks, trailer = read_stream(
        service_client,
        {"image_ref": q.image_ref, "image_embedding": [float(x) for x in q.embedding]},
    )
    assert trailer["status"] == "Complete"
    assert pipeline.config.limits.max_chars == 500
