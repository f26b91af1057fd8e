import json

import pytest
from fastapi.testclient import TestClient

from queryforge.corpus import CorpusHandle, ingest_event_annotations
from queryforge.engine import SearchEngine
from queryforge.semantic import HashingProvider
from queryforge.server import create_app
from queryforge.session import SessionManager, SessionStore


def corpus_fixture():
    handle = CorpusHandle()
    handle.add_document("d1", sentences=[
        "flint water crisis began in 2014",
        "the water source switched to the flint river",
        "officials downplayed the lead levels",
    ])
    handle.add_document("d2", sentences=[
        "missile tests showed extended range",
        "fuel type remained unknown",
    ])
    handle.add_document("d3", sentences=[
        "residents reported discolored water",
        "lead exposure affected children",
    ])
    return handle


@pytest.fixture()
def client(tmp_path):
    engine = SearchEngine.from_corpus(corpus_fixture(),
                                      provider=HashingProvider(dim=64))
    manager = SessionManager(engine, SessionStore(tmp_path / "sessions"))
    app = create_app(engine, manager)
    return TestClient(app)


def new_session(client, task="Water crisis", request="Lead contamination events"):
    response = client.post("/api/sessions", json={
        "task_narrative": task, "request_narrative": request,
    })
    assert response.status_code == 201
    return response.json()


def test_health(client):
    response = client.get("/api/health")
    assert response.status_code == 200
    body = response.json()
    assert body["status"] == "ok"
    assert body["corpus_docs"] == 3
    assert body["vector_index"] is True


def test_create_and_fetch_session(client):
    snap = new_session(client)
    sid = snap["session_id"]
    assert snap["status"] == "active"
    fetched = client.get(f"/api/sessions/{sid}").json()
    assert fetched["session_id"] == sid


def test_create_session_empty_task_is_structured_error(client):
    response = client.post("/api/sessions", json={
        "task_narrative": " ", "request_narrative": "r",
    })
    assert response.status_code == 400
    assert response.json()["error"]["code"] == "empty_narrative"


def test_missing_session_404(client):
    response = client.post("/api/sessions/nothere/search",
                           json={"terms": "water"})
    assert response.status_code == 404
    assert response.json()["error"]["code"] == "session_not_found"


def test_search_returns_matched_terms(client):
    sid = new_session(client)["session_id"]
    response = client.post(f"/api/sessions/{sid}/search",
                           json={"terms": "flint water", "k": 5})
    assert response.status_code == 200
    body = response.json()
    assert body["iteration"] == 1
    assert body["results"]
    top = body["results"][0]
    assert top["sentence_id"].startswith("d1")
    assert set(top["matched_terms"]["primary"]) <= {"flint", "water"}
    assert top["matched_terms"]["primary"]
    assert top["matched_terms"]["expanded"] == []


def test_expanded_terms_appear_after_feedback(client):
    sid = new_session(client)["session_id"]
    client.post(f"/api/sessions/{sid}/search", json={"terms": "water", "k": 5})
    # judging d1:0 pushes "flint" (among others) into the query vocabulary
    client.post(f"/api/sessions/{sid}/judgments",
                json={"sentence_id": "d1:0", "level": "relevant_to_request"})
    second = client.post(f"/api/sessions/{sid}/search",
                         json={"terms": "water", "k": 5}).json()
    by_id = {row["sentence_id"]: row for row in second["results"]}
    assert "flint" in by_id["d1:1"]["matched_terms"]["expanded"]
    assert "water" in by_id["d1:1"]["matched_terms"]["primary"]


def test_bad_judgment_level_400(client):
    sid = new_session(client)["session_id"]
    response = client.post(f"/api/sessions/{sid}/judgments",
                           json={"sentence_id": "d1:0", "level": "amazing"})
    assert response.status_code == 400
    assert response.json()["error"]["code"] == "bad_judgment_level"


def test_unknown_sentence_404(client):
    sid = new_session(client)["session_id"]
    response = client.post(f"/api/sessions/{sid}/judgments",
                           json={"sentence_id": "s999", "level": "neutral"})
    assert response.status_code == 404
    assert response.json()["error"]["code"] == "sentence_not_found"


def test_judged_sentences_filtered_on_research(client):
    sid = new_session(client)["session_id"]
    first = client.post(f"/api/sessions/{sid}/search",
                        json={"terms": "water", "k": 5}).json()
    judged = [row["sentence_id"] for row in first["results"][:2]]
    for sentence_id in judged:
        client.post(f"/api/sessions/{sid}/judgments",
                    json={"sentence_id": sentence_id, "level": "neutral"})
    second = client.post(f"/api/sessions/{sid}/search",
                         json={"terms": "water", "k": 5}).json()
    returned = {row["sentence_id"] for row in second["results"]}
    assert returned.isdisjoint(judged)


def test_enrich_flow_and_error(client):
    sid = new_session(client)["session_id"]
    response = client.post(f"/api/sessions/{sid}/enrich", json={})
    assert response.status_code == 400
    assert response.json()["error"]["code"] == "no_example_sentences"

    client.post(f"/api/sessions/{sid}/judgments",
                json={"sentence_id": "d1:0", "level": "relevant_to_request"})
    response = client.post(f"/api/sessions/{sid}/enrich", json={"k": 4})
    assert response.status_code == 200
    body = response.json()
    ids = [row["sentence_id"] for row in body["results"]]
    assert "d1:0" not in ids
    assert len(ids) <= 4
    assert body["session"]["stage"] == "enrichment"


def test_export_freezes_session(client):
    sid = new_session(client)["session_id"]
    client.post(f"/api/sessions/{sid}/search", json={"terms": "flint water"})
    response = client.post(f"/api/sessions/{sid}/export")
    assert response.status_code == 200
    record = response.json()
    assert record["session_id"] == sid
    assert "terms" in record["query"]
    frozen = client.post(f"/api/sessions/{sid}/search", json={"terms": "x"})
    assert frozen.status_code == 409
    assert frozen.json()["error"]["code"] == "session_frozen"


def test_stats_endpoint(client):
    sid = new_session(client)["session_id"]
    client.post(f"/api/sessions/{sid}/search", json={"terms": "water lead"})
    client.post(f"/api/sessions/{sid}/judgments",
                json={"sentence_id": "d1:0", "level": "relevant_to_request"})
    response = client.get(f"/api/sessions/{sid}/stats")
    assert response.status_code == 200
    body = response.json()
    assert body["stats"]["totals"]["positive_judgments"] == 1
    assert "# search terms" in body["rendered"]


def test_sentence_context(client):
    response = client.get("/api/sentences/d1:1")
    assert response.status_code == 200
    body = response.json()
    assert body["doc_id"] == "d1"
    assert [s["position"] for s in body["context"]["before"]] == [0]
    assert [s["position"] for s in body["context"]["after"]] == [2]


def test_sentence_not_found(client):
    response = client.get("/api/sentences/zzz")
    assert response.status_code == 404
    assert response.json()["error"]["code"] == "sentence_not_found"


def test_malformed_body_structured_error(client):
    sid = new_session(client)["session_id"]
    response = client.post(f"/api/sessions/{sid}/judgments",
                           json={"wrong_field": True})
    assert response.status_code == 400
    assert response.json()["error"]["code"] == "bad_request"


def test_api_determinism_for_identical_state(tmp_path):
    def run_once(subdir):
        engine = SearchEngine.from_corpus(corpus_fixture(),
                                          provider=HashingProvider(dim=64))
        manager = SessionManager(engine, SessionStore(tmp_path / subdir),
                                 clock=lambda: 1234.5)
        client = TestClient(create_app(engine, manager))
        snap = client.post("/api/sessions", json={
            "task_narrative": "t", "request_narrative": "r"}).json()
        sid = snap["session_id"]
        body = client.post(f"/api/sessions/{sid}/search",
                           json={"terms": "flint water", "k": 5}).json()
        del body["session"]["session_id"]
        for row in body.get("results", []):
            row.pop("session_id", None)
        return json.dumps(body, sort_keys=True)

    assert run_once("a") == run_once("b")


def test_ui_static_mount(tmp_path):
    from queryforge.config import AppConfig

    ui_dir = tmp_path / "dist"
    ui_dir.mkdir()
    (ui_dir / "index.html").write_text("<html><body>ui shell</body></html>",
                                       encoding="utf-8")
    engine = SearchEngine.from_corpus(corpus_fixture(),
                                      provider=HashingProvider(dim=32))
    manager = SessionManager(engine, SessionStore(tmp_path / "s"))
    app = create_app(engine, manager, AppConfig(ui_dir=str(ui_dir)))
    client = TestClient(app)
    response = client.get("/ui/")
    assert response.status_code == 200
    assert "ui shell" in response.text
