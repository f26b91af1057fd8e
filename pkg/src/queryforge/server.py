"""HTTP service over the session workflow: corpus search, graded
judgments, enrichment, export, statistics and sentence context, consumed
by the web UI and scripted clients.

Every module error surfaces as a structured {"error": {"code", "message"}}
body with a stable machine code; stack traces never leak. Responses are
deterministic for identical session state and request (timestamps aside).
"""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .config import AppConfig, build_engine
from .corpus import tokenize
from .engine import SearchEngine
from .errors import QueryForgeError
from .retrieval import RankedList, WeightedQuery
from .session import Session, SessionConfig, SessionManager, SessionStore, compute_stats, render_stats

HTTP_STATUS_BY_CODE = {
    "session_not_found": 404,
    "sentence_not_found": 404,
    "item_not_found": 404,
    "bad_storage": 500,
    "internal_error": 500,
    "provider_error": 502,
    "session_frozen": 409,
}


class CreateSessionBody(BaseModel):
    task_narrative: str
    request_narrative: str
    config: dict | None = None


class SearchBody(BaseModel):
    terms: str
    k: int | None = None


class JudgmentBody(BaseModel):
    sentence_id: str
    level: str


class EnrichBody(BaseModel):
    k: int | None = None


def create_app(engine: SearchEngine, manager: SessionManager,
               config: AppConfig | None = None) -> FastAPI:
    config = config or AppConfig()
    app = FastAPI(title="queryforge", docs_url=None, redoc_url=None)
    app.add_middleware(
        CORSMiddleware,
        allow_origins=[config.cors_origin] if config.cors_origin != "*" else ["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.exception_handler(QueryForgeError)
    async def handle_engine_error(_: Request, exc: QueryForgeError):
        status = HTTP_STATUS_BY_CODE.get(exc.code, 400)
        return JSONResponse(
            status_code=status,
            content={"error": {"code": exc.code, "message": exc.message}},
        )

    @app.exception_handler(RequestValidationError)
    async def handle_validation_error(_: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=400,
            content={"error": {"code": "bad_request", "message": str(exc.errors())}},
        )

    def matched_terms(session: Session, query: WeightedQuery,
                      sentence_tokens: list[str]) -> dict:
        """Partition a sentence's matched query terms: terms the user typed
        (red in the UI) versus terms the query acquired through feedback and
        selected sentences (blue)."""
        typed: set[str] = set()
        for _, terms in session.search_history:
            typed.update(tokenize(terms, engine.corpus.config))
        present = set(sentence_tokens) & set(query.terms)
        return {
            "primary": sorted(present & typed),
            "expanded": sorted(present - typed),
        }

    def result_payload(session: Session, ranked: RankedList) -> list[dict]:
        query = manager.materialize_query(session)
        rows = []
        for sentence_id, score in ranked.items:
            sentence = engine.corpus.sentence(sentence_id)
            rows.append({
                "sentence_id": sentence_id,
                "doc_id": sentence.doc_id,
                "position": sentence.position,
                "text": sentence.text,
                "score": score,
                "matched_terms": matched_terms(session, query, sentence.tokens),
            })
        return rows

    @app.get("/api/health")
    async def health():
        return {
            "status": "ok",
            "corpus_docs": engine.corpus.num_documents,
            "corpus_sentences": engine.corpus.num_sentences,
            "vector_index": engine.vectors is not None and len(engine.vectors) > 0,
        }

    @app.post("/api/sessions", status_code=201)
    async def create_session(body: CreateSessionBody):
        session_config = (SessionConfig.from_dict(body.config)
                          if body.config else None)
        session = manager.create_session(body.task_narrative,
                                         body.request_narrative,
                                         config=session_config)
        return session.snapshot()

    @app.get("/api/sessions/{session_id}")
    async def get_session(session_id: str):
        return manager.get(session_id).snapshot()

    @app.post("/api/sessions/{session_id}/search")
    async def search(session_id: str, body: SearchBody):
        session, ranked = manager.run_initial_search(session_id, body.terms,
                                                     k=body.k)
        return {
            "session": session.snapshot(),
            "iteration": session.iteration,
            "results": result_payload(session, ranked),
        }

    @app.post("/api/sessions/{session_id}/judgments")
    async def judge(session_id: str, body: JudgmentBody):
        session = manager.record_judgment(session_id, body.sentence_id,
                                          body.level)
        return session.snapshot()

    @app.post("/api/sessions/{session_id}/enrich")
    async def enrich(session_id: str, body: EnrichBody):
        session, ranked = manager.run_enrichment(session_id, k=body.k)
        return {
            "session": session.snapshot(),
            "iteration": session.iteration,
            "results": result_payload(session, ranked),
        }

    @app.post("/api/sessions/{session_id}/export")
    async def export(session_id: str):
        _, record = manager.export_query(session_id)
        return record

    @app.get("/api/sessions/{session_id}/stats")
    async def stats(session_id: str):
        session = manager.get(session_id)
        data = compute_stats([session], engine.corpus)
        return {"stats": data, "rendered": render_stats(data)}

    @app.get("/api/sentences/{sentence_id}")
    async def sentence(sentence_id: str, context: int = 2):
        record = engine.corpus.sentence(sentence_id)
        doc = engine.corpus.documents[record.doc_id]

        def sibling(position: int) -> dict | None:
            if 0 <= position < len(doc.sentence_ids):
                s = engine.corpus.sentences[doc.sentence_ids[position]]
                return {"sentence_id": s.sentence_id, "position": s.position,
                        "text": s.text}
            return None

        before = [sibling(p) for p in range(max(0, record.position - context),
                                            record.position)]
        after = [sibling(p) for p in range(record.position + 1,
                                           min(len(doc.sentence_ids),
                                               record.position + context + 1))]
        return {
            "sentence_id": record.sentence_id,
            "doc_id": record.doc_id,
            "position": record.position,
            "text": record.text,
            "context": {
                "before": [s for s in before if s],
                "after": [s for s in after if s],
            },
        }

    ui_dir = config.ui_dir
    if ui_dir and Path(ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app


def serve(config: AppConfig) -> None:
    """Assemble the engine from configured paths and run the service until
    interrupted. Session logs are flushed on every mutation, so shutdown
    loses nothing."""
    import uvicorn

    engine = build_engine(config)
    store = SessionStore(config.session_dir)
    manager = SessionManager(engine, store)
    app = create_app(engine, manager, config)
    uvicorn.run(app, host=config.host, port=config.port, log_level="info")
