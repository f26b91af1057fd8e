"""Per-request annotation sessions: the interactive loop of search, graded
judgment, embedding-based enrichment and final query export.

A session is the fold of an append-only event log (created / search /
judgment / enrichment / export). Live operations validate, append the event,
then apply it through the same fold used for replay, so replaying a log
reproduces the session — and its exported query — exactly.
"""

from __future__ import annotations

import json
import time
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import tokenize
from .engine import SearchEngine
from .errors import (
    BadJudgmentLevelError,
    EmptyNarrativeError,
    EmptySearchTermsError,
    NoExamplesError,
    SessionFrozenError,
    SessionNotFoundError,
    StorageError,
)
from .retrieval import (
    FieldWeights,
    JudgmentLevel,
    POSITIVE_LEVELS,
    QueryFields,
    RankedList,
    REQUEST_NARRATIVE,
    SEARCH_TERMS,
    SELECTED_SENTENCES,
    TASK_NARRATIVE,
    WeightedQuery,
    apply_feedback,
    build_weighted_query,
)

STAGE_INITIAL = "initial"
STAGE_ENRICHMENT = "enrichment"

# Stage-2 guidance from the workflow: the UI warns (softly) once the user
# has collected more than this many positive sentences.
SELECTION_CAP = 25


@dataclass
class SessionConfig:
    """Snapshot of the knobs a session was created with."""

    theta: dict[str, float] = field(default_factory=lambda: dict(
        FieldWeights().theta))
    alpha: float = 0.9
    search_k: int = 20
    enrich_k: int = 10

    def to_dict(self) -> dict:
        return {
            "theta": {k: self.theta[k] for k in sorted(self.theta)},
            "alpha": self.alpha,
            "search_k": self.search_k,
            "enrich_k": self.enrich_k,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SessionConfig":
        base = cls()
        return cls(
            theta={str(k): float(v) for k, v in data.get("theta", base.theta).items()},
            alpha=float(data.get("alpha", base.alpha)),
            search_k=int(data.get("search_k", base.search_k)),
            enrich_k=int(data.get("enrich_k", base.enrich_k)),
        )


@dataclass
class Judgment:
    sentence_id: str
    level: JudgmentLevel
    iteration: int
    stage: str
    timestamp: float

    def to_dict(self) -> dict:
        return {
            "sentence_id": self.sentence_id,
            "level": self.level.value,
            "iteration": self.iteration,
            "stage": self.stage,
            "timestamp": self.timestamp,
        }


@dataclass
class IterationRecord:
    iteration: int
    stage: str
    stage_ordinal: int
    terms: str | None = None
    k: int | None = None


class Session:
    """Folded state of one session's event log."""

    def __init__(self, session_id: str, task_narrative: str,
                 request_narrative: str, config: SessionConfig,
                 created_at: float):
        self.session_id = session_id
        self.task_narrative = task_narrative
        self.request_narrative = request_narrative
        self.config = config
        self.created_at = created_at
        self.status = "active"
        self.iteration = 0
        self.stage = STAGE_INITIAL
        self.iterations: list[IterationRecord] = []
        self.judgments: dict[str, Judgment] = {}
        self.export_record: dict | None = None

    # -- views ---------------------------------------------------------------

    @property
    def search_history(self) -> list[tuple[int, str]]:
        return [(rec.iteration, rec.terms) for rec in self.iterations
                if rec.stage == STAGE_INITIAL]

    def judged_ids(self) -> set[str]:
        return set(self.judgments)

    def positive_judgments(self) -> list[Judgment]:
        return [j for j in self.judgments.values() if j.level in POSITIVE_LEVELS]

    def selected_ids(self) -> list[str]:
        """Sentences marked relevant-to-request, in sorted order."""
        return sorted(
            sid for sid, j in self.judgments.items()
            if j.level == JudgmentLevel.RELEVANT_TO_REQUEST
        )

    def stage_ordinal(self, iteration: int) -> tuple[str, int]:
        for rec in self.iterations:
            if rec.iteration == iteration:
                return rec.stage, rec.stage_ordinal
        return STAGE_INITIAL, 0

    def snapshot(self) -> dict:
        positives = self.positive_judgments()
        return {
            "session_id": self.session_id,
            "status": self.status,
            "task_narrative": self.task_narrative,
            "request_narrative": self.request_narrative,
            "iteration": self.iteration,
            "stage": self.stage,
            "config": self.config.to_dict(),
            "search_history": [
                {"iteration": it, "terms": terms} for it, terms in self.search_history
            ],
            "judgments": [
                self.judgments[sid].to_dict() for sid in sorted(self.judgments)
            ],
            "positive_count": len(positives),
            "selected_sentence_ids": self.selected_ids(),
            "selection_cap": SELECTION_CAP,
            "cap_warning": len(positives) > SELECTION_CAP,
        }


def _fold(session: Session | None, event: dict) -> Session:
    """Apply one event to the session state. The single source of truth for
    both live mutation and log replay."""
    etype = event["type"]
    payload = event.get("payload", {})
    ts = float(event.get("ts", 0.0))
    if etype == "created":
        return Session(
            session_id=payload["session_id"],
            task_narrative=payload["task_narrative"],
            request_narrative=payload["request_narrative"],
            config=SessionConfig.from_dict(payload.get("config", {})),
            created_at=ts,
        )
    if session is None:
        raise StorageError("event log does not start with a created event")
    if etype == "search":
        session.iteration += 1
        session.stage = STAGE_INITIAL
        ordinal = sum(1 for r in session.iterations if r.stage == STAGE_INITIAL) + 1
        session.iterations.append(IterationRecord(
            iteration=session.iteration, stage=STAGE_INITIAL,
            stage_ordinal=ordinal, terms=payload["terms"]))
    elif etype == "enrichment":
        session.iteration += 1
        session.stage = STAGE_ENRICHMENT
        ordinal = sum(1 for r in session.iterations
                      if r.stage == STAGE_ENRICHMENT) + 1
        session.iterations.append(IterationRecord(
            iteration=session.iteration, stage=STAGE_ENRICHMENT,
            stage_ordinal=ordinal, k=payload.get("k")))
    elif etype == "judgment":
        session.judgments[payload["sentence_id"]] = Judgment(
            sentence_id=payload["sentence_id"],
            level=JudgmentLevel(payload["level"]),
            iteration=session.iteration,
            stage=session.stage,
            timestamp=ts,
        )
    elif etype == "export":
        session.status = "exported"
        session.export_record = payload.get("record")
    else:
        raise StorageError(f"unknown session event type {etype}")
    return session


def dump_export(record: dict) -> str:
    """Canonical serialization of an export record; replay must reproduce
    these bytes exactly."""
    return json.dumps(record, sort_keys=True, ensure_ascii=False)


class SessionStore:
    """Holds sessions and their append-only logs. With a directory, every
    event is flushed to <id>.log.jsonl before the state mutates, and
    existing logs are replayed at startup."""

    def __init__(self, directory: str | Path | None = None):
        self.directory = Path(directory) if directory is not None else None
        self.sessions: dict[str, Session] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._global = threading.Lock()
        if self.directory is not None:
            self.directory.mkdir(parents=True, exist_ok=True)
            for log_path in sorted(self.directory.glob("*.log.jsonl")):
                session = replay_log(log_path)
                self.sessions[session.session_id] = session

    def lock(self, session_id: str) -> threading.Lock:
        with self._global:
            return self._locks.setdefault(session_id, threading.Lock())

    def get(self, session_id: str) -> Session:
        try:
            return self.sessions[session_id]
        except KeyError:
            raise SessionNotFoundError(f"no session {session_id}") from None

    def list_ids(self) -> list[str]:
        return sorted(self.sessions)

    def log_path(self, session_id: str) -> Path | None:
        if self.directory is None:
            return None
        return self.directory / f"{session_id}.log.jsonl"

    def record(self, session_id: str, event: dict) -> Session:
        """Append the event (write-ahead) and fold it into the state."""
        path = self.log_path(session_id)
        if path is not None:
            with path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(event, sort_keys=True, ensure_ascii=False) + "\n")
                fh.flush()
        session = _fold(self.sessions.get(session_id), event)
        self.sessions[session_id] = session
        return session


def replay_log(path: str | Path) -> Session:
    """Rebuild a session by folding its event log."""
    session: Session | None = None
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            session = _fold(session, json.loads(line))
    if session is None:
        raise StorageError(f"empty session log {path}")
    return session


class SessionManager:
    """Executes session operations against a shared SearchEngine."""

    def __init__(self, engine: SearchEngine,
                 store: SessionStore | None = None,
                 clock=time.time):
        self.engine = engine
        self.store = store or SessionStore()
        self.clock = clock

    # -- lifecycle ------------------------------------------------------------

    def create_session(self, task_narrative: str, request_narrative: str,
                       config: SessionConfig | None = None) -> Session:
        if not task_narrative.strip():
            raise EmptyNarrativeError("empty task narrative")
        if not request_narrative.strip():
            raise EmptyNarrativeError("empty request narrative")
        config = config or SessionConfig(alpha=self.engine.alpha)
        session_id = uuid.uuid4().hex[:12]
        event = {
            "type": "created",
            "ts": self.clock(),
            "payload": {
                "session_id": session_id,
                "task_narrative": task_narrative,
                "request_narrative": request_narrative,
                "config": config.to_dict(),
            },
        }
        return self.store.record(session_id, event)

    def get(self, session_id: str) -> Session:
        return self.store.get(session_id)

    def _active(self, session_id: str) -> Session:
        session = self.store.get(session_id)
        if session.status != "active":
            raise SessionFrozenError("session frozen")
        return session

    # -- query materialization --------------------------------------------------

    def materialize_query(self, session: Session,
                          include_narratives: bool = False) -> WeightedQuery:
        """Field-weighted terms from the session state plus all feedback
        deltas. Narrative fields join only at export time."""
        cfg = session.config
        fields = QueryFields()
        for _, terms in session.search_history:
            fields.add(SEARCH_TERMS, tokenize(terms, self.engine.corpus.config))
        feature_counts: dict[str, int] = {}
        for sid in session.selected_ids():
            sentence = self.engine.corpus.sentence(sid)
            fields.add(SELECTED_SENTENCES, sentence.tokens)
            for fterm in sentence.feature_terms():
                feature_counts[fterm] = feature_counts.get(fterm, 0) + 1
        if include_narratives:
            fields.add(TASK_NARRATIVE,
                       tokenize(session.task_narrative, self.engine.corpus.config))
            fields.add(REQUEST_NARRATIVE,
                       tokenize(session.request_narrative, self.engine.corpus.config))
        weights = FieldWeights(theta=dict(cfg.theta))
        query = build_weighted_query(
            fields, weights,
            provenance=f"session:{session.session_id}:iter{session.iteration}",
        )
        selected_theta = cfg.theta.get(SELECTED_SENTENCES, 1.0)
        query.feature_terms.update({
            fterm: count * selected_theta
            for fterm, count in feature_counts.items()
            if count * selected_theta > 0
        })
        judged = [
            (self.engine.corpus.sentence(j.sentence_id), j.level)
            for j in (session.judgments[sid] for sid in sorted(session.judgments))
        ]
        return apply_feedback(query, judged)

    # -- operations ---------------------------------------------------------------

    def run_initial_search(self, session_id: str, search_terms: str,
                           k: int | None = None) -> tuple[Session, RankedList]:
        with self.store.lock(session_id):
            session = self._active(session_id)
            if not search_terms.strip() or not tokenize(search_terms):
                raise EmptySearchTermsError("empty search terms")
            session = self.store.record(session_id, {
                "type": "search",
                "ts": self.clock(),
                "payload": {"terms": search_terms},
            })
            query = self.materialize_query(session)
            k = k if k is not None else session.config.search_k
            ranked = self.engine.search(query, target="sentences", k=k,
                                        exclude=session.judged_ids())
            return session, ranked

    def record_judgment(self, session_id: str, sentence_id: str,
                        level: JudgmentLevel | str) -> Session:
        with self.store.lock(session_id):
            session = self._active(session_id)
            try:
                level = JudgmentLevel(level)
            except ValueError:
                raise BadJudgmentLevelError(
                    f"bad judgment level {level!r}; expected one of "
                    f"{[l.value for l in JudgmentLevel]}"
                ) from None
            self.engine.corpus.sentence(sentence_id)  # raises if unknown
            return self.store.record(session_id, {
                "type": "judgment",
                "ts": self.clock(),
                "payload": {"sentence_id": sentence_id, "level": level.value},
            })

    def run_enrichment(self, session_id: str,
                       k: int | None = None) -> tuple[Session, RankedList]:
        with self.store.lock(session_id):
            session = self._active(session_id)
            positives = session.positive_judgments()
            if not positives:
                raise NoExamplesError("no example sentences selected")
            k = k if k is not None else session.config.enrich_k
            session = self.store.record(session_id, {
                "type": "enrichment",
                "ts": self.clock(),
                "payload": {"k": k},
            })
            examples = [self.engine.corpus.sentence(j.sentence_id)
                        for j in sorted(positives, key=lambda j: j.sentence_id)]
            ranked = self.engine.enrich(examples, k=k,
                                        exclude=session.judged_ids())
            return session, ranked

    def export_query(self, session_id: str) -> tuple[WeightedQuery, dict]:
        with self.store.lock(session_id):
            session = self._active(session_id)
            query = self.materialize_query(session, include_narratives=True)
            record = {
                "session_id": session.session_id,
                "task_narrative": session.task_narrative,
                "request_narrative": session.request_narrative,
                "query": query.to_record(),
                "selected_sentence_ids": session.selected_ids(),
            }
            self.store.record(session_id, {
                "type": "export",
                "ts": self.clock(),
                "payload": {"record": record},
            })
            if self.store.directory is not None:
                out = self.store.directory / f"{session.session_id}.export.json"
                out.write_text(dump_export(record), encoding="utf-8")
            return query, record

    def replay_export(self, log_path: str | Path) -> dict:
        """Recompute the export record from a log's pre-export state; byte
        equality with the original export checks replayability."""
        session: Session | None = None
        with Path(log_path).open("r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                event = json.loads(line)
                if event["type"] == "export":
                    break
                session = _fold(session, event)
        if session is None:
            raise StorageError(f"empty session log {log_path}")
        query = self.materialize_query(session, include_narratives=True)
        return {
            "session_id": session.session_id,
            "task_narrative": session.task_narrative,
            "request_narrative": session.request_narrative,
            "query": query.to_record(),
            "selected_sentence_ids": session.selected_ids(),
        }


# -- statistics ----------------------------------------------------------------------


def compute_stats(sessions: list[Session], corpus) -> dict:
    """Per-stage, per-iteration aggregates over the judgment logs: search
    term counts, how many requests reach each iteration, how many sentences
    were marked relevant and how long those sentences are (in tokens)."""
    stage1: dict[int, dict] = {}
    stage2: dict[int, dict] = {}

    def row(bucket: dict[int, dict], ordinal: int) -> dict:
        return bucket.setdefault(ordinal, {
            "iteration": ordinal,
            "num_requests": 0,
            "search_term_counts": [],
            "relevant_counts": [],
            "relevant_lengths": [],
        })

    total_positive = 0
    for session in sessions:
        per_iter_positive: dict[tuple[str, int], list[str]] = {}
        for judgment in session.judgments.values():
            if judgment.level not in POSITIVE_LEVELS:
                continue
            total_positive += 1
            stage, ordinal = session.stage_ordinal(judgment.iteration)
            per_iter_positive.setdefault((stage, ordinal), []).append(
                judgment.sentence_id)
        for rec in session.iterations:
            bucket = stage1 if rec.stage == STAGE_INITIAL else stage2
            r = row(bucket, rec.stage_ordinal)
            r["num_requests"] += 1
            if rec.stage == STAGE_INITIAL:
                r["search_term_counts"].append(len(tokenize(rec.terms or "")))
            ids = per_iter_positive.get((rec.stage, rec.stage_ordinal), [])
            r["relevant_counts"].append(len(ids))
            r["relevant_lengths"].extend(
                len(corpus.sentence(sid).tokens) for sid in ids)
        # positives judged before any iteration ran land in bucket 0
        stray = per_iter_positive.get((STAGE_INITIAL, 0))
        if stray:
            r = row(stage1, 0)
            r["num_requests"] += 1
            r["relevant_counts"].append(len(stray))
            r["relevant_lengths"].extend(
                len(corpus.sentence(sid).tokens) for sid in stray)

    def finalize(bucket: dict[int, dict], with_terms: bool) -> list[dict]:
        rows = []
        for ordinal in sorted(bucket):
            r = bucket[ordinal]
            out = {
                "iteration": ordinal,
                "num_requests": r["num_requests"],
                "total_relevant": sum(r["relevant_counts"]),
                "mean_relevant_sentences": _mean(r["relevant_counts"]),
                "mean_relevant_sentence_length": _mean(r["relevant_lengths"]),
            }
            if with_terms:
                out["mean_search_terms"] = _mean(r["search_term_counts"])
            rows.append(out)
        return rows

    rows1, rows2 = finalize(stage1, True), finalize(stage2, False)
    return {
        "stage1": rows1,
        "stage2": rows2,
        "totals": {
            "sessions": len(sessions),
            "positive_judgments": total_positive,
            "stage1_relevant": sum(r["total_relevant"] for r in rows1),
            "stage2_relevant": sum(r["total_relevant"] for r in rows2),
        },
    }


def _mean(values: list) -> float:
    return sum(values) / len(values) if values else 0.0


def render_stats(stats: dict) -> str:
    """Aligned-column view mirroring the per-iteration report layout."""
    lines = []

    def table(rows: list[dict], labels: list[tuple[str, str, str]]) -> None:
        if not rows:
            lines.append("  (no iterations)")
            return
        header = "".join(f"{'iter. ' + str(r['iteration']):>12}" for r in rows)
        lines.append(f"  {'':22}{header}")
        for key, label, fmt in labels:
            cells = "".join(f"{r[key]:>12{fmt}}" for r in rows if key in r)
            lines.append(f"  {label:22}{cells}")

    lines.append("stage 1 (initial query creation)")
    table(stats["stage1"], [
        ("mean_search_terms", "# search terms", ".2f"),
        ("num_requests", "# requests", "d"),
        ("mean_relevant_sentences", '# "rel." sent.', ".2f"),
        ("mean_relevant_sentence_length", '"rel." sent. length', ".2f"),
    ])
    lines.append("stage 2 (query enrichment)")
    table(stats["stage2"], [
        ("num_requests", "# requests", "d"),
        ("mean_relevant_sentences", '# "rel." sent.', ".2f"),
        ("mean_relevant_sentence_length", '"rel." sent. length', ".2f"),
    ])
    totals = stats["totals"]
    lines.append(
        f"totals: {totals['sessions']} sessions, "
        f"{totals['positive_judgments']} positive judgments"
    )
    return "\n".join(lines)
