"""Ranking evaluation: graded nDCG over trec-format qrels and runs, run
comparison tables, and a seeded end-to-end experiment that replays the
interactive loop against a synthetic corpus with planted topics.

nDCG uses the standard graded form: gain 2^grade - 1, discount log2(i+1),
normalized by the ideal ordering of the query's grades; queries with no
relevant documents score 0 (optionally skipped from means).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import CorpusHandle
from .engine import SearchEngine
from .errors import ConfigError, EmptyRunError, MalformedRecordError
from .retrieval import RankedList, ScoringConfig, first_pass_search
from .semantic import HashingProvider
from .session import SessionManager, SessionStore


class Qrels:
    """query_id -> doc_id -> grade (non-negative int). Unknown pairs are
    grade 0."""

    def __init__(self, grades: dict[str, dict[str, int]] | None = None):
        self.grades: dict[str, dict[str, int]] = {}
        for qid, row in (grades or {}).items():
            for doc_id, grade in row.items():
                self.add(qid, doc_id, grade)

    def add(self, query_id: str, doc_id: str, grade: int) -> None:
        grade = int(grade)
        if grade < 0:
            raise MalformedRecordError(
                f"negative grade {grade} for ({query_id}, {doc_id})"
            )
        self.grades.setdefault(query_id, {})[doc_id] = grade

    def row(self, query_id: str) -> dict[str, int]:
        return self.grades.get(query_id, {})

    def __contains__(self, query_id: str) -> bool:
        return query_id in self.grades

    def query_ids(self) -> list[str]:
        return sorted(self.grades)


def load_qrels(path: str | Path) -> Qrels:
    """trec format: `query_id 0 doc_id grade`, whitespace separated."""
    qrels = Qrels()
    with Path(path).open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 4:
                raise MalformedRecordError(
                    f"malformed qrels line {lineno}: expected 4 fields"
                )
            qid, _, doc_id, grade = parts
            try:
                qrels.add(qid, doc_id, int(grade))
            except ValueError:
                raise MalformedRecordError(
                    f"malformed qrels line {lineno}: bad grade {grade!r}"
                ) from None
    return qrels


def save_qrels(qrels: Qrels, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for qid in qrels.query_ids():
            for doc_id in sorted(qrels.row(qid)):
                fh.write(f"{qid} 0 {doc_id} {qrels.row(qid)[doc_id]}\n")


@dataclass
class RunResult:
    """Ranked doc ids per query, labeled. No duplicate doc within a query."""

    label: str
    rankings: dict[str, list[tuple[str, float]]] = field(default_factory=dict)

    def set_ranking(self, query_id: str, ranked: RankedList | list[tuple[str, float]]):
        items = list(ranked.items) if isinstance(ranked, RankedList) else list(ranked)
        seen = set()
        for doc_id, _ in items:
            if doc_id in seen:
                raise MalformedRecordError(
                    f"duplicate doc {doc_id} in ranking for query {query_id}"
                )
            seen.add(doc_id)
        self.rankings[query_id] = items

    def doc_ids(self, query_id: str) -> list[str]:
        return [doc_id for doc_id, _ in self.rankings.get(query_id, [])]

    def query_ids(self) -> list[str]:
        return sorted(self.rankings)


def load_run(path: str | Path, label: str | None = None) -> RunResult:
    """trec format: `query_id Q0 doc_id rank score run_label`."""
    rankings: dict[str, list[tuple[str, float, int]]] = {}
    file_label = None
    with Path(path).open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 6:
                raise MalformedRecordError(
                    f"malformed run line {lineno}: expected 6 fields"
                )
            qid, _, doc_id, rank, score, run_label = parts
            file_label = run_label
            try:
                rankings.setdefault(qid, []).append(
                    (doc_id, float(score), int(rank)))
            except ValueError:
                raise MalformedRecordError(
                    f"malformed run line {lineno}: bad rank or score"
                ) from None
    run = RunResult(label=label or file_label or "run")
    for qid, rows in rankings.items():
        rows.sort(key=lambda r: r[2])
        run.set_ranking(qid, [(doc_id, score) for doc_id, score, _ in rows])
    return run


def save_run(run: RunResult, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write(format_run(run))


def format_run(run: RunResult) -> str:
    lines = []
    for qid in run.query_ids():
        for rank, (doc_id, score) in enumerate(run.rankings[qid], start=1):
            lines.append(f"{qid} Q0 {doc_id} {rank} {score:.6f} {run.label}")
    return "\n".join(lines) + ("\n" if lines else "")


# -- nDCG ------------------------------------------------------------------------


def dcg(grades_in_rank_order: list[int], k: int) -> float:
    total = 0.0
    for i, grade in enumerate(grades_in_rank_order[:k], start=1):
        total += (2.0**grade - 1.0) / math.log2(i + 1)
    return total


def ndcg_at_k(ranking: list[str], qrels_row: dict[str, int], k: int) -> float:
    """Graded nDCG of one ranking against one query's relevance row.
    Returns 0 when the row has no relevant documents (IDCG = 0)."""
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    gains = [qrels_row.get(doc_id, 0) for doc_id in ranking]
    ideal = sorted(qrels_row.values(), reverse=True)
    idcg = dcg(ideal, k)
    if idcg == 0.0:
        return 0.0
    return dcg(gains, k) / idcg


def evaluate_run(run: RunResult, qrels: Qrels, k: int,
                 skip_empty: bool = False) -> dict:
    """Per-query nDCG@k plus the mean over the run's queries that have a
    qrels row. Queries missing from the qrels are warned about and
    reported as 0 but stay out of the mean; skip_empty additionally drops
    IDCG=0 queries from the mean."""
    if not run.rankings:
        raise EmptyRunError(f"run {run.label} has no queries")
    per_query: dict[str, float] = {}
    warnings: list[str] = []
    mean_values = []
    for qid in run.query_ids():
        row = qrels.row(qid)
        value = ndcg_at_k(run.doc_ids(qid), row, k)
        per_query[qid] = value
        if qid not in qrels:
            warnings.append(f"query {qid} missing from qrels; scored 0 against "
                            "an empty row")
            continue
        if skip_empty and not any(row.values()):
            continue
        mean_values.append(value)
    return {
        "label": run.label,
        "k": k,
        "per_query": per_query,
        "mean": sum(mean_values) / len(mean_values) if mean_values else 0.0,
        "evaluated_queries": len(mean_values),
        "warnings": warnings,
    }


def compare_runs(runs: list[RunResult], qrels: Qrels | dict[str, Qrels],
                 k: int, skip_empty: bool = False) -> dict:
    """One row per run, one column per qrels set, deltas against the first
    run (the baseline)."""
    if len(runs) < 2:
        raise EmptyRunError("compare_runs needs at least two runs")
    columns = {"default": qrels} if isinstance(qrels, Qrels) else dict(qrels)
    rows = []
    baseline: dict[str, float] = {}
    for i, run in enumerate(runs):
        scores = {
            name: evaluate_run(run, q, k, skip_empty=skip_empty)["mean"]
            for name, q in columns.items()
        }
        if i == 0:
            baseline = scores
        rows.append({
            "label": run.label,
            "scores": scores,
            "deltas": {name: scores[name] - baseline[name] for name in scores},
        })
    return {"k": k, "columns": list(columns), "rows": rows}


def render_comparison(result: dict) -> str:
    columns = result["columns"]
    width = max(12, *(len(c) + 2 for c in columns))
    label_width = max(len(r["label"]) for r in result["rows"]) + 2
    lines = ["".join([" " * label_width] + [f"{c:>{width}}" for c in columns])]
    for i, row in enumerate(result["rows"]):
        cells = []
        for c in columns:
            cell = f"{row['scores'][c]:.3f}"
            if i > 0:
                cell += f" ({row['deltas'][c]:+.3f})"
            cells.append(f"{cell:>{width + (0 if i == 0 else 9)}}")
        lines.append(f"{row['label']:<{label_width}}" + "".join(cells))
    return "\n".join(lines)


# -- simulated user experiment ------------------------------------------------------


@dataclass
class SimulationConfig:
    num_docs: int = 200
    num_topics: int = 5
    relevant_per_topic: int = 10
    decoys_per_topic: int = 8
    topic_keywords: int = 8
    background_vocab: int = 300
    seed: int = 7
    k_eval: int = 20
    search_k: int = 20
    feedback_rounds: int = 1
    min_keyword_hits: int = 2
    alpha: float = 0.9


_SYLLABLES = ["ba", "ko", "ri", "ta", "mu", "se", "lo", "vi", "ne", "da",
              "pu", "ge", "zo", "fi", "wa"]


def _pseudo_words(rng: np.random.Generator, count: int) -> list[str]:
    words: list[str] = []
    seen: set[str] = set()
    while len(words) < count:
        word = "".join(rng.choice(_SYLLABLES)
                       for _ in range(int(rng.integers(2, 4))))
        if word not in seen:
            seen.add(word)
            words.append(word)
    return words


@dataclass
class SyntheticBenchmark:
    corpus: CorpusHandle
    qrels: Qrels
    search_terms: dict[str, list[str]]  # topic -> two seed terms
    keywords: dict[str, set[str]]       # topic -> all planted keywords


def build_synthetic_corpus(cfg: SimulationConfig) -> SyntheticBenchmark:
    """Corpus with planted topics. Each topic owns a keyword set; relevant
    documents mix several keywords per sentence, decoy documents repeat only
    the first search keyword, the rest is background. Qrels mark exactly the
    planted relevant documents."""
    rng = np.random.default_rng(cfg.seed)
    total_keywords = cfg.num_topics * cfg.topic_keywords
    pool = _pseudo_words(rng, total_keywords + cfg.background_vocab)
    topic_kw = {
        f"topic{t}": pool[t * cfg.topic_keywords:(t + 1) * cfg.topic_keywords]
        for t in range(cfg.num_topics)
    }
    background = pool[total_keywords:]

    def bg(n: int) -> list[str]:
        return [background[int(i)]
                for i in rng.integers(0, len(background), size=n)]

    handle = CorpusHandle()
    qrels = Qrels()
    doc_no = 0

    def add_doc(sentences: list[list[str]]) -> str:
        nonlocal doc_no
        doc_id = f"doc{doc_no:04d}"
        doc_no += 1
        handle.add_document(doc_id,
                            sentences=[" ".join(s) for s in sentences])
        return doc_id

    for t in range(cfg.num_topics):
        topic = f"topic{t}"
        kw = topic_kw[topic]
        for _ in range(cfg.relevant_per_topic):
            sentences = [kw[:2] + [kw[int(rng.integers(2, len(kw)))]] + bg(6)]
            for _ in range(int(rng.integers(2, 4))):
                picks = rng.choice(np.arange(2, len(kw)), size=2, replace=False)
                sentences.append([kw[int(p)] for p in picks] + bg(7))
            qrels.add(topic, add_doc(sentences), 1)
        for _ in range(cfg.decoys_per_topic):
            # decoys repeat the two seed terms heavily, but never put two
            # planted keywords in the same sentence, so the judging policy
            # always passes them over
            sentences = []
            for s in range(4):
                term = kw[0] if s % 2 == 0 else kw[1]
                sentences.append([term] * int(rng.integers(2, 4)) + bg(7))
            add_doc(sentences)

    while doc_no < cfg.num_docs:
        add_doc([bg(int(rng.integers(8, 13)))
                 for _ in range(int(rng.integers(3, 6)))])

    return SyntheticBenchmark(
        corpus=handle,
        qrels=qrels,
        search_terms={topic: kw[:2] for topic, kw in topic_kw.items()},
        keywords={topic: set(kw) for topic, kw in topic_kw.items()},
    )


def simulated_user_experiment(cfg: SimulationConfig | None = None,
                              benchmark: SyntheticBenchmark | None = None) -> dict:
    """Run the full interactive loop with a scripted user: search with the
    topic's two seed terms, mark retrieved sentences containing at least
    min_keyword_hits planted keywords as relevant-to-request, export, and
    measure document nDCG@k before and after the feedback."""
    cfg = cfg or SimulationConfig()
    if benchmark is None:
        benchmark = build_synthetic_corpus(cfg)
    corpus, qrels = benchmark.corpus, benchmark.qrels
    search_terms, topic_keywords = benchmark.search_terms, benchmark.keywords

    engine = SearchEngine.from_corpus(
        corpus, alpha=cfg.alpha, provider=HashingProvider(dim=128),
        build_vectors=False,
    )
    manager = SessionManager(engine, SessionStore(None), clock=lambda: 0.0)

    before_run = RunResult(label="search-terms")
    after_run = RunResult(label="with-feedback")
    per_topic = []

    def doc_ranking(query) -> RankedList:
        rank_cfg = ScoringConfig(alpha=cfg.alpha, target="documents",
                                 first_pass_k=max(cfg.k_eval * 5, 100))
        return first_pass_search(query, engine.index, engine.translation,
                                 engine.lm, rank_cfg)

    for topic in sorted(search_terms):
        seeds = search_terms[topic]
        kw = topic_keywords[topic]
        session = manager.create_session(
            "synthetic benchmark exploration",
            f"planted {topic} request",
        )
        sid = session.session_id
        _, results = manager.run_initial_search(sid, " ".join(seeds),
                                                k=cfg.search_k)
        before_query = manager.materialize_query(manager.get(sid),
                                                 include_narratives=True)
        for round_no in range(cfg.feedback_rounds):
            for sentence_id, _ in results.items:
                tokens = set(corpus.sentence(sentence_id).tokens)
                if len(tokens & kw) >= cfg.min_keyword_hits:
                    manager.record_judgment(
                        sid, sentence_id, "relevant_to_request")
            if round_no + 1 < cfg.feedback_rounds:
                _, results = manager.run_initial_search(
                    sid, " ".join(seeds), k=cfg.search_k)
        after_query, _ = manager.export_query(sid)

        before_ranked = doc_ranking(before_query)
        after_ranked = doc_ranking(after_query)
        before_run.set_ranking(topic, before_ranked)
        after_run.set_ranking(topic, after_ranked)
        row = qrels.row(topic)
        b = ndcg_at_k(before_ranked.ids(), row, cfg.k_eval)
        a = ndcg_at_k(after_ranked.ids(), row, cfg.k_eval)
        per_topic.append({"topic": topic, "before": b, "after": a,
                          "delta": a - b})

    before_eval = evaluate_run(before_run, qrels, cfg.k_eval)
    after_eval = evaluate_run(after_run, qrels, cfg.k_eval)
    return {
        "config": {
            "num_docs": cfg.num_docs,
            "num_topics": cfg.num_topics,
            "relevant_per_topic": cfg.relevant_per_topic,
            "seed": cfg.seed,
            "k_eval": cfg.k_eval,
            "feedback_rounds": cfg.feedback_rounds,
        },
        "corpus": corpus.counts(),
        "per_topic": per_topic,
        "mean_before": before_eval["mean"],
        "mean_after": after_eval["mean"],
        "delta": after_eval["mean"] - before_eval["mean"],
    }


def render_experiment(report: dict) -> str:
    lines = [
        f"simulated user experiment (seed {report['config']['seed']}, "
        f"nDCG@{report['config']['k_eval']})",
        f"  corpus: {report['corpus']['documents']} docs, "
        f"{report['corpus']['sentences']} sentences",
        f"  {'topic':<10}{'before':>10}{'after':>10}{'delta':>10}",
    ]
    for row in report["per_topic"]:
        lines.append(f"  {row['topic']:<10}{row['before']:>10.4f}"
                     f"{row['after']:>10.4f}{row['delta']:>10.4f}")
    lines.append(f"  {'mean':<10}{report['mean_before']:>10.4f}"
                 f"{report['mean_after']:>10.4f}{report['delta']:>10.4f}")
    return "\n".join(lines)


def experiment_to_json(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2)
