"""Weighted-term probabilistic retrieval with relevance feedback.

A query is a set of weighted terms. An item (document or sentence) D is
scored in log space as

    score(D) = sum_i  w_i * log( alpha * sum_{f in D} P(q_i|f) / |D|
                                 + (1 - alpha) * P_LM(q_i) )

where P(q|f) is a term-translation probability (identity for monolingual
retrieval) and P_LM a collection unigram model that keeps every factor
positive for alpha < 1. Term weights come from field-weighted counts
(w(v) = sum_s c_s(v) * theta_s) and move under graded user feedback:
+1 for relevant-to-request, +0.5 for relevant-to-task, -1 for
not-relevant, nothing for neutral.

Retrieval runs in two passes: a lexical pass over the whole collection,
then a rescoring pass over its top results that adds composite
event-feature terms scored with the same formula over the feature
vocabulary.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import InvertedIndex, SentenceRecord
from .errors import (
    ConfigError,
    EmptyIndexError,
    EmptyQueryError,
    MalformedRecordError,
    UnknownFieldError,
    UnknownItemError,
)

NEG_INF = float("-inf")

TASK_NARRATIVE = "task-narrative"
REQUEST_NARRATIVE = "request-narrative"
REQUEST_SAMPLE_DOC_EXCERPT = "request-sample-doc-excerpt"
SEARCH_TERMS = "search-terms"
SELECTED_SENTENCES = "selected-sentences"

REGISTERED_FIELDS = frozenset(
    {
        TASK_NARRATIVE,
        REQUEST_NARRATIVE,
        REQUEST_SAMPLE_DOC_EXCERPT,
        SEARCH_TERMS,
        SELECTED_SENTENCES,
    }
)

DEFAULT_FIELD_WEIGHTS = {
    SEARCH_TERMS: 2.0,
    SELECTED_SENTENCES: 1.0,
    TASK_NARRATIVE: 0.5,
    REQUEST_NARRATIVE: 1.0,
    REQUEST_SAMPLE_DOC_EXCERPT: 1.0,
}


class JudgmentLevel(str, enum.Enum):
    """The four graded relevance levels a user can assign to a sentence."""

    RELEVANT_TO_REQUEST = "relevant_to_request"
    RELEVANT_TO_TASK = "relevant_to_task"
    NEUTRAL = "neutral"
    NOT_RELEVANT = "not_relevant"


# Weight delta applied once per (term, judged sentence) pair, not per
# occurrence; occurrence counts already flow through the field counts.
FEEDBACK_DELTAS = {
    JudgmentLevel.RELEVANT_TO_REQUEST: 1.0,
    JudgmentLevel.RELEVANT_TO_TASK: 0.5,
    JudgmentLevel.NEUTRAL: 0.0,
    JudgmentLevel.NOT_RELEVANT: -1.0,
}

POSITIVE_LEVELS = (JudgmentLevel.RELEVANT_TO_REQUEST, JudgmentLevel.RELEVANT_TO_TASK)


def _pruned(weights: dict[str, float]) -> dict[str, float]:
    return {t: w for t, w in weights.items() if w > 0.0}


@dataclass
class WeightedQuery:
    """The central exchange format: term -> weight, plus composite
    event-feature terms used only by the second retrieval pass. Non-positive
    weights are pruned on construction."""

    terms: dict[str, float] = field(default_factory=dict)
    feature_terms: dict[str, float] = field(default_factory=dict)
    provenance: str = ""

    def __post_init__(self):
        self.terms = _pruned(dict(self.terms))
        self.feature_terms = _pruned(dict(self.feature_terms))

    @property
    def is_empty(self) -> bool:
        return not self.terms and not self.feature_terms

    def scaled(self, factor: float) -> "WeightedQuery":
        return WeightedQuery(
            terms={t: w * factor for t, w in self.terms.items()},
            feature_terms={t: w * factor for t, w in self.feature_terms.items()},
            provenance=self.provenance,
        )

    def to_record(self) -> dict:
        return {
            "terms": {t: self.terms[t] for t in sorted(self.terms)},
            "feature_terms": {t: self.feature_terms[t] for t in sorted(self.feature_terms)},
            "provenance": self.provenance,
        }

    @classmethod
    def from_record(cls, record: dict) -> "WeightedQuery":
        return cls(
            terms={str(t): float(w) for t, w in record.get("terms", {}).items()},
            feature_terms={
                str(t): float(w) for t, w in record.get("feature_terms", {}).items()
            },
            provenance=str(record.get("provenance", "")),
        )


class QueryFields:
    """Token counts per named query field (c_s(v))."""

    def __init__(self):
        self.fields: dict[str, dict[str, int]] = {}

    def add(self, name: str, tokens: list[str], count: int = 1) -> None:
        if name not in REGISTERED_FIELDS:
            raise UnknownFieldError(f"unregistered query field {name}")
        bucket = self.fields.setdefault(name, {})
        for token in tokens:
            bucket[token] = bucket.get(token, 0) + count

    def set_counts(self, name: str, counts: dict[str, int]) -> None:
        if name not in REGISTERED_FIELDS:
            raise UnknownFieldError(f"unregistered query field {name}")
        self.fields[name] = dict(counts)

    def is_empty(self) -> bool:
        return not any(self.fields.values())


@dataclass
class FieldWeights:
    """theta_s per query field. Defaults emphasize user-entered terms."""

    theta: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_FIELD_WEIGHTS))

    def weight_for(self, name: str) -> float:
        if name not in self.theta:
            raise UnknownFieldError(f"no field weight configured for {name}")
        return self.theta[name]


class TranslationTable:
    """P(query term | foreign term). The identity table maps every term to
    itself with probability 1 and is the monolingual default."""

    def __init__(self, probs: dict[str, dict[str, float]] | None = None):
        self._identity = probs is None
        self.probs = probs or {}
        # reverse map: query term -> [(foreign term, prob)]
        self._sources: dict[str, list[tuple[str, float]]] = {}
        for foreign, row in self.probs.items():
            total = 0.0
            for query_term, p in row.items():
                if p < 0.0 or p > 1.0:
                    raise MalformedRecordError(
                        f"translation probability out of range for "
                        f"({foreign} -> {query_term}): {p}"
                    )
                total += p
                self._sources.setdefault(query_term, []).append((foreign, p))
            if total > 1.0 + 1e-6:
                raise MalformedRecordError(
                    f"translation probabilities for {foreign} sum to {total:.8f} > 1"
                )
        for row in self._sources.values():
            row.sort()

    @classmethod
    def identity(cls) -> "TranslationTable":
        return cls(None)

    @property
    def is_identity(self) -> bool:
        return self._identity

    def prob(self, query_term: str, foreign_term: str) -> float:
        if self._identity:
            return 1.0 if query_term == foreign_term else 0.0
        return self.probs.get(foreign_term, {}).get(query_term, 0.0)

    def sources(self, query_term: str) -> list[tuple[str, float]]:
        """Foreign terms that can translate into query_term."""
        if self._identity:
            return [(query_term, 1.0)]
        return self._sources.get(query_term, [])


def load_translation_table(path: str | Path) -> TranslationTable:
    """Tab-separated lines: foreign_term <TAB> query_term <TAB> probability."""
    probs: dict[str, dict[str, float]] = {}
    with Path(path).open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise MalformedRecordError(
                    f"malformed translation row at line {lineno}: expected 3 fields"
                )
            foreign, query_term, raw = parts
            try:
                p = float(raw)
            except ValueError:
                raise MalformedRecordError(
                    f"malformed translation row at line {lineno}: bad probability"
                ) from None
            probs.setdefault(foreign, {})[query_term] = p
    return TranslationTable(probs)


@dataclass
class LanguageModel:
    """Unigram smoothing model with a positive floor for unseen terms."""

    unigram: dict[str, float]
    oov_mass: float

    def prob(self, term: str) -> float:
        return self.unigram.get(term, self.oov_mass)


def _lm_from_counts(counts: dict[str, int], total: int) -> LanguageModel:
    denom = total + len(counts) + 1
    return LanguageModel(
        unigram={t: (c + 1) / denom for t, c in counts.items()},
        oov_mass=1.0 / denom,
    )


def estimate_lm(index: InvertedIndex) -> LanguageModel:
    """Add-one unigram estimates over the collection:
    P_LM(t) = (count(t) + 1) / (total_tokens + vocab + 1), with the last
    unit of mass reserved for unseen terms."""
    if index.total_tokens == 0:
        raise EmptyIndexError("cannot estimate a language model from an empty index")
    return _lm_from_counts(index.collection_term_counts, index.total_tokens)


def feature_lm(index: InvertedIndex) -> LanguageModel:
    """Same estimator over the event-feature vocabulary; an empty feature
    vocabulary degenerates to pure out-of-vocabulary mass."""
    return _lm_from_counts(index.feature_term_counts, index.feature_total)


@dataclass
class ScoringConfig:
    alpha: float = 0.9
    target: str = "documents"  # or "sentences"
    first_pass_k: int | None = None
    second_pass_depth: int = 100

    def __post_init__(self):
        if not (0.0 < self.alpha <= 1.0):
            raise ConfigError(f"alpha must be in (0, 1], got {self.alpha}")
        if self.target not in ("documents", "sentences"):
            raise ConfigError(f"target must be documents or sentences, got {self.target}")
        if self.first_pass_k is None:
            self.first_pass_k = 1000 if self.target == "documents" else 200
        if self.first_pass_k < 1:
            raise ConfigError("first_pass_k must be >= 1")
        if self.second_pass_depth < 0:
            raise ConfigError("second_pass_depth must be >= 0")
        self.second_pass_depth = min(self.second_pass_depth, self.first_pass_k)


@dataclass
class RankedList:
    """Ordered (item_id, score) pairs plus the provenance of the query that
    produced them."""

    items: list[tuple[str, float]]
    provenance: str = ""

    def ids(self) -> list[str]:
        return [item_id for item_id, _ in self.items]

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self):
        return iter(self.items)


def build_weighted_query(fields: QueryFields, weights: FieldWeights,
                         provenance: str = "") -> WeightedQuery:
    """Combine per-field counts into term weights: w(v) = sum_s c_s(v)*theta_s."""
    combined: dict[str, float] = {}
    for name, counts in fields.fields.items():
        if name not in REGISTERED_FIELDS:
            raise UnknownFieldError(f"unregistered query field {name}")
        if not counts:
            continue
        theta = weights.weight_for(name)
        for term, count in counts.items():
            combined[term] = combined.get(term, 0.0) + count * theta
    return WeightedQuery(terms=combined, provenance=provenance)


class _TermPlan:
    """Per-query-term scoring constants shared by every item."""

    __slots__ = ("weight", "sources", "base")

    def __init__(self, weight: float, sources: list[tuple[str, float]], base: float):
        self.weight = weight
        self.sources = sources
        self.base = base


def _plan(terms: dict[str, float], tt: TranslationTable, lm: LanguageModel,
          alpha: float) -> dict[str, _TermPlan]:
    return {
        q: _TermPlan(w, tt.sources(q), (1.0 - alpha) * lm.prob(q))
        for q, w in terms.items()
    }


def _term_masses(tp: _TermPlan, candidates_fn, restrict) -> dict[str, float]:
    """Translation mass (sum of P(q|f)*tf(f)) per item for one query term.
    Restricted and unrestricted paths accumulate in the same source order,
    so they produce bit-identical masses."""
    masses: dict[str, float] = {}
    if restrict is None:
        for foreign, p in tp.sources:
            for item, tf in candidates_fn(foreign).items():
                masses[item] = masses.get(item, 0.0) + p * tf
        return masses
    for item in restrict:
        mass = 0.0
        for foreign, p in tp.sources:
            tf = candidates_fn(foreign).get(item, 0)
            if tf:
                mass += p * tf
        if mass:
            masses[item] = mass
    return masses


def _accumulate_scores(plan: dict[str, _TermPlan], alpha: float,
                       candidates_fn, length_fn,
                       restrict=None) -> tuple[dict[str, float], float]:
    """Log scores for every item with translation mass (optionally only the
    `restrict` subset), visiting each posting once.

    Returns (scores, floor): items absent from `scores` implicitly score
    `floor` - the finite all-smoothing score when alpha < 1, -inf when
    alpha = 1 (a term contributed no mass). An empty plan scores 0 for
    everything.
    """
    if not plan:
        return {}, 0.0
    if alpha < 1.0:
        floor = 0.0
        for tp in plan.values():
            floor += tp.weight * math.log(tp.base)
        scores: dict[str, float] = {}
        for tp in plan.values():
            log_base = math.log(tp.base)
            for item, mass in _term_masses(tp, candidates_fn, restrict).items():
                length = length_fn(item)
                if length == 0:
                    continue
                inner = alpha * (mass / length) + tp.base
                scores[item] = (scores.get(item, floor)
                                + tp.weight * (math.log(inner) - log_base))
        return scores, floor
    # alpha = 1: no smoothing floor; only items matching every term survive
    scores = {}
    counts: dict[str, int] = {}
    for tp in plan.values():
        for item, mass in _term_masses(tp, candidates_fn, restrict).items():
            length = length_fn(item)
            if length == 0:
                continue
            inner = alpha * (mass / length) + tp.base
            scores[item] = scores.get(item, 0.0) + tp.weight * math.log(inner)
            counts[item] = counts.get(item, 0) + 1
    needed = len(plan)
    return ({item: s for item, s in scores.items() if counts[item] == needed},
            NEG_INF)


def _lexical_scores(query: WeightedQuery, index: InvertedIndex,
                    tt: TranslationTable, lm: LanguageModel, alpha: float,
                    target: str, restrict=None) -> tuple[dict[str, float], float]:
    plan = _plan(query.terms, tt, lm, alpha)
    return _accumulate_scores(
        plan, alpha,
        lambda term: index.candidates(term, target),
        lambda item: index.length(item, target),
        restrict,
    )


def score_item(query: WeightedQuery, item_id: str, index: InvertedIndex,
               tt: TranslationTable, lm: LanguageModel,
               cfg: ScoringConfig) -> float:
    """Log relevance score of one item under the lexical query terms.

    Finite whenever alpha < 1; with alpha = 1 an item missing all
    translation mass for some term scores -inf. Items with no tokens
    score -inf (the model has no length to normalize by).
    """
    if not query.terms:
        raise EmptyQueryError("empty query")
    if not index.has_item(item_id, cfg.target):
        raise UnknownItemError(f"unknown item_id {item_id}")
    if index.length(item_id, cfg.target) == 0:
        return NEG_INF
    scores, floor = _lexical_scores(query, index, tt, lm, cfg.alpha,
                                    cfg.target, restrict=(item_id,))
    return scores.get(item_id, floor)


def first_pass_search(query: WeightedQuery, index: InvertedIndex,
                      tt: TranslationTable, lm: LanguageModel,
                      cfg: ScoringConfig) -> RankedList:
    """Lexical pass over the whole collection: top first_pass_k items by
    log score, -inf items dropped, ties broken by ascending item id.
    Feature terms are ignored here by construction."""
    if not query.terms:
        raise EmptyQueryError("empty query")
    alpha, target = cfg.alpha, cfg.target
    scores, floor = _lexical_scores(query, index, tt, lm, alpha, target)

    scored = sorted(scores.items(), key=lambda pair: (-pair[1], pair[0]))
    top = scored[: cfg.first_pass_k]

    if len(top) < cfg.first_pass_k and alpha < 1.0:
        # Items without any translation mass share the same finite floor
        # score; fill remaining slots with them in id order.
        remaining = cfg.first_pass_k - len(top)
        fill = sorted(
            item_id
            for item_id in index.item_ids(target)
            if item_id not in scores and index.length(item_id, target) > 0
        )
        top.extend((item_id, floor) for item_id in fill[:remaining])
    return RankedList(items=top, provenance=f"{query.provenance}#first-pass")


def second_pass_rescore(first_pass: RankedList, query: WeightedQuery,
                        index: InvertedIndex, tt: TranslationTable,
                        lm: LanguageModel, cfg: ScoringConfig) -> RankedList:
    """Rescore the top of a first-pass list with lexical plus event-feature
    terms. Feature terms use the same formula over the feature vocabulary
    with identity translation and its own smoothing model. The rest of the
    list keeps its first-pass order below the rescored block. With no
    feature terms the block's scores (and therefore its order) are
    unchanged."""
    depth = min(cfg.second_pass_depth, len(first_pass.items))
    if depth == 0:
        return RankedList(items=list(first_pass.items), provenance=first_pass.provenance)
    alpha, target = cfg.alpha, cfg.target
    head_ids = [item_id for item_id, _ in first_pass.items[:depth]]
    lex_scores, lex_floor = _lexical_scores(query, index, tt, lm, alpha,
                                            target, restrict=head_ids)
    fplan = _plan(query.feature_terms, TranslationTable.identity(),
                  feature_lm(index), alpha)
    feat_scores, feat_floor = _accumulate_scores(
        fplan, alpha,
        lambda term: index.feature_candidates(term, target),
        lambda item: index.feature_length(item, target),
        restrict=head_ids,
    )

    head = []
    for item_id in head_ids:
        lexical = lex_scores.get(item_id, lex_floor)
        features = feat_scores.get(item_id, feat_floor)
        head.append((item_id, lexical + features))
    head.sort(key=lambda pair: (-pair[1], pair[0]))
    items = head + list(first_pass.items[depth:])
    return RankedList(items=items, provenance=f"{query.provenance}#second-pass")


def apply_feedback(query: WeightedQuery,
                   judged: list[tuple[SentenceRecord, JudgmentLevel]]) -> WeightedQuery:
    """Re-weight query terms from graded judgments. Each unique term of a
    judged sentence moves by the level's delta; unseen terms enter at zero
    before the delta; non-positive results are pruned."""
    deltas: dict[str, float] = {}
    for sentence, level in judged:
        delta = FEEDBACK_DELTAS[JudgmentLevel(level)]
        if delta == 0.0:
            continue
        for term in set(sentence.tokens):
            deltas[term] = deltas.get(term, 0.0) + delta
    terms = dict(query.terms)
    for term, delta in deltas.items():
        terms[term] = terms.get(term, 0.0) + delta
    return WeightedQuery(
        terms=terms,
        feature_terms=dict(query.feature_terms),
        provenance=query.provenance,
    )


def merge_queries(a: WeightedQuery, b: WeightedQuery, mix: float) -> WeightedQuery:
    """Convex combination over the union vocabulary:
    w(t) = mix*w_a(t) + (1-mix)*w_b(t)."""
    if not (0.0 <= mix <= 1.0):
        raise ConfigError(f"mix must be in [0, 1], got {mix}")

    def combine(wa: dict[str, float], wb: dict[str, float]) -> dict[str, float]:
        return {
            t: mix * wa.get(t, 0.0) + (1.0 - mix) * wb.get(t, 0.0)
            for t in set(wa) | set(wb)
        }

    return WeightedQuery(
        terms=combine(a.terms, b.terms),
        feature_terms=combine(a.feature_terms, b.feature_terms),
        provenance=f"merge[{mix:g}]({a.provenance}|{b.provenance})",
    )
