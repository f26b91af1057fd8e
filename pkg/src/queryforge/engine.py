"""Bundles the shared read-only retrieval state (corpus, inverted index,
language model, translation table, vector index, embedding provider) behind
the operations sessions, the server and the CLI call."""

from __future__ import annotations

from dataclasses import dataclass, field

from .corpus import CorpusHandle, InvertedIndex, SentenceRecord, build_index
from .errors import EmptyIndexError
from .retrieval import (
    LanguageModel,
    RankedList,
    ScoringConfig,
    TranslationTable,
    WeightedQuery,
    estimate_lm,
    first_pass_search,
    second_pass_rescore,
)
from .semantic import (
    EmbeddingProvider,
    HashingProvider,
    VectorIndex,
    build_vector_index,
    query_by_example,
)


@dataclass
class SearchEngine:
    corpus: CorpusHandle
    index: InvertedIndex
    lm: LanguageModel | None
    translation: TranslationTable
    provider: EmbeddingProvider
    vectors: VectorIndex | None = None
    alpha: float = 0.9
    first_pass_k_documents: int = 1000
    first_pass_k_sentences: int = 200
    second_pass_depth: int = 100

    @classmethod
    def from_corpus(cls, corpus: CorpusHandle, alpha: float = 0.9,
                    translation: TranslationTable | None = None,
                    provider: EmbeddingProvider | None = None,
                    vectors: VectorIndex | None = None,
                    build_vectors: bool = True, **kwargs) -> "SearchEngine":
        index = build_index(corpus)
        lm = estimate_lm(index) if index.total_tokens > 0 else None
        provider = provider or HashingProvider()
        if vectors is None and build_vectors:
            vectors = build_vector_index(provider, corpus)
        return cls(corpus=corpus, index=index, lm=lm,
                   translation=translation or TranslationTable.identity(),
                   provider=provider, vectors=vectors, alpha=alpha, **kwargs)

    def _require_lm(self) -> LanguageModel:
        if self.lm is None:
            raise EmptyIndexError("the corpus is empty; nothing to search")
        return self.lm

    def scoring_config(self, target: str, k: int | None = None,
                       depth: int | None = None) -> ScoringConfig:
        default_k = (self.first_pass_k_documents if target == "documents"
                     else self.first_pass_k_sentences)
        return ScoringConfig(
            alpha=self.alpha,
            target=target,
            first_pass_k=k if k is not None else default_k,
            second_pass_depth=depth if depth is not None else self.second_pass_depth,
        )

    def search(self, query: WeightedQuery, target: str, k: int,
               exclude: set[str] | frozenset[str] = frozenset(),
               two_pass: bool = True) -> RankedList:
        """First-pass retrieval, optionally feature-rescored, with judged or
        otherwise excluded ids filtered out before truncating to k."""
        lm = self._require_lm()
        # over-retrieve so exclusions cannot starve the page
        cfg = self.scoring_config(target, k=k + len(exclude))
        ranked = first_pass_search(query, self.index, self.translation, lm, cfg)
        if two_pass and query.feature_terms:
            cfg = self.scoring_config(target, k=k + len(exclude),
                                      depth=k + len(exclude))
            ranked = second_pass_rescore(ranked, query, self.index,
                                         self.translation, lm, cfg)
        items = [(i, s) for i, s in ranked.items if i not in exclude][:k]
        return RankedList(items=items, provenance=ranked.provenance)

    def enrich(self, examples: list[SentenceRecord], k: int,
               exclude: set[str] | frozenset[str] = frozenset()) -> RankedList:
        if self.vectors is None:
            raise EmptyIndexError("no vector index built for this corpus")
        return query_by_example(examples, self.vectors, self.provider, k,
                                exclude=exclude)
