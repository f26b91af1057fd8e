"""Interactive query development for retrieval: probabilistic weighted-term
search with graded relevance feedback, embedding-based query-by-example
enrichment, session management, and an nDCG evaluation harness."""

from .corpus import (
    CorpusHandle,
    Document,
    EventFeature,
    IngestConfig,
    InvertedIndex,
    SentenceRecord,
    build_index,
    ingest_corpus,
    ingest_event_annotations,
    load_corpus,
    save_corpus,
    segment_sentences,
    tokenize,
)
from .engine import SearchEngine
from .errors import QueryForgeError
from .evaluation import (
    Qrels,
    RunResult,
    SimulationConfig,
    compare_runs,
    evaluate_run,
    load_qrels,
    load_run,
    ndcg_at_k,
    simulated_user_experiment,
)
from .retrieval import (
    FieldWeights,
    JudgmentLevel,
    LanguageModel,
    QueryFields,
    RankedList,
    ScoringConfig,
    TranslationTable,
    WeightedQuery,
    apply_feedback,
    build_weighted_query,
    estimate_lm,
    first_pass_search,
    load_translation_table,
    merge_queries,
    score_item,
    second_pass_rescore,
)
from .semantic import (
    EmbeddingProvider,
    HashingProvider,
    PrecomputedProvider,
    RemoteProvider,
    VectorIndex,
    build_vector_index,
    cosine_similarity,
    embed_sentence,
    query_by_example,
)
from .session import (
    Judgment,
    Session,
    SessionConfig,
    SessionManager,
    SessionStore,
    compute_stats,
    render_stats,
    replay_log,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
