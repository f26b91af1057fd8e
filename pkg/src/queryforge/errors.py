"""Exception hierarchy shared across the engine.

Every error carries a stable machine code so the HTTP layer can map each
failure to exactly one ApiError code.
"""

from __future__ import annotations


class QueryForgeError(Exception):
    """Base class; `code` is the machine-readable error identifier."""

    code = "internal_error"

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


class MalformedRecordError(QueryForgeError):
    code = "malformed_record"


class DuplicateDocIdError(QueryForgeError):
    code = "duplicate_doc_id"


class UnknownSentenceError(QueryForgeError):
    code = "sentence_not_found"


class UnknownItemError(QueryForgeError):
    code = "item_not_found"


class UnknownFieldError(QueryForgeError):
    code = "unknown_field"


class EmptyQueryError(QueryForgeError):
    code = "empty_query"


class EmptySearchTermsError(QueryForgeError):
    code = "empty_search_terms"


class EmptyNarrativeError(QueryForgeError):
    code = "empty_narrative"


class NoExamplesError(QueryForgeError):
    code = "no_example_sentences"


class SessionNotFoundError(QueryForgeError):
    code = "session_not_found"


class SessionFrozenError(QueryForgeError):
    code = "session_frozen"


class BadJudgmentLevelError(QueryForgeError):
    code = "bad_judgment_level"


class EmptyIndexError(QueryForgeError):
    code = "empty_index"


class DimensionMismatchError(QueryForgeError):
    code = "dimension_mismatch"


class ProviderError(QueryForgeError):
    code = "provider_error"


class EmptyRunError(QueryForgeError):
    code = "empty_run"


class ConfigError(QueryForgeError):
    code = "bad_config"


class StorageError(QueryForgeError):
    code = "bad_storage"
