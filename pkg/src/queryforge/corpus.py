"""Corpus ingestion, sentence segmentation, tokenization and indexing.

Documents arrive as line-delimited JSON records ({"doc_id", "text"} or
pre-segmented {"doc_id", "sentences": [...]}), are split into sentences and
normalized tokens, and compiled into an immutable inverted index carrying
the collection statistics both retrievers read. Event annotations (trigger
plus agent/patient arguments) attach to sentences from a sidecar file and
are indexed as composite terms in a separate feature vocabulary.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from .errors import (
    DuplicateDocIdError,
    MalformedRecordError,
    StorageError,
    UnknownSentenceError,
)
from ._stopwords import ENGLISH_STOPWORDS

INDEX_MAGIC = "queryforge-index"
INDEX_FORMAT_VERSION = 1

# Separator for composite event terms: trigger▸role▸argument. These live in
# a feature vocabulary disjoint from lexical terms, so the same scoring
# formula applies to both without collisions.
FEATURE_SEP = "▸"

EVENT_ROLES = ("agent", "patient")

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

_TERMINATORS = ".!?"
_CLOSERS = "\"')]»’”"
_OPENERS = "\"'([«‘“"

# Guard list for the sentence splitter: a period after one of these tokens
# does not end a sentence. Single capital letters are deliberately absent
# so that terse strings like "A. B?" still split.
_ABBREVIATIONS = frozenset(
    """
    mr mrs ms dr prof st sr jr vs etc inc ltd co corp gen col sgt capt gov
    sen rep fig eq no dept est approx
    jan feb mar apr jun jul aug sep sept oct nov dec
    """.split()
)


@dataclass
class IngestConfig:
    """Normalization knobs. Defaults keep token identity maximally plain:
    lowercase, Unicode word boundaries, punctuation dropped, no stopword
    removal, no stemming."""

    remove_stopwords: bool = False
    stem: bool = False

    def to_dict(self) -> dict:
        return {"remove_stopwords": self.remove_stopwords, "stem": self.stem}

    @classmethod
    def from_dict(cls, data: dict) -> "IngestConfig":
        return cls(
            remove_stopwords=bool(data.get("remove_stopwords", False)),
            stem=bool(data.get("stem", False)),
        )


@dataclass(frozen=True)
class EventFeature:
    """One trigger/role/argument relationship attached to a sentence."""

    trigger: str
    role: str
    argument: str

    def term(self) -> str:
        return f"{self.trigger}{FEATURE_SEP}{self.role}{FEATURE_SEP}{self.argument}"


@dataclass
class SentenceRecord:
    sentence_id: str
    doc_id: str
    position: int
    text: str
    tokens: list[str]
    event_features: list[EventFeature] = field(default_factory=list)

    def feature_terms(self) -> list[str]:
        return [f.term() for f in self.event_features]


@dataclass
class Document:
    doc_id: str
    raw_text: str
    sentence_ids: list[str]


def _stem(token: str) -> str:
    """Conservative suffix stripper; intentionally far weaker than a full
    stemmer so that surprises stay local."""
    if len(token) > 4 and token.endswith("ies"):
        return token[:-3] + "y"
    if len(token) > 5 and token.endswith("sses"):
        return token[:-2]
    if len(token) > 5 and token.endswith("ing") and _has_vowel(token[:-3]):
        return token[:-3]
    if len(token) > 4 and token.endswith("ed") and _has_vowel(token[:-2]):
        return token[:-2]
    if len(token) > 3 and token.endswith("s") and not token.endswith(("ss", "us", "is")):
        return token[:-1]
    return token


def _has_vowel(s: str) -> bool:
    return any(c in "aeiou" for c in s)


def tokenize(text: str, config: IngestConfig | None = None) -> list[str]:
    """Lowercased Unicode word tokens; apostrophes and punctuation split.

    Deterministic: same input and config always yield the same output.
    """
    cfg = config or IngestConfig()
    tokens = [t.lower() for t in _TOKEN_RE.findall(text)]
    if cfg.remove_stopwords:
        tokens = [t for t in tokens if t not in ENGLISH_STOPWORDS]
    if cfg.stem:
        tokens = [_stem(t) for t in tokens]
    return tokens


def segment_sentences(text: str) -> list[str]:
    """Rule-based splitter: a run of .!? (plus trailing quotes/brackets)
    ends a sentence when followed by whitespace and an uppercase letter,
    digit or opening quote. Periods after known abbreviations or tokens
    with internal periods (U.S, e.g) do not split. Input with no usable
    terminator comes back as a single sentence; whitespace-only input as
    none. Concatenating the output reproduces the input up to the
    whitespace between sentences.
    """
    sentences: list[str] = []
    start = 0
    i = 0
    n = len(text)
    while i < n:
        if text[i] in _TERMINATORS:
            j = i
            while j + 1 < n and text[j + 1] in _TERMINATORS:
                j += 1
            k = j
            while k + 1 < n and text[k + 1] in _CLOSERS:
                k += 1
            if _sentence_boundary(text, i, k):
                segment = text[start : k + 1].strip()
                if segment:
                    sentences.append(segment)
                start = k + 1
                i = k + 1
                continue
            i = j + 1
            continue
        i += 1
    tail = text[start:].strip()
    if tail:
        sentences.append(tail)
    return sentences


def _sentence_boundary(text: str, first_term: int, last: int) -> bool:
    n = len(text)
    after = last + 1
    if after >= n:
        return True
    if not text[after].isspace():
        return False
    nxt = after
    while nxt < n and text[nxt].isspace():
        nxt += 1
    if nxt >= n:
        return True
    if not (text[nxt].isupper() or text[nxt].isdigit() or text[nxt] in _OPENERS):
        return False
    if text[first_term] == ".":
        w_start = first_term
        while w_start > 0 and not text[w_start - 1].isspace():
            w_start -= 1
        word = text[w_start:first_term].strip(_OPENERS + _CLOSERS).lower()
        if word in _ABBREVIATIONS or "." in word:
            return False
    return True


def normalize_term(text: str, config: IngestConfig | None = None) -> str:
    """Single normalized term for event triggers/arguments; multi-word
    inputs collapse with underscores."""
    return "_".join(tokenize(text, config))


class CorpusHandle:
    """Mutable container for an ingested corpus. Becomes the read-only
    backing store of an InvertedIndex after build_index; event annotations
    ingested after an index was built require a rebuild to be scored.
    """

    def __init__(self, config: IngestConfig | None = None):
        self.config = config or IngestConfig()
        self.documents: dict[str, Document] = {}
        self.sentences: dict[str, SentenceRecord] = {}

    # -- construction ------------------------------------------------------

    def add_document(self, doc_id: str, text: str | None = None,
                     sentences: list[str] | None = None) -> Document:
        if doc_id in self.documents:
            raise DuplicateDocIdError(f"duplicate doc_id {doc_id}")
        if sentences is None:
            sentences = segment_sentences(text or "")
            raw = text or ""
        else:
            sentences = [s for s in sentences if s.strip()]
            raw = " ".join(sentences) if text is None else text
        sentence_ids = []
        for pos, sent_text in enumerate(sentences):
            sid = f"{doc_id}:{pos}"
            self.sentences[sid] = SentenceRecord(
                sentence_id=sid,
                doc_id=doc_id,
                position=pos,
                text=sent_text,
                tokens=tokenize(sent_text, self.config),
            )
            sentence_ids.append(sid)
        doc = Document(doc_id=doc_id, raw_text=raw, sentence_ids=sentence_ids)
        self.documents[doc_id] = doc
        return doc

    # -- access ------------------------------------------------------------

    @property
    def num_documents(self) -> int:
        return len(self.documents)

    @property
    def num_sentences(self) -> int:
        return len(self.sentences)

    @property
    def num_tokens(self) -> int:
        return sum(len(s.tokens) for s in self.sentences.values())

    def sentence(self, sentence_id: str) -> SentenceRecord:
        try:
            return self.sentences[sentence_id]
        except KeyError:
            raise UnknownSentenceError(f"unknown sentence_id {sentence_id}") from None

    def doc_sentences(self, doc_id: str) -> list[SentenceRecord]:
        doc = self.documents[doc_id]
        return [self.sentences[sid] for sid in doc.sentence_ids]

    def counts(self) -> dict:
        return {
            "documents": self.num_documents,
            "sentences": self.num_sentences,
            "tokens": self.num_tokens,
        }


def ingest_corpus(path: str | Path, config: IngestConfig | None = None) -> CorpusHandle:
    """Read a line-delimited corpus file into a CorpusHandle.

    Each line is a JSON object with "doc_id" and either "text" (segmented
    here) or "sentences" (pre-segmented). Malformed lines and duplicate
    doc ids abort with the offending line number / id.
    """
    handle = CorpusHandle(config)
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedRecordError(
                    f"malformed corpus record at line {lineno}: {exc.msg}"
                ) from None
            if not isinstance(record, dict) or "doc_id" not in record:
                raise MalformedRecordError(
                    f"malformed corpus record at line {lineno}: missing doc_id"
                )
            doc_id = str(record["doc_id"])
            if "sentences" in record:
                sentences = record["sentences"]
                if not isinstance(sentences, list):
                    raise MalformedRecordError(
                        f"malformed corpus record at line {lineno}: "
                        "sentences must be a list"
                    )
                handle.add_document(doc_id, text=record.get("text"),
                                    sentences=[str(s) for s in sentences])
            elif "text" in record:
                handle.add_document(doc_id, text=str(record["text"]))
            else:
                raise MalformedRecordError(
                    f"malformed corpus record at line {lineno}: "
                    "need text or sentences"
                )
    return handle


def ingest_event_annotations(path: str | Path, corpus: CorpusHandle) -> int:
    """Attach event features from a sidecar annotation file.

    Records look like {"sentence_id", "trigger", "agent", "patient"} with
    null for a missing role. Re-ingesting replaces whatever annotations the
    named sentences carried before. Returns the number of distinct
    sentences annotated.
    """
    path = Path(path)
    touched: set[str] = set()
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedRecordError(
                    f"malformed annotation record at line {lineno}: {exc.msg}"
                ) from None
            if not isinstance(record, dict) or "sentence_id" not in record \
                    or "trigger" not in record:
                raise MalformedRecordError(
                    f"malformed annotation record at line {lineno}: "
                    "need sentence_id and trigger"
                )
            sid = str(record["sentence_id"])
            sentence = corpus.sentence(sid)  # raises UnknownSentenceError
            if sid not in touched:
                sentence.event_features = []
                touched.add(sid)
            trigger = normalize_term(str(record["trigger"]), corpus.config)
            for role in EVENT_ROLES:
                argument = record.get(role)
                if argument is None:
                    continue
                sentence.event_features.append(
                    EventFeature(
                        trigger=trigger,
                        role=role,
                        argument=normalize_term(str(argument), corpus.config),
                    )
                )
    return len(touched)


class InvertedIndex:
    """Postings and collection statistics at document and sentence
    granularity, plus the parallel structures for the event-feature
    vocabulary. Immutable once built; share freely across threads.
    """

    def __init__(self, corpus: CorpusHandle):
        self._corpus = corpus
        self.doc_lengths: dict[str, int] = {}
        self.sentence_lengths: dict[str, int] = {}
        self.collection_term_counts: Counter[str] = Counter()
        self.total_tokens = 0

        self._doc_postings: dict[str, dict[str, int]] = {}
        self._sent_postings: dict[str, dict[str, int]] = {}

        self.feature_doc_lengths: dict[str, int] = {}
        self.feature_sentence_lengths: dict[str, int] = {}
        self.feature_term_counts: Counter[str] = Counter()
        self.feature_total = 0
        self._feature_doc_postings: dict[str, dict[str, int]] = {}
        self._feature_sent_postings: dict[str, dict[str, int]] = {}

        for doc_id, doc in corpus.documents.items():
            self.doc_lengths[doc_id] = 0
            self.feature_doc_lengths[doc_id] = 0
            for sid in doc.sentence_ids:
                sentence = corpus.sentences[sid]
                counts = Counter(sentence.tokens)
                self.sentence_lengths[sid] = len(sentence.tokens)
                self.doc_lengths[doc_id] += len(sentence.tokens)
                self.total_tokens += len(sentence.tokens)
                for term, tf in counts.items():
                    self._sent_postings.setdefault(term, {})[sid] = tf
                    doc_map = self._doc_postings.setdefault(term, {})
                    doc_map[doc_id] = doc_map.get(doc_id, 0) + tf
                    self.collection_term_counts[term] += tf

                fcounts = Counter(sentence.feature_terms())
                flen = sum(fcounts.values())
                self.feature_sentence_lengths[sid] = flen
                self.feature_doc_lengths[doc_id] += flen
                self.feature_total += flen
                for fterm, tf in fcounts.items():
                    self._feature_sent_postings.setdefault(fterm, {})[sid] = tf
                    fdoc = self._feature_doc_postings.setdefault(fterm, {})
                    fdoc[doc_id] = fdoc.get(doc_id, 0) + tf
                    self.feature_term_counts[fterm] += tf

    # -- postings accessors ---------------------------------------------------

    def postings(self, term: str) -> list[tuple[str, int]]:
        """Document postings for a term, sorted by doc_id. Unknown terms
        yield an empty list."""
        return sorted(self._doc_postings.get(term, {}).items())

    def sentence_postings(self, term: str) -> list[str]:
        return sorted(self._sent_postings.get(term, {}))

    # -- scoring accessors ---------------------------------------------------

    def candidates(self, term: str, target: str) -> dict[str, int]:
        """Mutable-looking view; callers must not modify it."""
        table = self._doc_postings if target == "documents" else self._sent_postings
        return table.get(term, {})

    def feature_candidates(self, term: str, target: str) -> dict[str, int]:
        table = (self._feature_doc_postings if target == "documents"
                 else self._feature_sent_postings)
        return table.get(term, {})

    def term_frequency(self, term: str, item_id: str, target: str) -> int:
        return self.candidates(term, target).get(item_id, 0)

    def feature_frequency(self, term: str, item_id: str, target: str) -> int:
        return self.feature_candidates(term, target).get(item_id, 0)

    def length(self, item_id: str, target: str) -> int:
        table = self.doc_lengths if target == "documents" else self.sentence_lengths
        try:
            return table[item_id]
        except KeyError:
            from .errors import UnknownItemError

            raise UnknownItemError(f"unknown item_id {item_id}") from None

    def feature_length(self, item_id: str, target: str) -> int:
        table = (self.feature_doc_lengths if target == "documents"
                 else self.feature_sentence_lengths)
        return table.get(item_id, 0)

    def item_ids(self, target: str) -> list[str]:
        if target == "documents":
            return list(self.doc_lengths)
        return list(self.sentence_lengths)

    def has_item(self, item_id: str, target: str) -> bool:
        table = self.doc_lengths if target == "documents" else self.sentence_lengths
        return item_id in table

    @property
    def corpus(self) -> CorpusHandle:
        return self._corpus

    @property
    def num_documents(self) -> int:
        return len(self.doc_lengths)

    @property
    def vocabulary_size(self) -> int:
        return len(self.collection_term_counts)


def build_index(corpus: CorpusHandle) -> InvertedIndex:
    return InvertedIndex(corpus)


# -- persistence --------------------------------------------------------------


def save_corpus(corpus: CorpusHandle, directory: str | Path) -> None:
    """Persist to a directory: meta.json carries the magic header and
    format version; sentence and document stores are line-delimited JSON.
    Postings are rebuilt deterministically on load."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    meta = {
        "magic": INDEX_MAGIC,
        "format_version": INDEX_FORMAT_VERSION,
        "counts": corpus.counts(),
        "config": corpus.config.to_dict(),
    }
    (directory / "meta.json").write_text(
        json.dumps(meta, sort_keys=True, indent=2), encoding="utf-8"
    )
    with (directory / "documents.jsonl").open("w", encoding="utf-8") as fh:
        for doc in corpus.documents.values():
            fh.write(json.dumps({"doc_id": doc.doc_id, "raw_text": doc.raw_text},
                                ensure_ascii=False) + "\n")
    with (directory / "sentences.jsonl").open("w", encoding="utf-8") as fh:
        for s in corpus.sentences.values():
            row = {
                "sentence_id": s.sentence_id,
                "doc_id": s.doc_id,
                "position": s.position,
                "text": s.text,
                "tokens": s.tokens,
                "events": [[f.trigger, f.role, f.argument] for f in s.event_features],
            }
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")


def load_corpus(directory: str | Path) -> CorpusHandle:
    directory = Path(directory)
    meta_path = directory / "meta.json"
    if not meta_path.exists():
        raise StorageError(f"no index at {directory}: meta.json missing")
    meta = json.loads(meta_path.read_text(encoding="utf-8"))
    if meta.get("magic") != INDEX_MAGIC:
        raise StorageError(f"not a queryforge index: bad magic in {meta_path}")
    if meta.get("format_version") != INDEX_FORMAT_VERSION:
        raise StorageError(
            f"unsupported index format version {meta.get('format_version')}"
        )
    handle = CorpusHandle(IngestConfig.from_dict(meta.get("config", {})))
    with (directory / "documents.jsonl").open("r", encoding="utf-8") as fh:
        for line in fh:
            row = json.loads(line)
            handle.documents[row["doc_id"]] = Document(
                doc_id=row["doc_id"], raw_text=row["raw_text"], sentence_ids=[]
            )
    with (directory / "sentences.jsonl").open("r", encoding="utf-8") as fh:
        for line in fh:
            row = json.loads(line)
            record = SentenceRecord(
                sentence_id=row["sentence_id"],
                doc_id=row["doc_id"],
                position=row["position"],
                text=row["text"],
                tokens=list(row["tokens"]),
                event_features=[
                    EventFeature(trigger=t, role=r, argument=a)
                    for t, r, a in row.get("events", [])
                ],
            )
            handle.sentences[record.sentence_id] = record
            handle.documents[record.doc_id].sentence_ids.append(record.sentence_id)
    for doc in handle.documents.values():
        doc.sentence_ids.sort(key=lambda sid: handle.sentences[sid].position)
    return handle
