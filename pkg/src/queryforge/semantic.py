"""Embedding-based sentence retrieval for query-by-example enrichment.

Sentences are embedded once by a pluggable provider into unit-norm vectors
and held in an exact cosine-similarity index. A query is the normalized
centroid of one or more example sentences; retrieval is a full scan (the
reference path any accelerated index must agree with at test scale).

Providers:
  * deterministic-hash — signed hashed bag-of-tokens; no model downloads,
    fully reproducible, adequate for tests and demos.
  * precomputed-file   — vectors computed offline keyed by sentence id.
  * remote-service     — HTTP batch encoder: {"texts": [...]} in,
    {"vectors": [[...]]} out, same order.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .corpus import CorpusHandle, SentenceRecord, tokenize
from .errors import (
    DimensionMismatchError,
    NoExamplesError,
    ProviderError,
    StorageError,
)
from .retrieval import RankedList

VECTOR_MAGIC = "queryforge-vectors"
VECTOR_FORMAT_VERSION = 1

DEFAULT_DIM = 256


def _normalize(vector: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(vector))
    if norm > 0.0:
        return vector / norm
    return vector


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Dot product of two unit vectors; symmetric, in [-1, 1]."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatchError(
            f"dimension mismatch: {a.shape} vs {b.shape}"
        )
    return float(np.dot(a, b))


class EmbeddingProvider:
    """Contract: embed(text) returns an L2-normalized vector of fixed dim,
    deterministic for the non-remote modes."""

    name = "base"
    mode = "abstract"

    def __init__(self, dim: int):
        self.dim = dim

    def embed(self, text: str) -> np.ndarray:
        raise NotImplementedError

    def embed_batch(self, texts: list[str]) -> np.ndarray:
        return np.stack([self.embed(t) for t in texts]) if texts else \
            np.zeros((0, self.dim))


class HashingProvider(EmbeddingProvider):
    """Signed feature hashing of the token bag with a fixed seed.

    Each token maps to a (bucket, sign) pair via a keyed blake2b digest;
    counts accumulate and the result is L2-normalized. Texts with no
    tokens fall back to a one-hot vector derived from the raw text so the
    unit-norm postcondition always holds.
    """

    name = "deterministic-hash"
    mode = "deterministic-hash"

    def __init__(self, dim: int = DEFAULT_DIM, seed: int = 13):
        super().__init__(dim)
        self.seed = seed
        self._key = seed.to_bytes(8, "little", signed=False)
        self._token_cache: dict[str, tuple[int, float]] = {}

    def _slot(self, token: str) -> tuple[int, float]:
        cached = self._token_cache.get(token)
        if cached is None:
            digest = hashlib.blake2b(token.encode("utf-8"), key=self._key,
                                     digest_size=9).digest()
            bucket = int.from_bytes(digest[:8], "little") % self.dim
            sign = 1.0 if digest[8] & 1 else -1.0
            cached = (bucket, sign)
            self._token_cache[token] = cached
        return cached

    def embed(self, text: str) -> np.ndarray:
        vector = np.zeros(self.dim, dtype=np.float64)
        for token in tokenize(text):
            bucket, sign = self._slot(token)
            vector[bucket] += sign
        norm = float(np.linalg.norm(vector))
        if norm == 0.0:
            digest = hashlib.blake2b(text.encode("utf-8"), key=self._key,
                                     digest_size=8).digest()
            vector[int.from_bytes(digest, "little") % self.dim] = 1.0
            return vector
        return vector / norm


class PrecomputedProvider(EmbeddingProvider):
    """Embeddings computed offline, one JSON record per line:
    {"sentence_id": ..., "vector": [...]}. Normalized on load if needed."""

    name = "precomputed-file"
    mode = "precomputed-file"

    def __init__(self, path: str | Path):
        self.path = Path(path)
        vectors: dict[str, np.ndarray] = {}
        dim: int | None = None
        with self.path.open("r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                row = json.loads(line)
                vec = np.asarray(row["vector"], dtype=np.float64)
                if dim is None:
                    dim = vec.shape[0]
                elif vec.shape[0] != dim:
                    raise DimensionMismatchError(
                        f"vector at line {lineno} has dim {vec.shape[0]}, "
                        f"expected {dim}"
                    )
                vectors[str(row["sentence_id"])] = _normalize(vec)
        super().__init__(dim or 0)
        self.vectors = vectors

    def embed_by_id(self, sentence_id: str) -> np.ndarray:
        try:
            return self.vectors[sentence_id]
        except KeyError:
            raise ProviderError(
                f"no precomputed embedding for sentence_id {sentence_id}"
            ) from None

    def embed(self, text: str) -> np.ndarray:
        raise ProviderError(
            "precomputed-file provider embeds by sentence_id, not by text"
        )


class RemoteProvider(EmbeddingProvider):
    """Batch HTTP encoder. POST {"texts": [...]} to the endpoint; expect
    {"vectors": [[...], ...]} in the same order."""

    name = "remote-service"
    mode = "remote-service"

    def __init__(self, endpoint: str, dim: int, timeout: float = 10.0,
                 batch_size: int = 64):
        super().__init__(dim)
        self.endpoint = endpoint
        self.timeout = timeout
        self.batch_size = batch_size

    def _post(self, texts: list[str]) -> list[list[float]]:
        import httpx

        try:
            response = httpx.post(self.endpoint, json={"texts": texts},
                                  timeout=self.timeout)
            response.raise_for_status()
        except httpx.HTTPError as exc:
            raise ProviderError(
                f"embedding service at {self.endpoint} unreachable ({exc}); "
                "check the endpoint and retry"
            ) from None
        payload = response.json()
        vectors = payload.get("vectors")
        if not isinstance(vectors, list) or len(vectors) != len(texts):
            raise ProviderError(
                f"embedding service returned {0 if not vectors else len(vectors)} "
                f"vectors for {len(texts)} texts"
            )
        return vectors

    def embed(self, text: str) -> np.ndarray:
        return self.embed_batch([text])[0]

    def embed_batch(self, texts: list[str]) -> np.ndarray:
        if not texts:
            return np.zeros((0, self.dim))
        rows: list[np.ndarray] = []
        for start in range(0, len(texts), self.batch_size):
            for raw in self._post(texts[start : start + self.batch_size]):
                vec = np.asarray(raw, dtype=np.float64)
                if vec.shape[0] != self.dim:
                    raise DimensionMismatchError(
                        f"service returned dim {vec.shape[0]}, expected {self.dim}"
                    )
                rows.append(_normalize(vec))
        return np.stack(rows)


def embed_sentence(provider: EmbeddingProvider, text: str) -> np.ndarray:
    """Embed one sentence and enforce the unit-norm postcondition."""
    vector = np.asarray(provider.embed(text), dtype=np.float64)
    if vector.shape != (provider.dim,):
        raise DimensionMismatchError(
            f"provider {provider.name} returned shape {vector.shape}, "
            f"expected ({provider.dim},)"
        )
    return _normalize(vector)


class VectorIndex:
    """sentence_id -> unit vector, stored as one dense matrix for fast
    exact scans. Immutable after construction."""

    def __init__(self, sentence_ids: list[str], matrix: np.ndarray):
        if matrix.ndim != 2 or matrix.shape[0] != len(sentence_ids):
            raise DimensionMismatchError("matrix rows must match sentence ids")
        self.sentence_ids = list(sentence_ids)
        self.matrix = matrix
        self._row: dict[str, int] = {sid: i for i, sid in enumerate(sentence_ids)}
        self._ids_array = np.array(self.sentence_ids, dtype=object)

    @property
    def dim(self) -> int:
        return self.matrix.shape[1] if self.matrix.size else 0

    def __len__(self) -> int:
        return len(self.sentence_ids)

    def __contains__(self, sentence_id: str) -> bool:
        return sentence_id in self._row

    def vector(self, sentence_id: str) -> np.ndarray:
        return self.matrix[self._row[sentence_id]]

    def save(self, directory: str | Path) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        meta = {
            "magic": VECTOR_MAGIC,
            "format_version": VECTOR_FORMAT_VERSION,
            "dim": self.dim,
            "count": len(self),
        }
        (directory / "vectors_meta.json").write_text(
            json.dumps(meta, sort_keys=True), encoding="utf-8"
        )
        (directory / "vector_ids.json").write_text(
            json.dumps(self.sentence_ids), encoding="utf-8"
        )
        np.save(directory / "vectors.npy", self.matrix)

    @classmethod
    def load(cls, directory: str | Path) -> "VectorIndex":
        directory = Path(directory)
        meta_path = directory / "vectors_meta.json"
        if not meta_path.exists():
            raise StorageError(f"no vector index at {directory}")
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
        if meta.get("magic") != VECTOR_MAGIC:
            raise StorageError(f"not a queryforge vector index: {directory}")
        if meta.get("format_version") != VECTOR_FORMAT_VERSION:
            raise StorageError(
                f"unsupported vector format version {meta.get('format_version')}"
            )
        ids = json.loads((directory / "vector_ids.json").read_text(encoding="utf-8"))
        matrix = np.load(directory / "vectors.npy")
        return cls(ids, matrix)


def build_vector_index(provider: EmbeddingProvider,
                       corpus: CorpusHandle) -> VectorIndex:
    """Embed every sentence of the corpus. Provider failures surface with
    the sentence id that broke the build."""
    sentence_ids = list(corpus.sentences)
    if not sentence_ids:
        return VectorIndex([], np.zeros((0, provider.dim)))
    if isinstance(provider, PrecomputedProvider):
        rows = [provider.embed_by_id(sid) for sid in sentence_ids]
        return VectorIndex(sentence_ids, np.stack(rows))
    texts = [corpus.sentences[sid].text for sid in sentence_ids]
    try:
        matrix = provider.embed_batch(texts)
    except ProviderError:
        # retry one-by-one to name the failing sentence
        rows = []
        for sid, text in zip(sentence_ids, texts):
            try:
                rows.append(embed_sentence(provider, text))
            except ProviderError as exc:
                raise ProviderError(
                    f"embedding failed at sentence_id {sid}: {exc.message}"
                ) from None
        matrix = np.stack(rows)
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    return VectorIndex(sentence_ids, matrix / norms)


def centroid_vector(vectors: list[np.ndarray]) -> np.ndarray:
    """L2-normalized mean; order-independent by construction."""
    stacked = np.stack(vectors)
    centroid = stacked.mean(axis=0)
    return _normalize(centroid)


def query_by_example(examples: list[SentenceRecord], index: VectorIndex,
                     provider: EmbeddingProvider, k: int,
                     exclude: set[str] | frozenset[str] = frozenset()) -> RankedList:
    """Top-k sentences by cosine against the examples' normalized centroid.

    Indexed examples reuse their stored vectors; anything else is embedded
    on the fly. Ids in `exclude` never appear in the result; ties break by
    ascending sentence id.
    """
    if not examples:
        raise NoExamplesError("no example sentences selected")
    if k < 1:
        raise NoExamplesError("k must be >= 1")
    vectors = []
    for record in examples:
        if record.sentence_id in index:
            vectors.append(index.vector(record.sentence_id))
        else:
            vectors.append(embed_sentence(provider, record.text))
    query = centroid_vector(vectors)
    if len(index) == 0:
        return RankedList(items=[], provenance="query-by-example")
    if query.shape[0] != index.dim:
        raise DimensionMismatchError(
            f"query dim {query.shape[0]} != index dim {index.dim}"
        )
    # Quantize similarities so rank order (id tie-break included) is stable
    # across BLAS summation orders; 1e-9 is far above float64 reduction
    # noise and far below any meaningful similarity gap.
    scores = np.round(index.matrix @ query, 9)
    # primary key: score descending; secondary: sentence id ascending
    order = np.lexsort((index._ids_array, -scores))
    items: list[tuple[str, float]] = []
    for row in order:
        sid = index.sentence_ids[int(row)]
        if sid in exclude:
            continue
        items.append((sid, float(scores[int(row)])))
        if len(items) == k:
            break
    return RankedList(items=items, provenance="query-by-example")
