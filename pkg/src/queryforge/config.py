"""Single configuration surface shared by the CLI and the server: a JSON
config file with environment-variable overrides (QUERYFORGE_<FIELD>),
plus the factory that assembles a SearchEngine from configured paths."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, fields
from pathlib import Path

from .corpus import load_corpus
from .engine import SearchEngine
from .errors import ConfigError
from .retrieval import DEFAULT_FIELD_WEIGHTS, TranslationTable, load_translation_table
from .semantic import (
    DEFAULT_DIM,
    HashingProvider,
    PrecomputedProvider,
    RemoteProvider,
    VectorIndex,
)

ENV_PREFIX = "QUERYFORGE_"


@dataclass
class AppConfig:
    index_dir: str | None = None
    session_dir: str | None = None
    translation_table: str | None = None

    provider: str = "hash"  # hash | precomputed | remote
    embeddings_file: str | None = None
    remote_endpoint: str | None = None
    remote_timeout: float = 10.0
    embedding_dim: int = DEFAULT_DIM
    embedding_seed: int = 13

    alpha: float = 0.9
    theta: dict[str, float] = field(
        default_factory=lambda: dict(DEFAULT_FIELD_WEIGHTS))
    search_k: int = 20
    enrich_k: int = 10
    first_pass_k_documents: int = 1000
    first_pass_k_sentences: int = 200
    second_pass_depth: int = 100

    host: str = "127.0.0.1"
    port: int = 8080
    cors_origin: str = "*"
    ui_dir: str | None = None


def load_config(path: str | Path | None = None,
                env: dict[str, str] | None = None) -> AppConfig:
    """Config file first, then QUERYFORGE_* environment overrides for the
    scalar fields."""
    env = os.environ if env is None else env
    data: dict = {}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc.msg}")
    config = AppConfig()
    for f in fields(AppConfig):
        if f.name in data:
            value = data[f.name]
            if f.name == "theta":
                value = {str(k): float(v) for k, v in value.items()}
            setattr(config, f.name, value)
        env_key = ENV_PREFIX + f.name.upper()
        if env_key in env and f.name != "theta":
            raw = env[env_key]
            current = getattr(config, f.name)
            try:
                if f.type in ("int", int) or isinstance(current, int) and not isinstance(current, bool):
                    setattr(config, f.name, int(raw))
                elif f.type in ("float", float) or isinstance(current, float):
                    setattr(config, f.name, float(raw))
                else:
                    setattr(config, f.name, raw)
            except ValueError:
                raise ConfigError(
                    f"bad value for {env_key}: {raw!r}") from None
    return config


def build_provider(config: AppConfig):
    if config.provider == "hash":
        return HashingProvider(dim=config.embedding_dim,
                               seed=config.embedding_seed)
    if config.provider == "precomputed":
        if not config.embeddings_file:
            raise ConfigError("provider=precomputed requires embeddings_file")
        return PrecomputedProvider(config.embeddings_file)
    if config.provider == "remote":
        if not config.remote_endpoint:
            raise ConfigError("provider=remote requires remote_endpoint")
        return RemoteProvider(config.remote_endpoint, dim=config.embedding_dim,
                              timeout=config.remote_timeout)
    raise ConfigError(f"unknown provider {config.provider!r}")


def build_engine(config: AppConfig, need_vectors: bool = True) -> SearchEngine:
    """Load the persisted corpus and assemble the retrieval state. A vector
    index persisted next to the corpus is preferred; otherwise one is built
    in memory when needed."""
    if not config.index_dir:
        raise ConfigError("index_dir is not configured")
    corpus = load_corpus(config.index_dir)
    translation = (load_translation_table(config.translation_table)
                   if config.translation_table else TranslationTable.identity())
    provider = build_provider(config)
    vectors = None
    vector_path = Path(config.index_dir) / "vectors_meta.json"
    if vector_path.exists():
        vectors = VectorIndex.load(config.index_dir)
    engine = SearchEngine.from_corpus(
        corpus,
        alpha=config.alpha,
        translation=translation,
        provider=provider,
        vectors=vectors,
        build_vectors=need_vectors and vectors is None,
        first_pass_k_documents=config.first_pass_k_documents,
        first_pass_k_sentences=config.first_pass_k_sentences,
        second_pass_depth=config.second_pass_depth,
    )
    return engine
