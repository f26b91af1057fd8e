"""Operator command line: build and embed indexes, run batch retrieval and
enrichment, evaluate and compare runs, replay the simulated-user experiment,
export session queries, and serve the HTTP API.

Results go to stdout (trec format where applicable), diagnostics to stderr.
Exit codes: 0 success, 1 failure with a diagnostic, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import AppConfig, build_engine, build_provider, load_config
from .corpus import (
    IngestConfig,
    build_index,
    ingest_corpus,
    ingest_event_annotations,
    load_corpus,
    save_corpus,
    tokenize,
)
from .errors import ConfigError, QueryForgeError
from .evaluation import (
    SimulationConfig,
    compare_runs,
    evaluate_run,
    experiment_to_json,
    format_run,
    load_qrels,
    load_run,
    render_comparison,
    render_experiment,
    simulated_user_experiment,
)
from .retrieval import RankedList, WeightedQuery
from .session import SessionManager, SessionStore, dump_export


def _config_from_args(args) -> AppConfig:
    config = load_config(getattr(args, "config", None))
    for attr, key in (("index", "index_dir"), ("sessions", "session_dir"),
                      ("translation", "translation_table"),
                      ("alpha", "alpha"), ("port", "port"), ("host", "host")):
        value = getattr(args, attr, None)
        if value is not None:
            setattr(config, key, value)
    return config


def cmd_index_build(args) -> int:
    ingest_config = IngestConfig(remove_stopwords=args.stopwords, stem=args.stem)
    corpus = ingest_corpus(args.corpus, ingest_config)
    if args.events:
        annotated = ingest_event_annotations(args.events, corpus)
        print(f"annotated sentences: {annotated}", file=sys.stderr)
    save_corpus(corpus, args.out)
    index = build_index(corpus)
    counts = corpus.counts()
    print(json.dumps({
        "index_dir": str(args.out),
        "documents": counts["documents"],
        "sentences": counts["sentences"],
        "tokens": counts["tokens"],
        "vocabulary": index.vocabulary_size,
    }, indent=2))
    return 0


def cmd_embed_build(args) -> int:
    from .semantic import build_vector_index

    config = _config_from_args(args)
    config.index_dir = args.index
    if args.dim is not None:
        config.embedding_dim = args.dim
    corpus = load_corpus(args.index)
    provider = build_provider(config)
    vectors = build_vector_index(provider, corpus)
    vectors.save(args.index)
    print(json.dumps({
        "index_dir": str(args.index),
        "sentences": len(vectors),
        "dim": vectors.dim,
        "provider": provider.name,
    }, indent=2))
    return 0


def _load_query(args, corpus) -> WeightedQuery:
    if getattr(args, "query_file", None):
        record = json.loads(Path(args.query_file).read_text(encoding="utf-8"))
        if "query" in record:  # session export file
            record = record["query"]
        return WeightedQuery.from_record(record)
    tokens = tokenize(args.query, corpus.config)
    if not tokens:
        raise ConfigError("query has no tokens")
    terms: dict[str, float] = {}
    for token in tokens:
        terms[token] = terms.get(token, 0.0) + 1.0
    return WeightedQuery(terms=terms, provenance="cli")


def _print_trec(ranked: RankedList, query_id: str, label: str) -> None:
    for rank, (item_id, score) in enumerate(ranked.items, start=1):
        print(f"{query_id} Q0 {item_id} {rank} {score:.6f} {label}")


def cmd_search(args) -> int:
    config = _config_from_args(args)
    config.index_dir = args.index
    engine = build_engine(config, need_vectors=False)
    query = _load_query(args, engine.corpus)
    ranked = engine.search(query, target=args.target, k=args.k)
    _print_trec(ranked, args.query_id, args.run_label)
    return 0


def cmd_enrich(args) -> int:
    config = _config_from_args(args)
    config.index_dir = args.index
    engine = build_engine(config, need_vectors=True)
    ids = [s for s in args.ids.split(",") if s]
    examples = [engine.corpus.sentence(sid) for sid in ids]
    exclude = set(ids) if args.exclude_examples else set()
    ranked = engine.enrich(examples, k=args.k, exclude=exclude)
    _print_trec(ranked, args.query_id, args.run_label)
    return 0


def cmd_eval(args) -> int:
    run = load_run(args.run)
    qrels = load_qrels(args.qrels)
    result = evaluate_run(run, qrels, k=args.k, skip_empty=args.skip_empty)
    for warning in result["warnings"]:
        print(f"warning: {warning}", file=sys.stderr)
    for qid in sorted(result["per_query"]):
        print(f"{qid}\tnDCG@{args.k}\t{result['per_query'][qid]:.4f}")
    print(f"mean\tnDCG@{args.k}\t{result['mean']:.4f}")
    if args.json:
        Path(args.json).write_text(json.dumps(result, sort_keys=True, indent=2),
                                   encoding="utf-8")
    return 0


def cmd_compare(args) -> int:
    runs = [load_run(path) for path in args.runs]
    qrels_sets = {}
    for spec in args.qrels:
        if "=" in spec:
            label, path = spec.split("=", 1)
        else:
            label, path = "default", spec
        qrels_sets[label] = load_qrels(path)
    qrels = qrels_sets if len(qrels_sets) > 1 else next(iter(qrels_sets.values()))
    result = compare_runs(runs, qrels, k=args.k, skip_empty=args.skip_empty)
    print(render_comparison(result))
    if args.json:
        Path(args.json).write_text(json.dumps(result, sort_keys=True, indent=2),
                                   encoding="utf-8")
    return 0


def cmd_simulate(args) -> int:
    cfg = SimulationConfig(
        seed=args.seed,
        num_docs=args.docs,
        num_topics=args.topics,
        relevant_per_topic=args.relevant,
        feedback_rounds=args.rounds,
        k_eval=args.k,
    )
    report = simulated_user_experiment(cfg)
    print(render_experiment(report))
    if args.out:
        Path(args.out).write_text(experiment_to_json(report), encoding="utf-8")
        print(f"report written to {args.out}", file=sys.stderr)
    return 0


def cmd_export_query(args) -> int:
    config = _config_from_args(args)
    config.index_dir = args.index
    engine = build_engine(config, need_vectors=False)
    store = SessionStore(args.sessions)
    manager = SessionManager(engine, store)
    _, record = manager.export_query(args.session_id)
    payload = dump_export(record)
    if args.out:
        Path(args.out).write_text(payload, encoding="utf-8")
        print(f"export written to {args.out}", file=sys.stderr)
    else:
        print(payload)
    return 0


def cmd_serve(args) -> int:
    from .server import serve

    config = _config_from_args(args)
    serve(config)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="queryforge",
        description="Interactive query development over a sentence corpus.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    index = sub.add_parser("index", help="corpus index operations")
    index_sub = index.add_subparsers(dest="index_command", required=True)
    build = index_sub.add_parser("build", help="ingest a corpus file")
    build.add_argument("--corpus", required=True, help="line-delimited corpus file")
    build.add_argument("--out", required=True, help="index output directory")
    build.add_argument("--events", help="event annotation sidecar file")
    build.add_argument("--stopwords", action="store_true",
                       help="drop stopwords at tokenization")
    build.add_argument("--stem", action="store_true",
                       help="apply the conservative suffix stripper")
    build.set_defaults(handler=cmd_index_build)

    embed = sub.add_parser("embed", help="vector index operations")
    embed_sub = embed.add_subparsers(dest="embed_command", required=True)
    embed_build = embed_sub.add_parser("build", help="embed every sentence")
    embed_build.add_argument("--index", required=True)
    embed_build.add_argument("--config")
    embed_build.add_argument("--dim", type=int)
    embed_build.set_defaults(handler=cmd_embed_build)

    search = sub.add_parser("search", help="batch retrieval (trec output)")
    search.add_argument("--index", required=True)
    search.add_argument("--query", default="", help="query text")
    search.add_argument("--query-file", help="weighted-query export file")
    search.add_argument("--k", type=int, default=10)
    search.add_argument("--target", choices=["documents", "sentences"],
                        default="documents")
    search.add_argument("--alpha", type=float)
    search.add_argument("--translation", help="translation table tsv")
    search.add_argument("--query-id", default="q1")
    search.add_argument("--run-label", default="queryforge")
    search.add_argument("--config")
    search.set_defaults(handler=cmd_search)

    enrich = sub.add_parser("enrich",
                            help="query-by-example from sentence ids")
    enrich.add_argument("--index", required=True)
    enrich.add_argument("--ids", required=True,
                        help="comma-separated sentence ids")
    enrich.add_argument("--k", type=int, default=10)
    enrich.add_argument("--exclude-examples", action="store_true",
                        help="omit the example ids from results")
    enrich.add_argument("--query-id", default="q1")
    enrich.add_argument("--run-label", default="queryforge-enrich")
    enrich.add_argument("--config")
    enrich.set_defaults(handler=cmd_enrich)

    evaluate = sub.add_parser("eval", help="nDCG over a trec run")
    evaluate.add_argument("--run", required=True)
    evaluate.add_argument("--qrels", required=True)
    evaluate.add_argument("--k", type=int, default=20)
    evaluate.add_argument("--skip-empty", action="store_true")
    evaluate.add_argument("--json", help="write machine-readable result here")
    evaluate.set_defaults(handler=cmd_eval)

    compare = sub.add_parser("compare", help="compare runs against a baseline")
    compare.add_argument("--runs", nargs="+", required=True)
    compare.add_argument("--qrels", nargs="+", required=True,
                         help="path or label=path, repeatable")
    compare.add_argument("--k", type=int, default=20)
    compare.add_argument("--skip-empty", action="store_true")
    compare.add_argument("--json")
    compare.set_defaults(handler=cmd_compare)

    simulate = sub.add_parser("simulate",
                              help="seeded end-to-end feedback experiment")
    simulate.add_argument("--seed", type=int, default=7)
    simulate.add_argument("--docs", type=int, default=200)
    simulate.add_argument("--topics", type=int, default=5)
    simulate.add_argument("--relevant", type=int, default=10)
    simulate.add_argument("--rounds", type=int, default=1)
    simulate.add_argument("--k", type=int, default=20)
    simulate.add_argument("--out", help="write the JSON report here")
    simulate.set_defaults(handler=cmd_simulate)

    export = sub.add_parser("export-query", help="export a session's query")
    export.add_argument("--index", required=True)
    export.add_argument("--sessions", required=True)
    export.add_argument("--session-id", required=True)
    export.add_argument("--out")
    export.add_argument("--config")
    export.set_defaults(handler=cmd_export_query)

    serve = sub.add_parser("serve", help="run the HTTP API")
    serve.add_argument("--config")
    serve.add_argument("--index")
    serve.add_argument("--sessions")
    serve.add_argument("--translation")
    serve.add_argument("--host")
    serve.add_argument("--port", type=int)
    serve.set_defaults(handler=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "alpha", None) is not None and not (0.0 < args.alpha <= 1.0):
        print("error: alpha must be in (0, 1]", file=sys.stderr)
        return 2
    try:
        return args.handler(args)
    except QueryForgeError as exc:
        print(f"error: {exc.message}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
