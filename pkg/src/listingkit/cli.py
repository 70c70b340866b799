"""Command-line entry points: ingest, index, dataset, eval, fixtures, serve."""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .attributes import ExtractionLexicon, RuleBasedExtractor
from .catalog import CatalogStore, Taxonomy, ingest_catalog
from .dataset import (
    CleaningConfig,
    DatasetMix,
    build_instruction_dataset,
    clean_corpus,
)
from .embedding import DEFAULT_DIMENSION, HashingEmbedder
from .evaluation.ablation import run_ablation
from .evaluation.benchmark import EvalReport, load_samples_jsonl, run_benchmark
from .evaluation.metrics import (
    MetricScore,
    RougeVariant,
    corpus_bleu,
    rouge,
    sim,
)
from .fixtures import export_fixture_files, make_fixture
from .prompts import Variant, write_chatml_jsonl
from .retrieval import MatchThresholds, build_index, load_index, save_index, search
from .tokenization import tokenize


def _load_store(args) -> CatalogStore:
    store = CatalogStore(getattr(args, "store", ":memory:") or ":memory:", dimension=args.dimension)
    if getattr(args, "taxonomy", None):
        store.load_taxonomy(Taxonomy.from_file(args.taxonomy))
    if getattr(args, "catalog", None):
        stats = ingest_catalog(args.catalog, store)
        print(f"ingested: accepted={stats.accepted} rejected={stats.rejected}", file=sys.stderr)
    return store


def cmd_ingest(args) -> int:
    store = CatalogStore(args.store, dimension=args.dimension)
    if args.taxonomy:
        store.load_taxonomy(Taxonomy.from_file(args.taxonomy))
    stats = ingest_catalog(args.catalog, store)
    print(
        json.dumps(
            {
                "accepted": stats.accepted,
                "rejected": stats.rejected,
                "per_category": stats.per_category,
                "rejected_lines": stats.rejected_lines,
            },
            indent=2,
        )
    )
    return 0


def cmd_index_build(args) -> int:
    store = _load_store(args)
    index = build_index(store.iter_products(), args.dimension)
    save_index(index, args.out)
    print(f"wrote index of {len(index)} entries to {args.out}")
    return 0


def cmd_index_search(args) -> int:
    index = load_index(args.index)
    thresholds = MatchThresholds(args.tau_identical, args.tau_similar)
    with open(args.query_file, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            doc = json.loads(line)
            results = search(
                index, np.asarray(doc["embedding"], dtype=np.float32), args.k, thresholds
            )
            print(
                json.dumps(
                    {
                        "query_id": doc.get("query_id", ""),
                        "results": [
                            {
                                "product_id": r.product_id,
                                "score": r.score,
                                "match_level": r.match_level.value,
                            }
                            for r in results
                        ],
                    }
                )
            )
    return 0


def cmd_dataset_clean(args) -> int:
    store = _load_store(args)
    config = CleaningConfig(**json.load(open(args.config))) if args.config else CleaningConfig()
    accepted, report = clean_corpus(list(store.iter_products()), config, seed=args.seed)
    with open(args.out, "w", encoding="utf-8") as fh:
        for record in accepted:
            fh.write(json.dumps(record.to_doc(), ensure_ascii=False) + "\n")
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            json.dump(report.to_doc(), fh, indent=2)
    print(f"accepted {report.accepted} of {report.input_count}")
    return 0


def cmd_dataset_build(args) -> int:
    store = _load_store(args)
    lexicon = ExtractionLexicon.from_file(args.lexicon)
    fractions = [float(x) for x in args.mix.split(",")]
    if len(fractions) != 3:
        raise SystemExit("--mix needs three comma-separated fractions")
    mix = DatasetMix(
        variants={
            Variant.IMAGE_ONLY: fractions[0],
            Variant.IMAGE_TEMPLATE: fractions[1],
            Variant.IMAGE_TEMPLATE_REFERENCE: fractions[2],
        }
    )
    records, report = build_instruction_dataset(
        list(store.iter_products()),
        mix,
        RuleBasedExtractor(lexicon),
        store.taxonomy,
        seed=args.seed,
    )
    count = write_chatml_jsonl(records, args.out)
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            json.dump(report.to_doc(), fh, indent=2)
    print(f"wrote {count} records to {args.out}")
    return 0


def cmd_eval_metrics(args) -> int:
    embedder = HashingEmbedder()
    pairs = []
    with open(args.pairs, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                doc = json.loads(line)
                pairs.append((doc["candidate"], doc["reference"]))
    token_pairs = [(tokenize(c), [tokenize(r)]) for c, r in pairs]
    scores: list[MetricScore] = list(corpus_bleu(token_pairs))
    n = len(pairs)
    for variant in RougeVariant:
        mean = sum(rouge(tokenize(c), tokenize(r), variant).value for c, r in pairs) / n
        scores.append(MetricScore(variant.value, mean, n))
    mean_sim = sum(sim(c, r, embedder).value for c, r in pairs) / n
    scores.append(MetricScore("sim", mean_sim, n))
    print(EvalReport(scores=scores, total=n).render())
    return 0


def cmd_eval_benchmark(args) -> int:
    samples = load_samples_jsonl(args.samples)
    answers: dict[str, str] = {}
    with open(args.answers, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                doc = json.loads(line)
                answers[doc["sample_id"]] = doc["answer"]

    def model(sample):
        return answers[sample.sample_id]

    report = run_benchmark(samples, model)
    print(report.render())
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(report.to_doc(), fh, indent=2)
    return 0


def cmd_eval_ablation(args) -> int:
    fixture = make_fixture(
        seed=args.seed,
        queries_per_category=args.queries_per_category,
        products_per_category=args.products_per_category,
    )
    table = run_ablation(fixture)
    print(table.render())
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(table.to_doc(), fh, indent=2)
    return 0


def cmd_fixtures(args) -> int:
    fixture = make_fixture(seed=args.seed)
    paths = export_fixture_files(fixture, args.out)
    print(json.dumps(paths, indent=2))
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import ServiceConfig, build_service

    config = ServiceConfig.from_file(args.config) if args.config else ServiceConfig()
    app, _ = build_service(config)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="listingkit")
    parser.add_argument("--dimension", type=int, default=DEFAULT_DIMENSION)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="load a catalog JSONL file into a store")
    p.add_argument("--catalog", required=True)
    p.add_argument("--taxonomy")
    p.add_argument("--store", default=":memory:")
    p.set_defaults(func=cmd_ingest)

    index = sub.add_parser("index", help="vector index operations").add_subparsers(
        dest="index_command", required=True
    )
    p = index.add_parser("build")
    p.add_argument("--catalog")
    p.add_argument("--taxonomy")
    p.add_argument("--store", default=":memory:")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_index_build)
    p = index.add_parser("search")
    p.add_argument("--index", required=True)
    p.add_argument("--query-file", required=True)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--tau-identical", type=float, default=0.85)
    p.add_argument("--tau-similar", type=float, default=0.70)
    p.set_defaults(func=cmd_index_search)

    dataset = sub.add_parser("dataset", help="corpus cleaning and dataset building").add_subparsers(
        dest="dataset_command", required=True
    )
    p = dataset.add_parser("clean")
    p.add_argument("--catalog", required=True)
    p.add_argument("--taxonomy")
    p.add_argument("--store", default=":memory:")
    p.add_argument("--config")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--report")
    p.set_defaults(func=cmd_dataset_clean)
    p = dataset.add_parser("build")
    p.add_argument("--catalog", required=True)
    p.add_argument("--taxonomy", required=True)
    p.add_argument("--lexicon", required=True)
    p.add_argument("--store", default=":memory:")
    p.add_argument("--mix", default="0.34,0.33,0.33")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--report")
    p.set_defaults(func=cmd_dataset_build)

    ev = sub.add_parser("eval", help="metrics, benchmarks, ablation").add_subparsers(
        dest="eval_command", required=True
    )
    p = ev.add_parser("metrics")
    p.add_argument("--pairs", required=True, help="JSONL with candidate/reference fields")
    p.set_defaults(func=cmd_eval_metrics)
    p = ev.add_parser("benchmark")
    p.add_argument("--samples", required=True)
    p.add_argument("--answers", required=True, help="JSONL with sample_id/answer fields")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval_benchmark)
    p = ev.add_parser("ablation")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--queries-per-category", type=int, default=10)
    p.add_argument("--products-per-category", type=int, default=60)
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval_ablation)

    p = sub.add_parser("fixtures", help="write synthetic demo fixture files")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=7)
    p.set_defaults(func=cmd_fixtures)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--config")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8800)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
