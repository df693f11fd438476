"""Command-line interface.

Commands::

    tablegen build    --tables T --kb K --out DIR [--overrides F]
    tablegen generate DIR (QUERY | --queries F) [--rounds N] [--format json|tsv] ...
    tablegen train    --tables T --kb K --task schema-matcher|entity-matcher --out MODEL
    tablegen eval     --run R --qrels Q [--metrics ndcg@5,ndcg@10,map,mrr]

Exit codes: 0 ok, 2 usage or input error, 3 corrupt artifact, 4 nothing to do.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import shutil
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import __version__
from .config import ENTITY_FEATURES, LABEL_FEATURES, Config, load_config, parse_config_text, read_weights
from .corpus import Corpus, parse_kb_dump, parse_table_corpus
from .engine import Engine, FileHits, ModelSet, NullHits
from .evaluation import FormatError, map_mrr, ndcg_at_k, read_qrels, read_queries, read_run, write_run
from .pipeline import TableGenerator
from .schema_norm import SynonymSets, build_synonym_sets, read_overrides
from .semantic_match import (DrrmTksModel, EmbeddingTable, TrainingError, generate_entity_label_pairs,
                             generate_schema_training_pairs, train)
from .text_index import IndexFormatError, InvertedIndex, build_entity_index, build_table_index
from .value_lookup import FactCatalog, build_catalog

logger = logging.getLogger("tablegen")

EXIT_OK, EXIT_USAGE, EXIT_CORRUPT, EXIT_EMPTY = 0, 2, 3, 4

MANIFEST = "manifest.json"
BUNDLE_FORMAT = "tablegen.bundle"
BUNDLE_VERSION = 1
ARTIFACTS = {
    "entity_index": ("entity_index.jsonl", "tablegen.inverted-index", 1),
    "table_index": ("table_index.jsonl", "tablegen.inverted-index", 1),
    "catalog": ("catalog.jsonl", "tablegen.catalog", 1),
    "synonyms": ("synonyms.json", "tablegen.synonyms", 1),
}
INPUTS = {"tables": "inputs/tables.jsonl", "kb": "inputs/kb.jsonl"}

DEEP_ENTITY = (1, 2, 3, 4, 5)
DEEP_LABEL = (2,)


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _readable(path: str, what: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise CliError(EXIT_USAGE, f"{what} file not found: {path}")
    return p


def _load_corpus(tables: Path, kb: Path) -> Corpus:
    kb_store, kb_msgs = parse_kb_dump(kb)
    for m in kb_msgs:
        logger.warning("%s: %s", kb, m)
    raw, errors = parse_table_corpus(tables)
    for e in errors:
        logger.warning("%s: %s", tables, e)
    return Corpus.ingest(raw, kb_store)


# -- build --------------------------------------------------------------------

def cmd_build(args) -> int:
    tables = _readable(args.tables, "tables")
    kb = _readable(args.kb, "kb")
    overrides = read_overrides(_readable(args.overrides, "overrides")) if args.overrides else []
    config = _base_config(args)
    corpus = _load_corpus(tables, kb)
    if not corpus.kb:
        raise CliError(EXIT_EMPTY, f"no entities in {kb}")
    out = Path(args.out)
    (out / "inputs").mkdir(parents=True, exist_ok=True)

    build_entity_index(corpus).save(out / ARTIFACTS["entity_index"][0])
    build_table_index(corpus).save(out / ARTIFACTS["table_index"][0])
    build_catalog(corpus).save(out / ARTIFACTS["catalog"][0])
    synonyms = build_synonym_sets(corpus.kb, config.synonym_threshold, overrides, corpus.analyzer)
    (out / ARTIFACTS["synonyms"][0]).write_text(synonyms.to_json(), encoding="utf-8")
    shutil.copyfile(tables, out / INPUTS["tables"])
    shutil.copyfile(kb, out / INPUTS["kb"])

    manifest = {
        "format": BUNDLE_FORMAT,
        "version": BUNDLE_VERSION,
        "tablegen": __version__,
        "artifacts": [
            {"name": name, "file": f, "format": fmt, "version": ver, "sha256": sha256_file(out / f)}
            for name, (f, fmt, ver) in ARTIFACTS.items()
        ],
        "inputs": [
            {"name": name, "file": f, "source": Path(src).name, "sha256": sha256_file(out / f)}
            for (name, f), src in zip(INPUTS.items(), (tables, kb))
        ],
        "stats": {"relational_tables": len(corpus.tables), "non_relational_tables": corpus.n_nonrelational,
                  "entities": len(corpus.kb), "synonym_groups": len(synonyms.groups)},
        "synonym_threshold": config.synonym_threshold,
    }
    (out / MANIFEST).write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    logger.info("bundle written to %s (%d tables, %d entities)", out, len(corpus.tables), len(corpus.kb))
    return EXIT_OK


def load_bundle(path: str | Path, config: Config, models: ModelSet | None = None, hits=None) -> Engine:
    """Rebuild an :class:`Engine` from a bundle directory, verifying every hash."""
    root = Path(path)
    try:
        manifest = json.loads((root / MANIFEST).read_text("utf-8"))
    except FileNotFoundError:
        raise CliError(EXIT_USAGE, f"no {MANIFEST} in {root}") from None
    except json.JSONDecodeError as exc:
        raise CliError(EXIT_CORRUPT, f"{root / MANIFEST}: {exc}") from None
    if manifest.get("format") != BUNDLE_FORMAT or manifest.get("version") != BUNDLE_VERSION:
        raise CliError(EXIT_CORRUPT, f"{root}: not a version {BUNDLE_VERSION} bundle")
    files = {}
    try:
        for entry in manifest["artifacts"] + manifest["inputs"]:
            f = root / entry["file"]
            if not f.is_file() or sha256_file(f) != entry["sha256"]:
                raise CliError(EXIT_CORRUPT, f"{f}: missing or hash mismatch")
            files[entry["name"]] = f
        corpus = _load_corpus(files["tables"], files["kb"])
        return Engine(
            corpus,
            InvertedIndex.load(files["entity_index"]),
            InvertedIndex.load(files["table_index"]),
            SynonymSets.from_json(files["synonyms"].read_text("utf-8")),
            FactCatalog.load(files["catalog"]),
            config,
            models or ModelSet(),
            hits or NullHits(),
        )
    except (KeyError, TypeError, ValueError, IndexFormatError) as exc:
        raise CliError(EXIT_CORRUPT, f"{root}: corrupt bundle ({exc})") from None


# -- generate -------------------------------------------------------------------

def _base_config(args) -> Config:
    try:
        config = load_config(getattr(args, "config", None))
        sets = getattr(args, "set", None) or []
        if sets:
            config = parse_config_text("\n".join(sets), config)
        flags = {k: getattr(args, k, None) for k in ("rounds", "k_feedback", "n_out", "m_out", "mu", "delta",
                                                      "gamma", "seed", "threads", "lr", "epochs")}
        flags = {k: v for k, v in flags.items() if v is not None}
        if getattr(args, "hits", None):
            flags.update(provider="file", hits_file=args.hits)
        if getattr(args, "entity_weights", None):
            flags["entity_weights"] = read_weights(args.entity_weights, ENTITY_FEATURES)
        if getattr(args, "label_weights", None):
            flags["label_weights"] = read_weights(args.label_weights, LABEL_FEATURES)
        return config.replace(**flags)
    except (OSError, ValueError) as exc:
        raise CliError(EXIT_USAGE, f"bad configuration: {exc}") from None


def _load_model(path: str | None) -> DrrmTksModel | None:
    if not path:
        return None
    _readable(path, "model")
    try:
        return DrrmTksModel.load(path)
    except ValueError as exc:
        raise CliError(EXIT_CORRUPT, str(exc)) from None


def _zero(weights: tuple, idxs) -> tuple:
    return tuple(0.0 if i in idxs else w for i, w in enumerate(weights))


def cmd_generate(args) -> int:
    config = _base_config(args)
    entity_model = _load_model(args.entity_model)
    label_model = _load_model(args.label_model)
    if entity_model is None and any(config.entity_weights[i] for i in DEEP_ENTITY):
        logger.warning("no entity matcher given; deep entity features phi2-phi6 get weight 0")
        config = config.replace(entity_weights=_zero(config.entity_weights, DEEP_ENTITY))
    if label_model is None and any(config.label_weights[i] for i in DEEP_LABEL):
        logger.warning("no schema matcher given; deep label feature phi3 gets weight 0")
        config = config.replace(label_weights=_zero(config.label_weights, DEEP_LABEL))
    # the entity matcher is never a stand-in for the schema matcher, so no default role
    roles = {r: entity_model for r in ("description", "properties", "combined")}
    models = ModelSet(label=label_model, **roles)
    hits = NullHits()
    if config.provider == "file":
        if not config.hits_file:
            raise CliError(EXIT_USAGE, "hits provider 'file' needs a hits file")
        try:
            hits = FileHits.from_file(_readable(config.hits_file, "hits"))
        except ValueError as exc:
            raise CliError(EXIT_USAGE, str(exc)) from None

    if args.queries:
        try:
            queries = list(read_queries(_readable(args.queries, "queries")).items())
        except FormatError as exc:
            raise CliError(EXIT_USAGE, f"{args.queries}: {exc}") from None
    elif args.query:
        queries = [(None, args.query)]
    else:
        raise CliError(EXIT_USAGE, "give a query or --queries FILE")
    if not queries:
        raise CliError(EXIT_EMPTY, "no queries to run")

    engine = load_bundle(args.bundle, config, models, hits)
    gen = TableGenerator(engine)

    def run(q):
        return gen.generate_table(q[1])

    threads = config.threads or os.cpu_count() or 1
    with ThreadPoolExecutor(max_workers=threads) as pool:
        tables = list(pool.map(run, queries))

    out = sys.stdout
    for (qid, _), table in zip(queries, tables):
        if args.format == "tsv":
            out.write(table.to_tsv())
        else:
            record = table.to_dict()
            if qid is not None:
                record["qid"] = qid
            out.write(json.dumps(record, sort_keys=True, ensure_ascii=False) + "\n")
    out.flush()

    ids = [qid if qid is not None else "q" for qid, _ in queries]
    if args.entity_run:
        with open(args.entity_run, "w", encoding="utf-8") as fh:
            write_run({qid: list(t.entities) for qid, t in zip(ids, tables)}, fh)
    if args.label_run:
        with open(args.label_run, "w", encoding="utf-8") as fh:
            # TREC files are whitespace separated, so multi-word labels use underscores
            write_run({qid: [(s.replace(" ", "_"), sc) for s, sc in t.labels] for qid, t in zip(ids, tables)}, fh)
    return EXIT_OK


# -- train ----------------------------------------------------------------------

def cmd_train(args) -> int:
    config = _base_config(args)
    corpus = _load_corpus(_readable(args.tables, "tables"), _readable(args.kb, "kb"))
    if args.task == "schema-matcher":
        pairs = generate_schema_training_pairs(corpus, config.seed)
    else:
        pairs = generate_entity_label_pairs(corpus, args.repr, config.seed)
    if args.embeddings:
        emb = EmbeddingTable.from_file(_readable(args.embeddings, "embeddings"), config.seed,
                                       trainable=args.train_embeddings)
    else:
        emb = EmbeddingTable(config.embedding_dim, seed=config.seed, trainable=args.train_embeddings)
    model = DrrmTksModel.initialized(emb, config.k_signals, config.hidden, config.seed)
    try:
        result = train(model, pairs, config.lr, config.epochs, args.batch_size, config.seed)
    except TrainingError as exc:
        raise CliError(EXIT_EMPTY, f"{args.task}: {exc}") from None
    model.save(args.out)
    loss_path = Path(args.loss_csv) if args.loss_csv else Path(args.out).with_suffix(".loss.csv")
    with open(loss_path, "w", encoding="utf-8") as fh:
        fh.write("epoch,loss\n")
        for i, loss in enumerate(result.losses, 1):
            fh.write(f"{i},{loss!r}\n")
    logger.info("trained %s on %d pairs; final loss %.6f", args.task, len(pairs), result.losses[-1])
    return EXIT_OK


# -- eval -----------------------------------------------------------------------

def _metric_values(name: str, run, qrels):
    if name.startswith("ndcg@"):
        try:
            k = int(name[5:])
        except ValueError:
            raise CliError(EXIT_USAGE, f"bad metric {name!r}") from None
        return ndcg_at_k(run, qrels, k)
    if name in ("map", "mrr"):
        ap, rr = map_mrr(run, qrels)
        return ap if name == "map" else rr
    raise CliError(EXIT_USAGE, f"unknown metric {name!r}; use ndcg@K, map or mrr")


def cmd_eval(args) -> int:
    metrics = [m.strip().lower() for m in args.metrics.split(",") if m.strip()]
    try:
        run = read_run(_readable(args.run, "run"))
        qrels = read_qrels(_readable(args.qrels, "qrels"))
    except FormatError as exc:
        raise CliError(EXIT_USAGE, str(exc)) from None
    if not run:
        logger.warning("run file %s is empty; every metric is 0", args.run)
    results = {m: _metric_values(m, run, qrels) for m in metrics}
    qids = sorted({q for r in results.values() for q in r.per_query})
    if args.format == "json":
        payload = {"mean": {m: r.mean for m, r in results.items()},
                   "per_query": {q: {m: r.per_query.get(q, 0.0) for m, r in results.items()} for q in qids}}
        sys.stdout.write(json.dumps(payload, sort_keys=True) + "\n")
    else:
        sys.stdout.write("qid\t" + "\t".join(metrics) + "\n")
        for q in qids:
            sys.stdout.write(q + "\t" + "\t".join(f"{results[m].per_query.get(q, 0.0):.4f}" for m in metrics) + "\n")
        sys.stdout.write("all\t" + "\t".join(f"{results[m].mean:.4f}" for m in metrics) + "\n")
    return EXIT_OK


# -- argument parsing -------------------------------------------------------------

def _config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key (repeatable)")
    p.add_argument("--seed", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tablegen", description="Generate tables from keyword queries.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    b = sub.add_parser("build", help="index a table corpus and KB into a bundle directory")
    b.add_argument("--tables", required=True)
    b.add_argument("--kb", required=True)
    b.add_argument("--out", required=True)
    b.add_argument("--overrides", help="allow/deny synonym override TSV")
    _config_args(b)
    b.set_defaults(func=cmd_build)

    g = sub.add_parser("generate", help="generate tables for one query or a queries file")
    g.add_argument("bundle")
    g.add_argument("query", nargs="?")
    g.add_argument("--queries", help="qid<TAB>query file")
    g.add_argument("--rounds", type=int)
    g.add_argument("--k-feedback", dest="k_feedback", type=int)
    g.add_argument("--n-out", dest="n_out", type=int)
    g.add_argument("--m-out", dest="m_out", type=int)
    g.add_argument("--mu", type=float)
    g.add_argument("--delta", type=float)
    g.add_argument("--gamma", type=float)
    g.add_argument("--threads", type=int, help="query-level parallelism (default: all cores)")
    g.add_argument("--format", choices=("json", "tsv"), default="json")
    g.add_argument("--entity-model", help="trained entity matcher (phi2-phi6)")
    g.add_argument("--label-model", help="trained schema matcher (label phi3)")
    g.add_argument("--entity-weights", help="weights file: phi1 w ... phi7 w")
    g.add_argument("--label-weights", help="weights file: phi1 w ... phi5 w")
    g.add_argument("--hits", help="label<TAB>entity<TAB>count search-hits file")
    g.add_argument("--entity-run", help="write the entity rankings as a TREC run")
    g.add_argument("--label-run", help="write the label rankings as a TREC run")
    _config_args(g)
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", help="train a DRRM_TKS matcher")
    t.add_argument("--tables", required=True)
    t.add_argument("--kb", required=True)
    t.add_argument("--task", required=True, choices=("schema-matcher", "entity-matcher"))
    t.add_argument("--out", required=True, help="model file (.npz)")
    t.add_argument("--loss-csv", help="loss curve CSV (default: next to the model)")
    t.add_argument("--repr", choices=("description", "properties"), default="description",
                   help="entity side for entity-matcher pairs")
    t.add_argument("--embeddings", help="word vectors: one 'term v1 v2 ...' per line")
    t.add_argument("--train-embeddings", action="store_true")
    t.add_argument("--lr", type=float)
    t.add_argument("--epochs", type=int)
    t.add_argument("--batch-size", type=int, default=1)
    _config_args(t)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="score a TREC run against qrels")
    e.add_argument("--run", required=True)
    e.add_argument("--qrels", required=True)
    e.add_argument("--metrics", default="ndcg@5,ndcg@10,map,mrr")
    e.add_argument("--format", choices=("tsv", "json"), default="tsv")
    e.set_defaults(func=cmd_eval)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"tablegen: {exc}", file=sys.stderr)
        return exc.code
    except OSError as exc:
        print(f"tablegen: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
