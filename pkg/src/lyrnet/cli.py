"""Command-line entry point: ``lyrnet <subcommand> ...``.

Exit codes: 0 success, 2 bad arguments or config, 3 data/checkpoint errors,
4 training divergence, 5 gradient-check failure. Human-readable output goes to
standard error; artifacts go to files (and ``predict`` records to standard output).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .checkpoint import load_checkpoint, save_checkpoint
from .corpus import (
    generate_synthetic, import_crawl_records, import_csv, read_jsonl_documents, split,
    tokenize, write_corpus,
)
from .errors import CheckpointError, ContractError, DataError, DivergenceError
from .evaluation import evaluate, predict_documents, write_predictions
from .experiments import ablation, fit, format_ablation_table, split_seeds
from .heads import HeadConfig
from .training import TrainingConfig

log = logging.getLogger("lyrnet")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_DIVERGED, EXIT_GRADCHECK = 0, 2, 3, 4, 5

DEFAULT_ENCODER = {"n_layers": 2, "n_heads": 2, "d_model": 32, "d_ff": 64, "dropout_p": 0.1,
                   "max_seq_len": 1024, "memory_len": 0}


class UsageError(Exception):
    """Bad command-line arguments or config; maps to exit code 2."""


# run manifests

def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class RunManifest:
    """Audit record written once per run beside the run's outputs."""

    def __init__(self, subcommand: str, args: argparse.Namespace):
        self.subcommand = subcommand
        self.seed = getattr(args, "seed", None)
        self.started = datetime.now(timezone.utc).isoformat()
        self.config: dict = {}
        self.inputs: list[str] = []
        self.outputs: list[Path] = []

    def write(self, path: Path) -> None:
        body = {
            "subcommand": self.subcommand,
            "version": __version__,
            "seed": self.seed,
            "config": self.config,
            "inputs": [str(p) for p in self.inputs],
            "outputs": {str(p): sha256_file(p) for p in self.outputs},
            "started": self.started,
            "finished": datetime.now(timezone.utc).isoformat(),
        }
        path.write_text(json.dumps(body, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        log.info("wrote manifest %s", path)


def manifest_path(out: Path) -> Path:
    return out / "manifest.json" if out.is_dir() else out.with_name(out.name + ".manifest.json")


# argument helpers

def parse_floats(text: str, n: int | None = None, what: str = "values") -> tuple[float, ...]:
    try:
        values = tuple(float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"{what} must be comma-separated numbers, got {text!r}") from None
    if n is not None and len(values) != n:
        raise argparse.ArgumentTypeError(f"expected {n} comma-separated {what}, got {text!r}")
    return values


def lambdas_arg(text: str) -> tuple[float, ...]:
    return parse_floats(text, 3, "lambdas q,v,a")


def ratios_arg(text: str) -> tuple[float, ...]:
    return parse_floats(text, None, "ratios")


def existing_file(path: str | None, flag: str) -> Path:
    if path is None or not Path(path).is_file():
        raise UsageError(f"{flag}: no such file: {path}")
    return Path(path)


def read_config(path: str | None) -> dict:
    if path is None:
        return {}
    p = existing_file(path, "--config")
    try:
        raw = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise UsageError(f"--config {p}: not valid JSON ({exc.msg} at line {exc.lineno})") from exc
    if not isinstance(raw, dict):
        raise UsageError(f"--config {p}: expected a JSON object")
    return raw


def model_settings(args, raw: dict) -> tuple[dict, HeadConfig, TrainingConfig, str]:
    """Encoder fields, head config, training config and precision from config file plus flags."""
    unknown = set(raw) - {"encoder", "heads", "training", "precision"}
    if unknown:
        raise UsageError(f"unknown config sections: {sorted(unknown)}")
    encoder = {**DEFAULT_ENCODER, **raw.get("encoder", {})}
    encoder.pop("vocab_size", None)
    training = dict(raw.get("training", {}))
    if getattr(args, "seed", None) is not None:
        training["seed"] = args.seed
    if getattr(args, "epochs", None) is not None:
        training["epochs"] = args.epochs
    if getattr(args, "lambdas", None) is not None:
        training["lambdas"] = args.lambdas
    try:
        heads = HeadConfig(**raw.get("heads", {}))
        config = TrainingConfig.desk(**training)
    except TypeError as exc:
        raise UsageError(f"bad config field: {exc}") from exc
    precision = raw.get("precision", "float64")
    return encoder, heads, config, precision


def training_mode(lambdas) -> str:
    active = [t for t, w in zip(("quadrant", "valence", "arousal"), lambdas) if w > 0]
    return "multi-task" if len(active) > 1 else f"single-task {active[0]}"


# subcommands

def cmd_generate(args, manifest: RunManifest) -> int:
    out = Path(args.out)
    if args.fixture_site:
        from .fetcher.fixture import build_fixture

        out.mkdir(parents=True, exist_ok=True)
        site, queries = build_fixture(args.n_songs, args.n_misspelled, args.n_broken, seed=args.seed)
        (out / "site.json").write_text(json.dumps(site.to_dict(), indent=1) + "\n", encoding="utf-8")
        with open(out / "queries.jsonl", "w", encoding="utf-8") as fh:
            for q in queries:
                fh.write(json.dumps({"id": q.id, "artist": q.artist, "title": q.title, "url": q.fallback_url,
                                     **q.extra}) + "\n")
        crawl = {
            "site": {"base_url": "http://lyrics.fixture"},
            "transport": {"kind": "fixture", "site": "site.json"},
            "politeness": {"min_interval_s": 0.01, "max_in_flight": 4},
            "retry": {"max_attempts": 3, "base_delay_s": 0.05},
        }
        (out / "crawl.json").write_text(json.dumps(crawl, indent=2) + "\n", encoding="utf-8")
        manifest.outputs += [out / "site.json", out / "queries.jsonl", out / "crawl.json"]
        manifest.config = {"kind": "fixture-site", "n_songs": args.n_songs, "n_misspelled": args.n_misspelled,
                           "n_broken": args.n_broken}
        log.info("fixture site with %d songs written to %s", args.n_songs, out)
        return EXIT_OK
    docs = generate_synthetic(args.n_per_quadrant, args.vocab_size, args.seed, keyword_fraction=args.keyword_fraction)
    write_corpus(docs, out)
    manifest.outputs.append(out)
    manifest.config = {"kind": "synthetic", "n_per_quadrant": args.n_per_quadrant, "vocab_size": args.vocab_size,
                       "keyword_fraction": args.keyword_fraction}
    log.info("%d synthetic documents written to %s", len(docs), out)
    return EXIT_OK


def cmd_import(args, manifest: RunManifest) -> int:
    src = existing_file(args.input, "--input")
    fmt = args.format or ("csv" if src.suffix.lower() == ".csv" else "crawl")
    docs = import_csv(src) if fmt == "csv" else import_crawl_records(src)
    out = Path(args.out)
    write_corpus(docs, out)
    manifest.inputs.append(src)
    manifest.outputs.append(out)
    manifest.config = {"format": fmt}
    log.info("imported %d documents from %s", len(docs), src)
    return EXIT_OK


def cmd_split(args, manifest: RunManifest) -> int:
    src = existing_file(args.corpus, "--corpus")
    names = args.names.split(",") if args.names else None
    docs = read_jsonl_documents(src)
    try:
        parts = split(docs, args.ratios, args.seed, names)
    except ContractError as exc:
        raise UsageError(str(exc)) from exc
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, part in parts.items():
        write_corpus(part, out / f"{name}.jsonl")
        manifest.outputs.append(out / f"{name}.jsonl")
        log.info("%s: %d documents", name, len(part))
    manifest.inputs.append(src)
    manifest.config = {"ratios": list(args.ratios), "names": list(parts)}
    return EXIT_OK


def cmd_fetch(args, manifest: RunManifest) -> int:
    from .fetcher import CrawlCache, HttpTransport, crawl_batch, load_crawl_config, read_queries, write_records
    from .fetcher.fixture import FixtureSite, FixtureTransport

    queries_path = existing_file(args.queries, "--queries")
    raw = read_config(args.config)
    try:
        config, transport_spec = load_crawl_config(None, raw)
    except (TypeError, DataError) as exc:
        raise UsageError(f"bad crawl config: {exc}") from exc
    kind = transport_spec.get("kind", "http")
    if kind == "fixture":
        base = Path(args.config).parent if args.config else Path(".")
        site_path = existing_file(str(base / transport_spec["site"]), "transport.site")
        transport = FixtureTransport(FixtureSite.load(site_path))
        manifest.inputs.append(site_path)
    elif kind == "http":
        transport = HttpTransport(timeout=float(transport_spec.get("timeout_s", 10.0)))
    else:
        raise UsageError(f"unknown transport kind {kind!r}")

    cache_dir = args.cache_dir or os.environ.get("LYRNET_CACHE_DIR") or config.cache_dir
    cache = CrawlCache(cache_dir) if cache_dir else None
    records, summary = crawl_batch(read_queries(queries_path), config, transport, cache)
    out = Path(args.out)
    write_records(records, out)
    summary_path = out.with_name(out.name + ".summary.json")
    summary_path.write_text(json.dumps(summary.to_dict(), indent=2) + "\n", encoding="utf-8")
    manifest.inputs += [queries_path] + ([Path(args.config)] if args.config else [])
    manifest.outputs += [out, summary_path]
    manifest.config = {**raw, "cache_dir": cache_dir}
    log.info("coverage %.1f%% (%d/%d)", 100 * summary.coverage, summary.fetched, summary.total)
    if summary.baseline_coverage is not None:
        log.info("direct-URL baseline coverage %.1f%%", 100 * summary.baseline_coverage)
    return EXIT_OK


def cmd_train(args, manifest: RunManifest) -> int:
    corpus_path = existing_file(args.corpus, "--corpus")
    raw = read_config(args.config)
    encoder, heads, config, precision = model_settings(args, raw)
    docs = read_jsonl_documents(corpus_path)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    log.info("training %s for %d epochs on %d documents", training_mode(config.lambdas), config.epochs, len(docs))
    model, vocab, checkpoint, history = fit(docs, encoder, heads, config, precision)
    save_checkpoint(checkpoint, out / "model.ckpt")
    (out / "metrics.json").write_text(json.dumps(history, indent=1) + "\n", encoding="utf-8")
    first, last = history[1]["loss"]["total"], history[-1]["loss"]["total"]
    log.info("epoch-1 loss %.4f, final loss %.4f", first, last)
    manifest.inputs.append(corpus_path)
    manifest.outputs += [out / "model.ckpt", out / "metrics.json"]
    manifest.config = {"encoder": model.encoder_config.to_dict(), "heads": heads.to_dict(),
                       "training": config.to_dict(), "precision": precision, "mode": training_mode(config.lambdas)}
    return EXIT_OK


def cmd_evaluate(args, manifest: RunManifest) -> int:
    ckpt_path = existing_file(args.checkpoint, "--checkpoint")
    corpus_path = existing_file(args.corpus, "--corpus")
    checkpoint = load_checkpoint(ckpt_path)
    docs = read_jsonl_documents(corpus_path)
    report, records = evaluate(checkpoint, docs, return_predictions=True)
    out = Path(args.out)
    body = {"n_examples": report.n_examples, "agreement_rate": report.agreement_rate, "tasks": report.summary()}
    out.write_text(json.dumps(body, indent=2) + "\n", encoding="utf-8")
    manifest.outputs.append(out)
    if args.details:
        Path(args.details).write_text(report.to_json(), encoding="utf-8")
        manifest.outputs.append(Path(args.details))
    if args.predictions:
        write_predictions(records, args.predictions)
        manifest.outputs.append(Path(args.predictions))
    manifest.inputs += [ckpt_path, corpus_path]
    for task, row in report.summary().items():
        log.info("%-8s accuracy %.4f  precision %.4f  recall %.4f  macro-F1 %.4f", task, row["accuracy"],
                 row["precision"], row["recall"], row["macro_f1"])
    return EXIT_OK


def cmd_predict(args, manifest: RunManifest) -> int:
    from .corpus import LyricsDocument

    ckpt_path = existing_file(args.checkpoint, "--checkpoint")
    inputs = [(f"text-{i}", t) for i, t in enumerate(args.text or [])]
    for f in args.file or []:
        p = existing_file(f, "--file")
        inputs.append((p.name, p.read_text(encoding="utf-8")))
    if args.corpus:
        inputs += [(d.id, d.lyrics) for d in read_jsonl_documents(existing_file(args.corpus, "--corpus"))]
    if not inputs:
        raise UsageError("give lyrics with --text, --file or --corpus")
    checkpoint = load_checkpoint(ckpt_path)
    vocab = checkpoint.vocab()
    if vocab is None:
        raise DataError("checkpoint carries no vocabulary")
    docs = [LyricsDocument(id=i, lyrics=t, tokens=tokenize(t, vocab, checkpoint.encoder_config.max_seq_len))
            for i, t in inputs]
    for d in docs:
        if not d.tokens:
            log.warning("document %r has no words; predicting from a pad-only sequence", d.id)
    records = predict_documents(checkpoint.to_model(), docs)
    lines = []
    for d, r in zip(docs, records):
        lines.append(json.dumps({"id": r.id, "predicted": r.predicted, "logits": r.logits,
                                 "agreement": r.agrees, "degenerate": not d.tokens}))
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    if args.out:
        out = Path(args.out)
        out.write_text(text, encoding="utf-8")
        manifest.outputs.append(out)
    manifest.inputs.append(ckpt_path)
    return EXIT_OK


def cmd_ablate(args, manifest: RunManifest) -> int:
    corpus_path = existing_file(args.corpus, "--corpus")
    raw = read_config(args.config)
    encoder, heads, config, precision = model_settings(args, raw)
    docs = read_jsonl_documents(corpus_path)
    seeds = split_seeds(config.seed, args.splits)
    try:
        result = ablation(docs, args.ratios, seeds, encoder, heads, config, precision)
    except ContractError as exc:
        raise UsageError(str(exc)) from exc
    table = format_ablation_table(result)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "ablation.json").write_text(json.dumps(result, indent=2) + "\n", encoding="utf-8")
    (out / "ablation.md").write_text(table + "\n", encoding="utf-8")
    print(table, file=sys.stderr)
    manifest.inputs.append(corpus_path)
    manifest.outputs += [out / "ablation.json", out / "ablation.md"]
    manifest.config = {"encoder": encoder, "heads": heads.to_dict(), "training": config.to_dict(),
                       "ratios": list(args.ratios), "seeds": seeds}
    return EXIT_OK


def cmd_gradcheck(args, manifest: RunManifest) -> int:
    from . import diagnostics

    results = diagnostics.run_gradchecks(seed=args.seed or 0)
    table = diagnostics.format_table(results)
    print(table, file=sys.stderr)
    failed = [r.name for r in results if not r.passed]
    if args.out:
        out = Path(args.out)
        out.write_text(json.dumps([{"op": r.name, "max_rel_error": r.max_rel_error, "passed": r.passed}
                                   for r in results], indent=2) + "\n", encoding="utf-8")
        manifest.outputs.append(out)
    if failed:
        print(f"gradient check failed for: {', '.join(failed)}", file=sys.stderr)
        return EXIT_GRADCHECK
    print(f"all {len(results)} gradient checks passed", file=sys.stderr)
    return EXIT_OK


# parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lyrnet", description="Multi-task emotion classification of song lyrics.")
    parser.add_argument("--version", action="version", version=f"lyrnet {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True, metavar="SUBCOMMAND")

    p = sub.add_parser("generate", help="write a synthetic separable corpus, or a crawl fixture site")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-per-quadrant", type=int, default=8)
    p.add_argument("--vocab-size", type=int, default=200)
    p.add_argument("--keyword-fraction", type=float, default=0.3)
    p.add_argument("--fixture-site", action="store_true", help="write site.json, queries.jsonl and crawl.json into --out")
    p.add_argument("--n-songs", type=int, default=100)
    p.add_argument("--n-misspelled", type=int, default=20)
    p.add_argument("--n-broken", type=int, default=10)

    p = sub.add_parser("import", help="convert a dataset CSV or crawl records into corpus JSONL")
    p.add_argument("--input", required=True)
    p.add_argument("--format", choices=["csv", "crawl"])
    p.add_argument("--out", required=True)

    p = sub.add_parser("split", help="stratified seeded split of a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--ratios", type=ratios_arg, default=(0.8, 0.2))
    p.add_argument("--names", help="comma-separated split names (default train,test[,validation])")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("fetch", help="crawl lyrics for a list of song queries")
    p.add_argument("--queries", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--cache-dir")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    for name, help_text in (("train", "train a model"), ("ablate", "multi-task vs single-task comparison")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--corpus", required=True)
        p.add_argument("--config")
        p.add_argument("--seed", type=int)
        p.add_argument("--epochs", type=int)
        p.add_argument("--lambdas", type=lambdas_arg, help="task weights q,v,a")
        p.add_argument("--out", required=True, help="output directory")
        if name == "ablate":
            p.add_argument("--ratios", type=ratios_arg, default=(0.8, 0.2))
            p.add_argument("--splits", type=int, default=1)

    p = sub.add_parser("evaluate", help="score a checkpoint on a labelled corpus")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--details", help="also write the full per-class report here")
    p.add_argument("--predictions", help="also write per-document predictions (JSONL)")

    p = sub.add_parser("predict", help="predict emotions for lyrics")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--text", action="append")
    p.add_argument("--file", action="append")
    p.add_argument("--corpus")
    p.add_argument("--out")

    p = sub.add_parser("gradcheck", help="finite-difference check of every differentiable op")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    return parser


HANDLERS = {
    "generate": cmd_generate, "import": cmd_import, "split": cmd_split, "fetch": cmd_fetch, "train": cmd_train,
    "evaluate": cmd_evaluate, "predict": cmd_predict, "ablate": cmd_ablate, "gradcheck": cmd_gradcheck,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, stream=sys.stderr,
                        format="%(levelname)s %(message)s", force=True)
    manifest = RunManifest(args.command, args)
    try:
        code = HANDLERS[args.command](args, manifest)
    except UsageError as exc:
        print(f"{parser.prog} {args.command}: error: {exc}", file=sys.stderr)
        print(sys_usage(parser, args.command), file=sys.stderr)
        return EXIT_USAGE
    except ContractError as exc:
        print(f"error: invalid parameter: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DivergenceError as exc:
        print(f"error: training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (DataError, CheckpointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    if manifest.outputs:
        manifest.write(manifest_path(Path(args.out)))
    return code


def sys_usage(parser: argparse.ArgumentParser, command: str) -> str:
    for action in parser._subparsers._group_actions:
        if command in action.choices:
            return action.choices[command].format_usage().rstrip()
    return parser.format_usage().rstrip()


if __name__ == "__main__":
    sys.exit(main())
