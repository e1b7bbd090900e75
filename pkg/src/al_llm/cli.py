"""Command-line front end: prep, embed, run, report, mock-llm.

Exit codes are stable: 0 success, 1 runtime failure (partial outputs are
kept), 2 validation failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from .config import ConfigError, RunConfig, load_config
from .corpus import (
    Corpus,
    CorpusError,
    balanced_sample,
    filter_short,
    length_histogram,
    load_corpus,
    random_subsample,
    write_corpus_jsonl,
)
from .embedding import (
    EmbeddingError,
    EmbeddingMatrix,
    HashEmbedder,
    RemoteEmbedder,
    load_embedding_file,
    write_embedding_file,
)
from .engine import EngineError, LoopConfig
from .experiments import ExperimentPlan, run_rq1, run_rq2, run_rq3, run_rq4
from .metrics import MetricError
from .models import ModelError
from .oracle import (
    CachedOracle,
    ChatCompletionOracle,
    GroundTruthOracle,
    OracleError,
    PromptTemplate,
    ScriptedSession,
    ZERO_PRICES,
)
from .strategies import StrategyError
from .synthetic import make_blobs

VALIDATION_ERRORS = (
    ConfigError,
    CorpusError,
    EmbeddingError,
    OracleError,
    ModelError,
    MetricError,
    StrategyError,
)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (EngineError, OSError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="al-llm", description=__doc__)
    sub = parser.add_subparsers(required=True)

    p = sub.add_parser("prep", help="load, filter, sample, and emit a corpus")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--input", help="input corpus file")
    src.add_argument("--synth", help="synthesize blobs: n=2000,classes=4,dim=32,seed=7")
    p.add_argument("--format", choices=["csv", "jsonl"], default="jsonl")
    p.add_argument("--text-field", default="text")
    p.add_argument("--label-field", default=None)
    p.add_argument("--label-names", help="comma-separated class names in index order")
    p.add_argument("--min-words", type=int, default=None, help="drop texts this short or shorter")
    p.add_argument("--balance-per-class", type=int, default=None)
    p.add_argument("--subsample", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output corpus JSONL path")
    p.add_argument("--emb-out", default=None, help="with --synth: also write the blob matrix here")
    p.add_argument("--histogram", default=None, help="write a length histogram CSV here")
    p.add_argument("--bin-width", type=int, default=10)
    p.set_defaults(func=cmd_prep)

    p = sub.add_parser("embed", help="embed a corpus JSONL into an ALEMB1 file")
    p.add_argument("--corpus", required=True)
    p.add_argument("--text-field", default="text")
    p.add_argument("--provider", choices=["hash", "remote"], default="hash")
    p.add_argument("--dim", type=int, default=768)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--endpoint", default=None)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("run", help="run the experiment described by a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--force", action="store_true", help="overwrite a non-empty output dir")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("report", help="summarize a finished run directory")
    p.add_argument("--run-dir", required=True)
    p.add_argument("--curves-csv", default=None, help="write combined averaged curves here")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("mock-llm", help="serve a scripted chat-completion endpoint")
    p.add_argument("--script", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8099)
    p.set_defaults(func=cmd_mock_llm)
    return parser


def _parse_kv_ints(text: str, where: str) -> dict[str, int]:
    out = {}
    for part in text.split(","):
        if not part:
            continue
        key, _, value = part.partition("=")
        try:
            out[key.strip()] = int(value)
        except ValueError:
            raise ConfigError(f"bad {where} entry {part!r}; want key=int") from None
    return out


def cmd_prep(args) -> int:
    if args.synth:
        spec = _parse_kv_ints(args.synth, "--synth")
        known = {"n": 2000, "classes": 4, "dim": 32, "seed": 7}
        unknown = set(spec) - set(known)
        if unknown:
            raise ConfigError(f"unknown --synth keys: {sorted(unknown)}")
        known.update(spec)
        corpus, emb = make_blobs(known["n"], known["classes"], known["dim"], known["seed"])
        if args.emb_out:
            write_embedding_file(emb, args.emb_out)
            print(f"wrote {emb.n}x{emb.dim} embedding matrix to {args.emb_out}")
    else:
        if not args.label_names:
            raise ConfigError("--label-names is required with --input")
        corpus = load_corpus(
            args.input,
            args.format,
            args.text_field,
            args.label_field,
            [s.strip() for s in args.label_names.split(",")],
        )
    if args.min_words is not None:
        corpus = filter_short(corpus, args.min_words)
    if args.balance_per_class is not None:
        corpus = balanced_sample(corpus, args.balance_per_class, args.seed)
    if args.subsample is not None:
        corpus = random_subsample(corpus, args.subsample, args.seed)
    write_corpus_jsonl(corpus, args.out)
    print(f"wrote {len(corpus)} instances to {args.out}")
    if args.histogram:
        with open(args.histogram, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["bin_start", "count"])
            writer.writerows(length_histogram(corpus, args.bin_width))
        print(f"wrote length histogram to {args.histogram}")
    return 0


def _read_texts_jsonl(path: str | Path, text_field: str) -> list[str]:
    texts = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            obj = json.loads(line)
            if text_field not in obj:
                raise CorpusError(f"row {lineno}: missing {text_field!r}")
            texts.append(str(obj[text_field]))
    if not texts:
        raise CorpusError(f"no rows in {path}")
    return texts


def cmd_embed(args) -> int:
    texts = _read_texts_jsonl(args.corpus, args.text_field)
    if args.provider == "hash":
        provider = HashEmbedder(dim=args.dim, rng_seed=args.seed)
    else:
        if not args.endpoint:
            raise ConfigError("--provider remote needs --endpoint")
        provider = RemoteEmbedder(endpoint=args.endpoint, batch_size=args.batch_size)
    matrix = provider.embed(texts)
    write_embedding_file(matrix, args.out)
    print(f"wrote {matrix.n}x{matrix.dim} embedding matrix to {args.out}")
    return 0


def _build_embeddings(config: RunConfig, corpus: Corpus) -> EmbeddingMatrix:
    emb = config.embedding
    if emb.source == "file":
        return load_embedding_file(emb.path, expected_n=len(corpus))
    if emb.source == "hash":
        return HashEmbedder(dim=emb.dim, rng_seed=emb.rng_seed).embed(corpus.texts)
    return RemoteEmbedder(
        endpoint=emb.endpoint,
        batch_size=emb.batch_size,
        retries=emb.retries,
        concurrency=emb.concurrency,
    ).embed(corpus.texts)


def _oracle_factories(config: RunConfig, class_count: int):
    """Build (oracle_factory, ground_truth_factory, prices) from the config."""
    oc = config.oracle
    prices = oc.prices if oc.prices is not None else ZERO_PRICES
    gt_factory = lambda meter: GroundTruthOracle()  # noqa: E731
    if oc.kind == "ground_truth":
        return gt_factory, gt_factory, prices
    template = PromptTemplate(
        expertise=config.prompt.expertise,
        task=config.prompt.task,
        instruction=config.prompt.instruction,
    )

    def factory(meter):
        if oc.kind == "mock":
            session = ScriptedSession(oc.script)
            endpoint = oc.endpoint or "mock://scripted"
        else:
            session = None
            endpoint = oc.endpoint
        oracle = ChatCompletionOracle(
            endpoint,
            oc.model or "scripted",
            template,
            class_count,
            meter=meter,
            retry_limit=oc.retry_limit,
            backoff=oc.backoff,
            min_interval=oc.min_interval,
            max_in_flight=oc.max_in_flight,
            session=session,
        )
        if oc.cache_path:
            return CachedOracle(oracle, path=oc.cache_path)
        return oracle

    return factory, gt_factory, prices


def cmd_run(args) -> int:
    config = load_config(args.config)
    outdir = Path(config.output_dir)
    if outdir.exists() and any(outdir.iterdir()) and not args.force:
        raise ConfigError(
            f"output dir {outdir} is not empty; pass --force to overwrite"
        )
    outdir.mkdir(parents=True, exist_ok=True)

    corpus = load_corpus(
        config.dataset.path,
        config.dataset.format,
        config.dataset.text_field,
        config.dataset.label_field,
        list(config.dataset.label_names),
    )
    X = _build_embeddings(config, corpus)
    oracle_factory, gt_factory, prices = _oracle_factories(config, corpus.class_count)
    plan = ExperimentPlan(
        loop=LoopConfig(
            seed_size=config.seed_size,
            batch_size=config.batch_size,
            iterations=config.iterations,
            strategy=config.strategies[0],
            candidate_factor=config.candidate_factor,
            classifier=config.classifier,
            rng_seed=config.rng_seed,
        ),
        folds=config.folds,
        strategies=config.strategies,
        oracle_factory=oracle_factory,
        ground_truth_factory=gt_factory,
        prices=prices,
        scenario=config.oracle.kind,
        rq4_repeats=config.rq4_repeats,
        parallel_folds=config.parallel_folds,
    )
    (outdir / "config.json").write_text(config.to_json(), encoding="utf-8")
    runner = {"rq1": run_rq1, "rq2": run_rq2, "rq3": run_rq3, "rq4": run_rq4}[config.mode]
    result = runner(corpus, X, plan, outdir)
    summary = result.as_dict()
    summary["config"] = config.to_dict()
    (outdir / "summary.json").write_text(
        json.dumps(summary, ensure_ascii=False, sort_keys=True, indent=2) + "\n",
        encoding="utf-8",
    )
    print(f"wrote {outdir / 'summary.json'}")
    return 0


def cmd_report(args) -> int:
    run_dir = Path(args.run_dir)
    summary_path = run_dir / "summary.json"
    if not summary_path.exists():
        raise ConfigError(f"no summary.json under {run_dir}")
    summary = json.loads(summary_path.read_text(encoding="utf-8"))
    mode = summary.get("mode")
    print(f"mode: {mode}")
    if mode in ("rq1", "rq2"):
        rows = []
        for strategy, payload in sorted(summary["strategies"].items()):
            if mode == "rq1":
                payload = {"": payload}
            for scenario, arm in sorted(payload.items()):
                avg = arm["average_final"]
                label = strategy if not scenario else f"{strategy}/{scenario}"
                rows.append((label, avg["accuracy"], avg["f1"], avg["recall"]))
        print(f"{'arm':40s} {'accuracy':>9s} {'f1':>9s} {'recall':>9s}")
        for label, acc, f1, rec in rows:
            print(f"{label:40s} {acc:9.4f} {f1:9.4f} {rec:9.4f}")
        if mode == "rq2":
            for strategy, comp in sorted(summary["comparisons"].items()):
                print(f"{strategy}: mean std {comp['mean_std']:.6f}; "
                      f"mean diffs {comp['mean_diffs']}")
        if args.curves_csv:
            _write_combined_curves(summary, args.curves_csv, mode)
    elif mode == "rq3":
        for arm in ("direct", "loop"):
            avg = summary[arm]["average"]
            print(
                f"{arm:6s} accuracy {avg['accuracy']:.4f}  "
                f"time {avg['seconds']:.2f}s  cost ${avg['cost_usd']:.4f}"
            )
        print(f"ratios: {summary['ratios']}")
    elif mode == "rq4":
        print(f"budget {summary['budget']} labels")
        for fold in summary["per_fold"]:
            print(f"fold {fold['fold']}: mean accuracy {fold['mean_accuracy']:.4f}")
        print(f"average accuracy {summary['average_accuracy']:.4f}")
    return 0


def _write_combined_curves(summary: dict, path: str, mode: str) -> None:
    columns: dict[str, list[float]] = {}
    for strategy, payload in sorted(summary["strategies"].items()):
        if mode == "rq1":
            columns[strategy] = payload["averaged_curve"]
        else:
            for scenario, arm in sorted(payload.items()):
                columns[f"{strategy}/{scenario}"] = arm["averaged_curve"]
    length = max(len(c) for c in columns.values())
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration"] + list(columns))
        for t in range(length):
            writer.writerow(
                [t] + [repr(c[t]) if t < len(c) else "" for c in columns.values()]
            )
    print(f"wrote combined curves to {path}")


def cmd_mock_llm(args) -> int:
    from .mock_server import make_server

    server, _book = make_server(args.script, host=args.host, port=args.port)
    host, port = server.server_address[:2]
    print(f"mock chat endpoint on http://{host}:{port}/ (Ctrl-C to stop)")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


if __name__ == "__main__":
    sys.exit(main())
