"""Command-line entry point for the whole pipeline.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
Artifacts are written atomically (temp file + rename) and every
subcommand is deterministic given identical inputs and --seed.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import corpus as corpus_mod
from .checkpoint import load_checkpoint, save_checkpoint
from .corpus import build_dataset, normalize_text, read_pairs, read_transcripts, write_pairs, write_transcripts
from .errors import ReplyRankError
from .evaluation import build_ranking_task, emit_report, relevance_report, run_ranking_eval
from .kmeans import KMeansConfig
from .model import ModelConfig
from .retrieval import DUAL_ENCODER, TFIDF, score_against_pool, tfidf_fit, tfidf_rank, top_k
from .store import read_annotations
from .synthetic import generate_synthetic_corpus
from .templates import build_pool, curate, load_pool, parse_curation_file, save_pool
from .training import TrainConfig, train

log = logging.getLogger("replyrank")

USAGE_ERROR = 1
DATA_ERROR = 2
INTERNAL_ERROR = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_ERROR)


def _open_in(path: str):
    return sys.stdin if path == "-" else open(path, encoding="utf-8")


def _atomic_text(path: str, write_fn) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fp:
        write_fn(fp)
        fp.flush()
        os.fsync(fp.fileno())
    os.replace(tmp, path)


def _write_out(path: str, write_fn) -> None:
    if path == "-":
        write_fn(sys.stdout)
    else:
        _atomic_text(path, write_fn)


# -- subcommands ----------------------------------------------------------------


def cmd_synth(args) -> int:
    transcripts = generate_synthetic_corpus(args.intents, args.transcripts, args.seed)
    _write_out(args.out, lambda fp: write_transcripts(transcripts, fp))
    log.info("wrote %d synthetic transcripts", len(transcripts))
    return 0


def cmd_ingest(args) -> int:
    with _open_in(getattr(args, "in")) as fp:
        transcripts = read_transcripts(fp)
    split = build_dataset(
        transcripts, neg_ratio=args.neg_ratio, dev_fraction=args.dev, seed=args.seed
    )
    os.makedirs(args.out, exist_ok=True)
    _atomic_text(os.path.join(args.out, "train.jsonl"),
                 lambda fp: write_pairs(split.train, fp))
    _atomic_text(os.path.join(args.out, "dev.jsonl"),
                 lambda fp: write_pairs(split.dev, fp))
    log.info(
        "dataset: %d train pairs, %d dev pairs, ratio %.3f",
        len(split.train), len(split.dev), corpus_mod.label_ratio(split.train),
    )
    return 0


def _model_config(args) -> ModelConfig:
    return ModelConfig(
        embedding_dim=args.embedding_dim,
        lstm_dim=args.lstm_dim,
        mlp_layers=args.mlp_layers,
        mlp_hidden=args.mlp_hidden,
        vocab_size=args.vocab_size,
        share_embeddings=args.share_embeddings,
        seq_cap=args.seq_cap,
        seed=args.seed,
    )


def cmd_train(args) -> int:
    with open(os.path.join(args.data, "train.jsonl"), encoding="utf-8") as fp:
        train_pairs = read_pairs(fp)
    dev_path = os.path.join(args.data, "dev.jsonl")
    dev_pairs = []
    if os.path.exists(dev_path):
        with open(dev_path, encoding="utf-8") as fp:
            dev_pairs = read_pairs(fp)
    split = corpus_mod.DatasetSplit(
        train=tuple(train_pairs), dev=tuple(dev_pairs),
        seed=args.seed, neg_ratio=corpus_mod.label_ratio(train_pairs),
    )
    cfg = TrainConfig(
        learning_rate=args.lr,
        epochs=args.epochs,
        batch_size=args.batch_size,
        seed=args.seed,
        clip_norm=args.clip_norm,
    )
    model, metrics = train(split, cfg, _model_config(args))
    digest = save_checkpoint(model, args.checkpoint)
    metrics_path = args.metrics or args.checkpoint + ".metrics.json"
    doc = {
        "checkpoint_digest": digest,
        "epochs": [
            {"epoch": m.epoch, "train_loss": m.train_loss,
             "dev_accuracy": m.dev_accuracy}
            for m in metrics
        ],
    }
    _atomic_text(metrics_path, lambda fp: fp.write(json.dumps(doc, indent=2)))
    final = metrics[-1]
    log.info("trained: loss %.4f, dev accuracy %s, checkpoint %s",
             final.train_loss, final.dev_accuracy, digest[:12])
    return 0


def cmd_extract_templates(args) -> int:
    model = load_checkpoint(args.checkpoint)
    with _open_in(args.transcripts) as fp:
        transcripts = read_transcripts(fp)
    answers = []
    for t in transcripts:
        answers.extend(p.answer for p in corpus_mod.extract_positive_pairs(t))
    if not answers:
        raise ReplyRankError("no agent answers follow a customer question")
    rng = np.random.default_rng(args.seed)
    if len(answers) > args.sample:
        picks = rng.choice(len(answers), size=args.sample, replace=False)
        answers = [answers[int(i)] for i in picks]
    pool, result = build_pool(
        answers,
        model,
        KMeansConfig(k=args.k, batch_size=args.batch_size,
                     max_iters=args.max_iters, seed=args.seed),
    )
    save_pool(pool, args.out)
    log.info(
        "pool: %d templates from %d answers (inertia %.4f, %d iters)",
        len(pool.templates), len(answers), result.inertia, result.n_iters,
    )
    return 0


def cmd_curate(args) -> int:
    pool = load_pool(args.pool)
    with open(args.decisions, encoding="utf-8") as fp:
        decisions = parse_curation_file(fp.read())
    model = load_checkpoint(args.checkpoint) if args.checkpoint else None
    new_pool = curate(pool, decisions, model)
    save_pool(new_pool, args.out)
    log.info("curated pool: %d active of %d", len(new_pool.active()),
             len(new_pool.templates))
    return 0


def cmd_rank_eval(args) -> int:
    model = load_checkpoint(args.checkpoint)
    with open(os.path.join(args.data, "dev.jsonl"), encoding="utf-8") as fp:
        dev_pairs = read_pairs(fp)
    positives = [p for p in dev_pairs if p.label == 1]
    task = build_ranking_task(positives, n=args.n, seed=args.seed)
    report = run_ranking_eval(task, model, bootstrap_seed=args.seed)
    paths = emit_report(report, args.out)
    for scorer, m in sorted(report.ranking.items()):
        log.info("%s: MRR %.4f, P@3 %.4f", scorer, m.mrr, m.precision_at_3)
    log.info("report written to %s", paths["json"])
    return 0


def cmd_human_eval_report(args) -> int:
    annotations = list(read_annotations(args.store))
    if not annotations:
        raise ReplyRankError(f"annotation store {args.store} is empty")
    report = relevance_report(annotations)
    paths = emit_report(report, args.out)
    log.info("report written to %s", paths["json"])
    return 0


def cmd_serve(args) -> int:
    from .service import ServiceConfig, load_service_config, run

    if args.config:
        cfg = load_service_config(
            args.config,
            host=args.host, port=args.port,
            checkpoint_path=args.checkpoint, pool_path=args.pool,
            store_path=args.store, eval_mode=args.eval_mode or None,
            console_dir=args.console_dir,
            eval_questions_path=args.eval_questions,
        )
    else:
        cfg = ServiceConfig(
            host=args.host or "127.0.0.1",
            port=args.port or 8743,
            checkpoint_path=args.checkpoint or "",
            pool_path=args.pool or "",
            store_path=args.store or "annotations.jsonl",
            eval_mode=bool(args.eval_mode),
            console_dir=args.console_dir or "",
            eval_questions_path=args.eval_questions or "",
        )
    log.info("serving on %s:%d (eval_mode=%s)", cfg.host, cfg.port, cfg.eval_mode)
    run(cfg)
    return 0


def cmd_query(args) -> int:
    model = load_checkpoint(args.checkpoint)
    pool = load_pool(args.pool)
    index = None
    if args.scorer == TFIDF:
        active = pool.active()
        index = tfidf_fit([t.text for t in active], ids=[t.id for t in active])
    texts = {t.id: t.text for t in pool.active()}
    for line in sys.stdin:
        tokens = tuple(normalize_text(line))
        if not tokens:
            continue
        if args.scorer == DUAL_ENCODER:
            result = score_against_pool(tokens, pool, model)
        else:
            result = tfidf_rank(tokens, index)
        for position, (cid, score) in enumerate(top_k(result, args.k).ranked, 1):
            print(f"{position}\t{score:.4f}\t{' '.join(texts[cid])}")
        print(flush=True)
    return 0


# -- parser ------------------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="replyrank", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic transcript corpus")
    p.add_argument("--intents", type=int, required=True)
    p.add_argument("--transcripts", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-", help="output JSONL path or - for stdout")
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("ingest", help="transcripts -> labeled train/dev pairs")
    p.add_argument("--in", default="-", help="transcript JSONL path or - for stdin")
    p.add_argument("--neg-ratio", type=float, default=2.0)
    p.add_argument("--dev", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(fn=cmd_ingest)

    p = sub.add_parser("train", help="train the dual encoder")
    p.add_argument("--data", required=True, help="dataset directory from ingest")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--metrics", default="")
    p.add_argument("--embedding-dim", type=int, default=512)
    p.add_argument("--lstm-dim", type=int, default=512)
    p.add_argument("--mlp-layers", type=int, default=3)
    p.add_argument("--mlp-hidden", type=int, default=512)
    p.add_argument("--vocab-size", type=int, default=20000)
    p.add_argument("--share-embeddings", action="store_true")
    p.add_argument("--seq-cap", type=int, default=60)
    p.add_argument("--lr", type=float, default=0.0002)
    p.add_argument("--epochs", type=int, default=4)
    p.add_argument("--batch-size", type=int, default=256)
    p.add_argument("--clip-norm", type=float, default=5.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("extract-templates",
                       help="cluster answer embeddings into a template pool")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--transcripts", required=True,
                   help="transcript JSONL path or - for stdin")
    p.add_argument("--out", required=True, help="pool JSON path")
    p.add_argument("--k", type=int, default=50)
    p.add_argument("--sample", type=int, default=10000)
    p.add_argument("--batch-size", type=int, default=1024)
    p.add_argument("--max-iters", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_extract_templates)

    p = sub.add_parser("curate", help="apply keep/drop/edit decisions to a pool")
    p.add_argument("--pool", required=True)
    p.add_argument("--decisions", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--checkpoint", default="", help="needed for edit decisions")
    p.set_defaults(fn=cmd_curate)

    p = sub.add_parser("rank-eval",
                       help="1-correct+9-distractors ranking eval, both scorers")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True, help="dataset directory (uses dev split)")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="report directory")
    p.set_defaults(fn=cmd_rank_eval)

    p = sub.add_parser("human-eval-report",
                       help="aggregate the annotation store into a report")
    p.add_argument("--store", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_human_eval_report)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--config", default="")
    p.add_argument("--host", default=None)
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--pool", default=None)
    p.add_argument("--store", default=None)
    p.add_argument("--eval-mode", action="store_true")
    p.add_argument("--console-dir", default=None)
    p.add_argument("--eval-questions", default=None)
    p.set_defaults(fn=cmd_serve)

    p = sub.add_parser("query", help="read questions on stdin, print top answers")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--pool", required=True)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--scorer", choices=(DUAL_ENCODER, TFIDF), default=DUAL_ENCODER)
    p.set_defaults(fn=cmd_query)

    return parser


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # argparse --help or usage error
        return exc.code if isinstance(exc.code, int) else USAGE_ERROR
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    shown = {k: v for k, v in vars(args).items() if k != "fn"}
    log.info("config: %s", json.dumps(shown, default=str, sort_keys=True))
    try:
        return args.fn(args)
    except (ReplyRankError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DATA_ERROR
    except KeyboardInterrupt:
        return INTERNAL_ERROR
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {exc}", file=sys.stderr)
        return INTERNAL_ERROR


if __name__ == "__main__":
    sys.exit(main())
