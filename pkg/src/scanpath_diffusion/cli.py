"""Command-line front end.

Subcommands: prepare, train, generate, evaluate, baseline, schedule-dump,
trace. Every subcommand accepts --config (flat key=value file) plus flag
overrides; flags win. Exit codes: 0 success, 1 bad input or usage, 2
runtime failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .baselines import TrainStats, baseline_corpus, human_baseline
from .config import ModelConfig, parse_kv_file, resolve_settings, write_kv_file
from .corpus import (Corpus, ScanpathRecord, filter_encodable, load_corpus,
                     load_predictors, load_sentences, save_corpus)
from .embedding import load_table
from .encoding import encode_instance
from .errors import ValidationError
from .inference import dump_latent_trace, generate
from .model import init_model, load_checkpoint, save_checkpoint
from .reports import evaluation_report, export_word_measures, write_evaluation_report
from .schedules import KINDS, build_schedule, dump_schedule
from .splits import MODES, load_split_plan, make_splits, save_split_plan
from .tokenization import Vocabulary, tokenize_sentence
from .training import train as run_training

log = logging.getLogger(__name__)


class _Parser(argparse.ArgumentParser):
    """argparse that exits 1 (not 2) on usage errors, per the CLI contract."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_config_flags(p: _Parser, keys) -> None:
    specs = {
        "seed": dict(type=int),
        "t_max": dict(type=int, flag="--t-max"),
        "schedule": dict(type=str, choices=list(KINDS)),
        "s": dict(type=float),
        "hidden_dim": dict(type=int, flag="--hidden-dim"),
        "d_bert": dict(type=int, flag="--d-bert"),
        "blocks": dict(type=int),
        "heads": dict(type=int),
        "max_len": dict(type=int, flag="--max-len"),
        "steps": dict(type=int),
        "batch": dict(type=int),
        "lr": dict(type=float),
        "split_mode": dict(type=str, choices=list(MODES), flag="--split-mode"),
        "folds": dict(type=int),
        "workers": dict(type=int),
        "mean_only": dict(action="store_const", const=True, flag="--mean-only"),
        "trace_stride": dict(type=int, flag="--trace-stride"),
    }
    p.add_argument("--config", help="flat key=value config file")
    for key in keys:
        spec = dict(specs[key])
        flag = spec.pop("flag", f"--{key}")
        p.add_argument(flag, dest=key, default=None, **spec)


def _settings(args, keys) -> dict:
    file_values = parse_kv_file(args.config) if args.config else None
    overrides = {key: getattr(args, key) for key in keys}
    return resolve_settings(file_values, overrides)


def _encode_training_set(corpus: Corpus, vocab: Vocabulary, max_len: int):
    kept = filter_encodable(corpus, vocab, max_len)
    toks = {sid: tokenize_sentence(words, vocab) for sid, words in kept.sentences.items()}
    instances = [
        encode_instance(toks[rec.sentence_id], rec.fixations, max_len, vocab)
        for rec in kept.records
    ]
    return kept, instances


# ---------------------------------------------------------------------------
# subcommands

def _cmd_prepare(args) -> int:
    keys = ("seed", "max_len", "split_mode", "folds")
    st = _settings(args, keys)
    vocab = Vocabulary.from_file(args.vocab)
    corpus = load_corpus(args.corpus, args.sentences)
    n_sent, n_rec = len(corpus.sentences), len(corpus.records)
    kept = filter_encodable(corpus, vocab, st["max_len"])
    plan = make_splits(kept, st["split_mode"], st["folds"], st["seed"])
    save_split_plan(plan, args.out)
    print(f"sentences kept {len(kept.sentences)}/{n_sent}, "
          f"scanpaths kept {len(kept.records)}/{n_rec}")
    for i, fold in enumerate(plan.folds):
        print(f"fold {i}: train {len(fold.train)}, test {len(fold.test)}")
    print(f"split plan written to {args.out}")
    return 0


def _cmd_train(args) -> int:
    keys = ("seed", "t_max", "schedule", "s", "hidden_dim", "d_bert", "blocks",
            "heads", "max_len", "steps", "batch", "lr")
    st = _settings(args, keys)
    vocab = Vocabulary.from_file(args.vocab)
    corpus = load_corpus(args.corpus, args.sentences)
    if args.split:
        plan = load_split_plan(args.split)
        if not 0 <= args.fold < plan.n_folds:
            raise ValidationError(f"fold {args.fold} outside 0..{plan.n_folds - 1}")
        corpus = corpus.subset(plan.folds[args.fold].train)
    kept, instances = _encode_training_set(corpus, vocab, st["max_len"])
    if not instances:
        raise ValidationError("no encodable training scanpaths")

    e_bert = None
    if args.frozen_table:
        e_bert = load_table(args.frozen_table)
        st["d_bert"] = e_bert.shape[1]
        if e_bert.shape[0] != len(vocab):
            raise ValidationError(
                f"frozen table rows {e_bert.shape[0]} != vocab size {len(vocab)}"
            )
    config = ModelConfig.from_settings(st, v_bert=len(vocab))
    rng = np.random.default_rng(st["seed"])
    model = init_model(config, rng, e_bert=e_bert)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_kv_file(st, out_dir / "config.txt")
    result = run_training(
        model, instances,
        steps=st["steps"], batch=st["batch"], lr=st["lr"], seed=st["seed"],
        weight_decay=st["weight_decay"], clip_norm=st["clip_norm"],
        sampler_history=st["sampler_history"],
        metrics_path=out_dir / "metrics.csv",
        ckpt_path=out_dir / "checkpoint.bin",
        ckpt_interval=st["ckpt_interval"],
        log_every=max(1, st["steps"] // 20) if st["steps"] else 0,
    )
    if result.aborted:
        print("training aborted on non-finite loss; last good checkpoint retained",
              file=sys.stderr)
        return 2
    print(f"trained {result.steps_done} steps on {len(instances)} scanpaths; "
          f"artifacts in {out_dir}")
    return 0


def _generate_one(index, tok, vocab, model, seed, mean_only):
    # Seed by position in the sorted sentence order, not by worker or batch
    # layout, so --workers never changes the output.
    rng = np.random.default_rng([seed, index])
    return generate(model, tok, vocab, rng=rng, mean_only=mean_only)


_WORKER_MODEL = None


def _worker_init(ckpt_path):
    global _WORKER_MODEL
    _WORKER_MODEL = load_checkpoint(ckpt_path)


def _worker_generate(job):
    sid, index, words, vocab_tokens, seed, mean_only = job
    vocab = Vocabulary.from_tokens(vocab_tokens)
    tok = tokenize_sentence(words, vocab)
    res = _generate_one(index, tok, vocab, _WORKER_MODEL, seed, mean_only)
    return sid, res.fixations, res.clamped


def _cmd_generate(args) -> int:
    keys = ("seed", "workers", "mean_only")
    st = _settings(args, keys)
    model = load_checkpoint(args.checkpoint)
    vocab = Vocabulary.from_file(args.vocab)
    sentences = load_sentences(args.sentences)

    usable: dict[str, tuple[str, ...]] = {}
    for sid in sorted(sentences):
        words = sentences[sid]
        n = len(tokenize_sentence(words, vocab).pieces)
        if n + 1 + 4 > model.config.max_len:
            log.warning("skipping sentence %s: does not fit the model frame", sid)
            continue
        usable[sid] = words

    results: dict[str, list[int]] = {}
    clamped_total = 0
    if st["workers"] > 1:
        jobs = [(sid, i, usable[sid], vocab.tokens, st["seed"], st["mean_only"])
                for i, sid in enumerate(usable)]
        with ProcessPoolExecutor(max_workers=st["workers"],
                                 initializer=_worker_init,
                                 initargs=(args.checkpoint,)) as pool:
            for sid, fixations, clamped in pool.map(_worker_generate, jobs):
                results[sid] = fixations
                clamped_total += clamped
    else:
        for i, sid in enumerate(usable):
            tok = tokenize_sentence(usable[sid], vocab)
            res = _generate_one(i, tok, vocab, model, st["seed"], st["mean_only"])
            results[sid] = res.fixations
            clamped_total += res.clamped

    out = Corpus(
        sentences=dict(usable),
        records=[ScanpathRecord("model", sid, tuple(results[sid])) for sid in results],
    )
    save_corpus(out, args.out)
    print(f"wrote {len(out.records)} scanpaths to {args.out} "
          f"({clamped_total} out-of-range indices clamped)")
    return 0


def _cmd_evaluate(args) -> int:
    _settings(args, ())  # validate --config if given
    sentences_true = load_corpus(args.true, args.sentences)
    sentences_pred = load_corpus(args.pred, args.sentences)
    report = evaluation_report(sentences_true, sentences_pred)
    print(f"mean NLD {report.mean_nld:.6f} over {len(report.nld_rows)} scanpaths")
    if args.out_dir:
        files = write_evaluation_report(report, args.out_dir)
        for name, path in files.items():
            print(f"{name}: {path}")
    if args.word_export:
        predictors = load_predictors(args.predictors) if args.predictors else None
        export_word_measures(sentences_true, args.word_export, predictors)
        print(f"word measures: {args.word_export}")
    return 0


def _cmd_baseline(args) -> int:
    keys = ("seed",)
    st = _settings(args, keys)
    corpus = load_corpus(args.corpus, args.sentences)
    if args.kind == "human":
        hb = human_baseline(corpus)
        print(f"inter-reader mean NLD {hb.mean:.6f} +- {hb.se:.6f} "
              f"over {hb.count} scanpaths")
        return 0
    stats = TrainStats.from_corpus(corpus)
    targets = load_sentences(args.target_sentences) if args.target_sentences \
        else corpus.sentences
    rng = np.random.default_rng(st["seed"])
    out = baseline_corpus(args.kind, targets, stats, rng)
    if not args.out:
        raise ValidationError("--out is required for uniform/trainlabel baselines")
    save_corpus(out, args.out)
    print(f"wrote {len(out.records)} {args.kind} scanpaths to {args.out}")
    return 0


def _cmd_schedule_dump(args) -> int:
    keys = ("t_max", "s")
    st = _settings(args, keys)
    kind = args.kind if args.kind else st["schedule"]
    sched = build_schedule(kind, st["t_max"], st["s"])
    if args.out:
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            dump_schedule(sched, fh)
        print(f"wrote schedule to {args.out}")
    else:
        dump_schedule(sched, sys.stdout)
    return 0


def _cmd_trace(args) -> int:
    keys = ("seed", "trace_stride", "mean_only")
    st = _settings(args, keys)
    model = load_checkpoint(args.checkpoint)
    vocab = Vocabulary.from_file(args.vocab)
    sentences = load_sentences(args.sentences)
    if args.sentence_id not in sentences:
        raise ValidationError(f"unknown sentence_id {args.sentence_id!r}")
    tok = tokenize_sentence(sentences[args.sentence_id], vocab)
    rng = np.random.default_rng(st["seed"])
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        res = dump_latent_trace(model, tok, vocab, fh, rng=rng,
                                stride=st["trace_stride"],
                                mean_only=st["mean_only"])
    print(f"trace written to {args.out}; decoded scanpath {res.fixations}")
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(prog="scanpath-diffusion",
                     description="Diffusion-based scanpath generation and evaluation")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("prepare", help="validate corpora and write a split plan")
    _add_config_flags(p, ("seed", "max_len", "split_mode", "folds"))
    p.add_argument("--corpus", required=True)
    p.add_argument("--sentences", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--out", required=True, help="split plan JSON path")
    p.set_defaults(func=_cmd_prepare)

    p = sub.add_parser("train", help="train a model")
    _add_config_flags(p, ("seed", "t_max", "schedule", "s", "hidden_dim", "d_bert",
                          "blocks", "heads", "max_len", "steps", "batch", "lr"))
    p.add_argument("--corpus", required=True)
    p.add_argument("--sentences", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--frozen-table", help="frozen context-table file")
    p.add_argument("--split", help="split plan JSON (train on one fold)")
    p.add_argument("--fold", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("generate", help="sample scanpaths for sentences")
    _add_config_flags(p, ("seed", "workers", "mean_only"))
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--sentences", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--out", required=True, help="predictions CSV path")
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("evaluate", help="score predictions against human data")
    _add_config_flags(p, ())
    p.add_argument("--true", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--sentences", required=True)
    p.add_argument("--out-dir", help="directory for report CSVs")
    p.add_argument("--word-export", help="per-word measure CSV path")
    p.add_argument("--predictors", help="predictor file to join into the word export")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("baseline", help="trivial baselines and inter-reader score")
    p.add_argument("kind", choices=("uniform", "trainlabel", "human"))
    _add_config_flags(p, ("seed",))
    p.add_argument("--corpus", required=True, help="source of empirical statistics")
    p.add_argument("--sentences", required=True)
    p.add_argument("--target-sentences", help="sentences to generate for (default: --sentences)")
    p.add_argument("--out", help="predictions CSV path (uniform/trainlabel)")
    p.set_defaults(func=_cmd_baseline)

    p = sub.add_parser("schedule-dump", help="emit t,beta,alpha,alpha_bar CSV")
    _add_config_flags(p, ("t_max", "s"))
    p.add_argument("--kind", choices=list(KINDS))
    p.add_argument("--out")
    p.set_defaults(func=_cmd_schedule_dump)

    p = sub.add_parser("trace", help="dump latent snapshots during one generation")
    _add_config_flags(p, ("seed", "trace_stride", "mean_only"))
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--sentences", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--sentence-id", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_trace)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ValidationError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"internal error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
