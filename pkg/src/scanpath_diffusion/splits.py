"""Deterministic cross-validation splits over readers and/or sentences.

Three holdout modes:

  new_sentence             test folds hold out sentences, readers shared
  new_reader               test folds hold out readers, sentences shared
  new_reader_new_sentence  fold i holds out reader chunk i AND sentence
                           chunk i; test records pair a held-out reader
                           with a held-out sentence, and train records use
                           neither (mixed records are discarded)

Unit ids are sorted lexicographically, shuffled with a seeded generator,
and cut into near-equal contiguous chunks, so a (corpus, mode, k, seed)
tuple always yields the same plan.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np

from .corpus import Corpus
from .errors import ValidationError

log = logging.getLogger(__name__)

MODES = ("new_sentence", "new_reader", "new_reader_new_sentence")

Key = tuple[str, str]


@dataclass(frozen=True)
class Fold:
    test_readers: tuple[str, ...]
    test_sentences: tuple[str, ...]
    train: tuple[Key, ...]
    test: tuple[Key, ...]


@dataclass(frozen=True)
class SplitPlan:
    mode: str
    seed: int
    n_folds: int
    folds: tuple[Fold, ...]


def _chunks(ids, k: int, rng) -> list[list[str]]:
    ids = sorted(ids)
    if len(ids) < k:
        raise ValidationError(f"cannot make {k} folds from {len(ids)} units")
    order = rng.permutation(len(ids))
    shuffled = [ids[i] for i in order]
    return [list(part) for part in np.array_split(shuffled, k)]


def make_splits(corpus: Corpus, mode: str, k: int, seed: int) -> SplitPlan:
    """Build a k-fold split plan for the given holdout mode."""
    if mode not in MODES:
        raise ValidationError(f"unknown split mode {mode!r}; expected one of {MODES}")
    if k < 2:
        raise ValidationError(f"need at least 2 folds, got {k}")
    if not corpus.records:
        raise ValidationError("cannot split an empty corpus")
    rng = np.random.default_rng(seed)
    keys = [(rec.reader_id, rec.sentence_id) for rec in corpus.records]
    sentence_ids = {rec.sentence_id for rec in corpus.records}
    reader_ids = corpus.readers

    if mode == "new_sentence":
        sent_chunks = _chunks(sentence_ids, k, rng)
        reader_chunks = [[] for _ in range(k)]
    elif mode == "new_reader":
        reader_chunks = _chunks(reader_ids, k, rng)
        sent_chunks = [[] for _ in range(k)]
    else:
        reader_chunks = _chunks(reader_ids, k, rng)
        sent_chunks = _chunks(sentence_ids, k, rng)

    folds = []
    for i in range(k):
        held_r = set(reader_chunks[i])
        held_s = set(sent_chunks[i])
        if mode == "new_sentence":
            test = [key for key in keys if key[1] in held_s]
            train = [key for key in keys if key[1] not in held_s]
        elif mode == "new_reader":
            test = [key for key in keys if key[0] in held_r]
            train = [key for key in keys if key[0] not in held_r]
        else:
            test = [key for key in keys if key[0] in held_r and key[1] in held_s]
            train = [key for key in keys if key[0] not in held_r and key[1] not in held_s]
        if not test:
            log.warning("fold %d has an empty test set", i)
        folds.append(Fold(
            test_readers=tuple(sorted(held_r)),
            test_sentences=tuple(sorted(held_s)),
            train=tuple(train),
            test=tuple(test),
        ))
    return SplitPlan(mode=mode, seed=seed, n_folds=k, folds=tuple(folds))


def save_split_plan(plan: SplitPlan, path) -> None:
    doc = {
        "mode": plan.mode,
        "seed": plan.seed,
        "n_folds": plan.n_folds,
        "folds": [
            {
                "test_readers": list(f.test_readers),
                "test_sentences": list(f.test_sentences),
                "train": [list(key) for key in f.train],
                "test": [list(key) for key in f.test],
            }
            for f in plan.folds
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_split_plan(path) -> SplitPlan:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    try:
        folds = tuple(
            Fold(
                test_readers=tuple(f["test_readers"]),
                test_sentences=tuple(f["test_sentences"]),
                train=tuple((r, s) for r, s in f["train"]),
                test=tuple((r, s) for r, s in f["test"]),
            )
            for f in doc["folds"]
        )
        return SplitPlan(mode=doc["mode"], seed=doc["seed"], n_folds=doc["n_folds"], folds=folds)
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"{path}: malformed split plan ({exc})") from exc
