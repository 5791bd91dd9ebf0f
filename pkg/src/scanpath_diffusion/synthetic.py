"""Seeded synthetic corpora with rule-generated readers.

Used by the acceptance suite and the demos: small sentences over a closed
word pool, read by two deterministic simulated readers: one strictly
progressive, one progressive with a one-word regression after every third
word. The scanpath a sentence gets is a pure function of its length, which
makes memorization well-defined and checkable.
"""

from __future__ import annotations

import numpy as np

from .corpus import Corpus, ScanpathRecord
from .errors import ValidationError

__all__ = ["progressive_path", "regressive_path", "synthetic_corpus", "WORD_POOL"]

WORD_POOL = tuple(
    f"{a}{b}" for a in ("ba", "de", "fi", "go", "hu", "ka", "lo", "me")
    for b in ("la", "on", "ri")
)


def progressive_path(word_count: int) -> list[int]:
    """Strict left-to-right read: one fixation per word."""
    if word_count < 1:
        raise ValidationError(f"word count must be >= 1, got {word_count}")
    return list(range(1, word_count + 1))


def regressive_path(word_count: int, every: int = 3) -> list[int]:
    """Left-to-right read that regresses one word after every `every` words."""
    if word_count < 1:
        raise ValidationError(f"word count must be >= 1, got {word_count}")
    path = []
    for w in range(1, word_count + 1):
        path.append(w)
        if w % every == 0 and w >= 2:
            path.append(w - 1)
            path.append(w)
    return path


def synthetic_corpus(n_sentences: int = 32, min_words: int = 5,
                     max_words: int = 10, seed: int = 0) -> Corpus:
    """Sentences of uniform random length over the pool, two readers each."""
    if not 1 <= min_words <= max_words:
        raise ValidationError(f"bad word-count range {min_words}..{max_words}")
    rng = np.random.default_rng(seed)
    sentences: dict[str, tuple[str, ...]] = {}
    records: list[ScanpathRecord] = []
    for i in range(n_sentences):
        sid = f"s{i:02d}"
        m = int(rng.integers(min_words, max_words + 1))
        words = tuple(WORD_POOL[int(k)] for k in rng.integers(0, len(WORD_POOL), size=m))
        sentences[sid] = words
        records.append(ScanpathRecord("r1", sid, tuple(progressive_path(m))))
        records.append(ScanpathRecord("r2", sid, tuple(regressive_path(m))))
    return Corpus(sentences=sentences, records=records)
