"""Edit-distance scanpath similarity and correlation statistics."""

from __future__ import annotations

import math

import numpy as np
from scipy import stats as scipy_stats

from .errors import ValidationError

__all__ = ["levenshtein", "nld", "pearson"]


def levenshtein(a, b) -> int:
    """Unit-cost edit distance between two index sequences (two-row DP)."""
    a = list(a)
    b = list(b)
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, x in enumerate(a, start=1):
        cur = [i]
        for j, y in enumerate(b, start=1):
            cur.append(min(
                prev[j] + 1,            # deletion
                cur[j - 1] + 1,         # insertion
                prev[j - 1] + (x != y)  # substitution / match
            ))
        prev = cur
    return prev[-1]


def nld(a, b) -> float:
    """Edit distance normalized by the longer length; 0 = identical."""
    la, lb = len(list(a)), len(list(b))
    if la == 0 and lb == 0:
        raise ValidationError("nld undefined for two empty sequences")
    return levenshtein(a, b) / max(la, lb)


def pearson(xs, ys) -> tuple[float, float]:
    """Correlation with a two-sided p from the exact t-transform (n-2 df).

    Degenerate inputs (n < 3 or zero variance on either side) return
    (nan, nan) rather than raising; |r| = 1 returns p = 0.
    """
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValidationError(f"paired 1-d samples required, got {x.shape} vs {y.shape}")
    n = x.size
    if n < 3:
        return math.nan, math.nan
    xc = x - x.mean()
    yc = y - y.mean()
    sx = math.sqrt(float(xc @ xc))
    sy = math.sqrt(float(yc @ yc))
    if sx == 0.0 or sy == 0.0:
        return math.nan, math.nan
    r = float(xc @ yc) / (sx * sy)
    r = max(-1.0, min(1.0, r))
    if 1.0 - abs(r) < 4 * np.finfo(np.float64).eps:
        # exactly collinear data lands a few ulps shy of +-1; snap so the
        # trivial cases stay exact (this close, p underflows to 0 anyway)
        r = math.copysign(1.0, r)
    if abs(r) == 1.0:
        return r, 0.0
    t = r * math.sqrt((n - 2) / (1.0 - r * r))
    p = 2.0 * float(scipy_stats.t.sf(abs(t), df=n - 2))
    return r, p
