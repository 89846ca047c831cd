"""CIDEr-D style consensus score over a single-reference corpus.

For each n in 1..4 the candidate and reference are TF-IDF weighted n-gram
vectors (document frequencies from the corpus references); similarity is the
clipped dot product ``sum min(c, r) * r`` over the vector norms, damped by a
Gaussian length penalty. The mean over n is scaled by 10.
"""

from __future__ import annotations

import logging
import math
from collections import Counter

from .common import ngram_counts, prep

log = logging.getLogger(__name__)

MAX_N = 4
SIGMA = 6.0


def _vectors(tokens: list[str], df: Counter, log_n: float):
    vecs, norms = [], []
    for n in range(1, MAX_N + 1):
        vec = {g: tf * (log_n - math.log(max(1.0, df[g]))) for g, tf in ngram_counts(tokens, n).items()}
        vecs.append(vec)
        norms.append(math.sqrt(sum(v * v for v in vec.values())))
    return vecs, norms


def cider(predictions: list[str], references: list[str], sigma: float = SIGMA) -> tuple[list[float], float]:
    """Per-sample scores and their mean."""
    if len(predictions) != len(references):
        raise ValueError("predictions and references must be parallel lists")
    if not references:
        return [], 0.0
    ref_toks = [prep(r) for r in references]
    df: Counter = Counter()
    for toks in ref_toks:
        for n in range(1, MAX_N + 1):
            df.update(ngram_counts(toks, n).keys())
    log_n = math.log(float(len(references)))
    if log_n == 0.0:
        log.warning("degenerate CIDEr corpus (one reference): every idf is 0")

    scores = []
    for pred, rtoks in zip(predictions, ref_toks):
        ptoks = prep(pred)
        pv, pn = _vectors(ptoks, df, log_n)
        rv, rn = _vectors(rtoks, df, log_n)
        delta = float(len(ptoks) - len(rtoks))
        total = 0.0
        for n in range(MAX_N):
            val = sum(min(w, rv[n].get(g, 0.0)) * rv[n].get(g, 0.0) for g, w in pv[n].items())
            if pn[n] != 0 and rn[n] != 0:
                val /= pn[n] * rn[n]
            else:
                val = 0.0
            total += val * math.exp(-(delta ** 2) / (2 * sigma ** 2))
        scores.append(total / MAX_N * 10.0)
    return scores, sum(scores) / len(scores)
