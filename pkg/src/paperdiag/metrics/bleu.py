"""BLEU-4: geometric mean of clipped n-gram precisions (n = 1..4) times brevity penalty."""

from __future__ import annotations

import math

from .common import ngram_counts, prep

MAX_N = 4
SMOOTH_EPS = 1e-9


def _brevity_penalty(cand_len: int, ref_len: int) -> float:
    if cand_len == 0:
        return 0.0
    if cand_len > ref_len:
        return 1.0
    return math.exp(1.0 - ref_len / cand_len)


def _clipped(cand: list[str], ref: list[str], n: int) -> tuple[int, int]:
    c = ngram_counts(cand, n)
    r = ngram_counts(ref, n)
    return sum(min(k, r[g]) for g, k in c.items()), max(len(cand) - n + 1, 0)


def bleu4(prediction: str, reference: str) -> float:
    """Sentence BLEU; zero n-gram matches are smoothed to ``1e-9``.

    A prediction sharing no unigram with the reference scores exactly 0.
    """
    cand, ref = prep(prediction), prep(reference)
    if not cand:
        return 0.0
    log_sum = 0.0
    for n in range(1, MAX_N + 1):
        match, total = _clipped(cand, ref, n)
        if match == 0:
            if n == 1:
                return 0.0
            log_sum += math.log(SMOOTH_EPS / max(total, 1))
        else:
            log_sum += math.log(match / total)
    return _brevity_penalty(len(cand), len(ref)) * math.exp(log_sum / MAX_N)


def corpus_bleu4(predictions: list[str], references: list[str]) -> float:
    """Corpus BLEU from summed raw clipped counts (no smoothing)."""
    matches = [0] * MAX_N
    totals = [0] * MAX_N
    cand_len = ref_len = 0
    for p, r in zip(predictions, references, strict=True):
        cand, ref = prep(p), prep(r)
        cand_len += len(cand)
        ref_len += len(ref)
        for n in range(1, MAX_N + 1):
            m, t = _clipped(cand, ref, n)
            matches[n - 1] += m
            totals[n - 1] += t
    if min(matches) == 0:
        return 0.0
    log_sum = sum(math.log(m / t) for m, t in zip(matches, totals))
    return _brevity_penalty(cand_len, ref_len) * math.exp(log_sum / MAX_N)
