"""METEOR with exact and Porter-stem matching (no synonym stage).

score = F_mean * (1 - gamma * (chunks / matches) ** beta), with
F_mean = P * R / (alpha * P + (1 - alpha) * R).
"""

from __future__ import annotations

from functools import lru_cache

from nltk.stem.porter import PorterStemmer

from .common import prep

ALPHA = 0.9
BETA = 3.0
GAMMA = 0.5

_stemmer = PorterStemmer()


@lru_cache(maxsize=65536)
def _stem(token: str) -> str:
    return _stemmer.stem(token)


def align(cand: list[str], ref: list[str]) -> list[tuple[int, int]]:
    """Greedy unigram alignment, exact stage first, then stems.

    Within a stage a candidate token prefers the reference position right
    after its predecessor's match (keeps chunks contiguous), otherwise the
    free position starting the longest run of matching tokens (leftmost on
    ties).
    """
    matched_c: dict[int, int] = {}
    used_r: set[int] = set()
    for key in (lambda t: t, _stem):
        ck = [key(t) for t in cand]
        rk = [key(t) for t in ref]

        def run(i: int, j: int) -> int:
            n = 0
            while (i + n < len(ck) and j + n < len(rk) and ck[i + n] == rk[j + n]
                   and i + n not in matched_c and j + n not in used_r):
                n += 1
            return n

        for i, k in enumerate(ck):
            if i in matched_c:
                continue
            free = [j for j, x in enumerate(rk) if x == k and j not in used_r]
            if not free:
                continue
            prev = matched_c.get(i - 1)
            if prev is not None and prev + 1 in free:
                j = prev + 1
            else:
                j = max(free, key=lambda j: (run(i, j), -j))
            matched_c[i] = j
            used_r.add(j)
    return sorted(matched_c.items())


def count_chunks(alignment: list[tuple[int, int]]) -> int:
    if not alignment:
        return 0
    chunks = 1
    for (i0, j0), (i1, j1) in zip(alignment, alignment[1:]):
        if i1 != i0 + 1 or j1 != j0 + 1:
            chunks += 1
    return chunks


def meteor(prediction: str, reference: str, alpha: float = ALPHA, beta: float = BETA, gamma: float = GAMMA) -> float:
    cand, ref = prep(prediction), prep(reference)
    if not cand or not ref:
        return 0.0
    alignment = align(cand, ref)
    m = len(alignment)
    if m == 0:
        return 0.0
    p = m / len(cand)
    r = m / len(ref)
    f_mean = p * r / (alpha * p + (1 - alpha) * r)
    penalty = gamma * (count_chunks(alignment) / m) ** beta
    return f_mean * (1 - penalty)
