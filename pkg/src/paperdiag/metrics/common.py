from __future__ import annotations

from collections import Counter

from ..tokenizer import tokenize


def prep(text: str) -> list[str]:
    """Lowercase and tokenize with the shared tokenizer."""
    return tokenize(text.lower())


def ngram_counts(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))
