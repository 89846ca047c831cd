"""Shared tokenizer used for every token count in the package.

Words (runs of ``\\w``) are tokens, and every other non-space character is a
token of its own, so ``"Fig. 2 shows"`` gives ``["Fig", ".", "2", "shows"]``.
"""

from __future__ import annotations

import re

TOKEN_RE = re.compile(r"\w+|[^\w\s]")


def tokenize(text: str) -> list[str]:
    return TOKEN_RE.findall(text)


def token_count(text: str) -> int:
    return sum(1 for _ in TOKEN_RE.finditer(text))


def last_tokens(text: str, n: int) -> str:
    """Return the suffix of ``text`` starting at its ``n``-th token from the end."""
    if n <= 0:
        return ""
    starts = [m.start() for m in TOKEN_RE.finditer(text)]
    if len(starts) <= n:
        return text.strip()
    return text[starts[-n]:].strip()
