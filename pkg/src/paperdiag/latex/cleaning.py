"""Paragraph text cleaning.

Citations are replaced by the literal token ``<cite>``; a paragraph holding
an inline ``$...$`` formula longer than 40 characters is dropped.
"""

from __future__ import annotations

import logging
import re
from typing import Optional

from .texutils import _escaped

log = logging.getLogger(__name__)

CITE_TOKEN = "<cite>"
MAX_INLINE_MATH_CHARS = 40

CITE_COMMANDS = (
    "cite", "citep", "citet", "citealp", "citealt", "citeauthor", "citeyear",
    "Cite", "Citep", "Citet", "Citealp",
)
_CITE_RE = re.compile(
    r"\\(?:" + "|".join(CITE_COMMANDS) + r")\*?(?![A-Za-z@])\s*(?:\[[^\[\]]*\]\s*){0,2}\{[^{}]*\}"
)
# anything that still looks like an opening citation after substitution
_CITE_LEFTOVER_RE = re.compile(r"\\cite[A-Za-z]*\*?\s*[\[{]")

DISPLAY_ENVS = (
    "equation", "equation*", "align", "align*", "gather", "gather*", "multline",
    "multline*", "eqnarray", "eqnarray*", "displaymath", "flalign", "flalign*",
)
_DISPLAY_RE = re.compile(
    r"\\begin\{(" + "|".join(re.escape(e) for e in DISPLAY_ENVS) + r")\}.*?\\end\{\1\}"
    r"|\\\[.*?\\\]"
    r"|\$\$.*?\$\$",
    re.S,
)


class UnterminatedMath(ValueError):
    pass


def inline_math_spans(text: str) -> list[str]:
    """Interiors of ``$...$`` spans in order; ``$$...$$`` display math is skipped.

    Raises UnterminatedMath when a ``$`` has no partner.
    """
    spans = []
    i = 0
    n = len(text)
    while i < n:
        c = text[i]
        if c == "$" and not _escaped(text, i):
            if i + 1 < n and text[i + 1] == "$":
                close = text.find("$$", i + 2)
                if close < 0:
                    raise UnterminatedMath("unterminated $$")
                i = close + 2
                continue
            j = i + 1
            while j < n and not (text[j] == "$" and not _escaped(text, j)):
                j += 1
            if j >= n:
                raise UnterminatedMath("unterminated $")
            spans.append(text[i + 1:j])
            i = j + 1
            continue
        i += 1
    return spans


def replace_citations(text: str) -> str:
    return _CITE_RE.sub(CITE_TOKEN, text)


def is_display_math_only(text: str) -> bool:
    return bool(_DISPLAY_RE.search(text)) and _DISPLAY_RE.sub("", text).strip() == ""


def clean_paragraph(raw: str) -> Optional[str]:
    """Clean one paragraph; returns None when the paragraph must be dropped."""
    text = " ".join(replace_citations(raw).split())
    if _CITE_LEFTOVER_RE.search(text):
        log.warning("dropping paragraph with malformed citation: %.60r", text)
        return None
    try:
        spans = inline_math_spans(_DISPLAY_RE.sub(" ", text))
    except UnterminatedMath:
        log.warning("dropping paragraph with unterminated math: %.60r", text)
        return None
    if any(len(s) > MAX_INLINE_MATH_CHARS for s in spans):
        return None
    if is_display_math_only(text):
        return None
    return text
