"""Label/ref alignment of diagrams with paragraphs, and context windows."""

from __future__ import annotations

import logging
from typing import Optional

from .errors import UnknownLabel
from .models import Alignment, DocumentModel
from .tokenizer import last_tokens, token_count

log = logging.getLogger(__name__)

CONTEXT_CAP = 512
PARAGRAPH_JOINER = "\n\n"


def first_reference(model: DocumentModel, label: str) -> Optional[int]:
    if label not in model.label_index:
        raise UnknownLabel(label)
    for p in model.paragraphs:
        if label in p.ref_labels:
            return p.index
    return None


def build_context(model: DocumentModel, boundary_paragraph: int, cap: int = CONTEXT_CAP) -> tuple[str, int]:
    """Longest run of whole paragraphs ending right before ``boundary_paragraph``.

    If the nearest preceding paragraph alone exceeds ``cap`` tokens, its last
    ``cap`` tokens are used instead.
    """
    if boundary_paragraph < 0:
        raise ValueError("boundary_paragraph must be >= 0")
    preceding = model.paragraphs[:boundary_paragraph]
    if not preceding:
        return "", 0
    chosen = []
    total = 0
    for p in reversed(preceding):
        if total + p.token_count > cap:
            break
        chosen.append(p)
        total += p.token_count
    if not chosen:
        text = last_tokens(preceding[-1].text, cap)
        return text, token_count(text)
    chosen.reverse()
    return PARAGRAPH_JOINER.join(p.text for p in chosen), total


def group_corefs(model: DocumentModel, cap: int = CONTEXT_CAP) -> list[Alignment]:
    """One Alignment per paragraph that references at least one known diagram."""
    first_refs: dict[str, int] = {}
    for p in model.paragraphs:
        for label in p.ref_labels:
            if label in model.label_index:
                first_refs.setdefault(label, p.index)

    alignments = []
    for p in model.paragraphs:
        if not p.ref_labels:
            continue
        labels = tuple(lbl for lbl in p.ref_labels if lbl in model.label_index)
        if not labels:
            log.debug("%s: paragraph %d references no known diagram %s",
                      model.paper_id.arxiv_id, p.index, list(p.ref_labels))
            continue
        boundary = min(first_refs[lbl] for lbl in labels)
        context, n = build_context(model, boundary, cap)
        alignments.append(Alignment(labels, boundary, p.index, context, n))
    return alignments
