"""Outline generation by in-context prompting."""

from __future__ import annotations

import hashlib
import logging
import random
import re

from .errors import EmptyOutline, LlmTransportError, OutlineUnavailable
from .llm import LlmClient
from .models import Outline
from .prompts import render_outline_prompt
from .tokenizer import token_count

log = logging.getLogger(__name__)

OUTLINE_CAP = 126
MAX_KEYPOINTS = 10
STYLES = ("concise", "keypoints")

_NUMBERED = re.compile(r"^\s*\d+\.\s*(.+?)\s*$")


def parse_outline_response(style: str, text: str) -> list[str]:
    stripped = text.strip()
    if not stripped:
        raise EmptyOutline("empty outline response")
    if style == "keypoints":
        points = [m.group(1) for line in stripped.splitlines() if (m := _NUMBERED.match(line))]
        if points:
            return points
    return [stripped]


def render_points(style: str, points) -> str:
    if style == "keypoints":
        return "\n".join(f"{i}. {p}" for i, p in enumerate(points, 1))
    return "\n".join(points)


def choose_style(seed: int, key: str) -> str:
    """Seeded, order-independent uniform choice between the two outline styles."""
    digest = hashlib.sha256(f"{seed}:{key}".encode()).digest()
    return random.Random(digest).choice(STYLES)


def _violation(style: str, points: list[str], rendered: str, analysis_tokens: int | None, cap: int) -> str | None:
    if style == "keypoints" and not 1 <= len(points) <= MAX_KEYPOINTS:
        return f"{len(points)} key points"
    n = token_count(rendered)
    if n > cap:
        return f"{n} tokens > {cap}"
    if analysis_tokens is not None and n >= analysis_tokens:
        return f"outline ({n} tokens) not shorter than its paragraph ({analysis_tokens})"
    return None


def build_outline(paragraph: str, style: str, llm_client: LlmClient, cap: int = OUTLINE_CAP) -> Outline:
    """Prompt, parse and validate; one regeneration on an invalid outline."""
    prompt = render_outline_prompt(style, paragraph)
    analysis_tokens = token_count(paragraph)
    problem = "no attempt"
    for attempt in range(2):
        try:
            resp = llm_client.complete(prompt, refresh=attempt > 0)
        except LlmTransportError as exc:
            raise OutlineUnavailable(str(exc)) from exc
        try:
            points = parse_outline_response(style, resp.text)
        except EmptyOutline as exc:
            problem = str(exc)
            continue
        rendered = render_points(style, points)
        problem = _violation(style, points, rendered, analysis_tokens, cap)
        if problem is None:
            return Outline(style, tuple(points), rendered, token_count(rendered))
        log.info("rejecting outline (%s), attempt %d", problem, attempt + 1)
    raise OutlineUnavailable(problem)
