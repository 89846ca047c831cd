"""Prompt and instruction templates shipped as package data."""

from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources

PARAGRAPH_SLOT = "[Paragraph]"
MAIN_POINTS_SLOT = " [Main Points]"
PREDICTION_SLOT = "[Prediction]"
GROUND_TRUTH_SLOT = "[Ground Truth]"
PRED_POINT_SLOT = "[Predicted Point]"
GT_POINT_SLOT = "[GT Point]"
OBJECT_SLOT = "[object]"

OUTLINE_TEMPLATES = {"concise": "concise_outline.txt", "keypoints": "keypoints_outline.txt"}


@lru_cache(maxsize=None)
def load_template(name: str) -> str:
    text = resources.files("paperdiag").joinpath("templates", name).read_text(encoding="utf-8")
    return text[:-1] if text.endswith("\n") else text


@lru_cache(maxsize=None)
def instruction_families() -> dict[str, tuple[str, ...]]:
    families = {}
    for name in ("instructions.json", "instructions_outline_free.json"):
        raw = json.loads(resources.files("paperdiag").joinpath("templates", name).read_text(encoding="utf-8"))
        families.update({k: tuple(v) for k, v in raw.items()})
    return families


def render_outline_prompt(style: str, paragraph: str) -> str:
    if not paragraph or not paragraph.strip():
        raise ValueError("paragraph must be non-empty")
    try:
        template = load_template(OUTLINE_TEMPLATES[style])
    except KeyError:
        raise ValueError(f"unknown outline style {style!r}") from None
    # the completion slot is left for the model to fill
    template = template.replace(MAIN_POINTS_SLOT, "")
    head, sep, tail = template.rpartition(PARAGRAPH_SLOT)
    return head + paragraph + tail


def render_keypoint_prompt(prediction: str, reference: str) -> str:
    template = load_template("keypoint_extraction.txt")
    head, _, tail = template.rpartition(PREDICTION_SLOT)
    tail = tail.replace(GROUND_TRUTH_SLOT, reference)
    return head + prediction + tail


def render_match_prompt(pred_point: str, gt_point: str) -> str:
    template = load_template("semantic_match.txt")
    head, _, tail = template.rpartition(PRED_POINT_SLOT)
    tail = tail.replace(GT_POINT_SLOT, gt_point)
    return head + pred_point + tail
