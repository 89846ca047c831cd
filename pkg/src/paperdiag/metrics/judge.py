"""LLM-judged semantic F1 over key points, and its product with CIDEr."""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field

from ..errors import JudgeFormatError
from ..llm import LlmClient
from ..prompts import render_keypoint_prompt, render_match_prompt

log = logging.getLogger(__name__)

MAX_POINTS = 10
PRED_HEADER = "the main points of the predicted text:"
GT_HEADER = "the main points of the ground truth text:"

_NUMBERED = re.compile(r"^\s*\d+[.)]\s*(.+?)\s*$")


@dataclass(frozen=True)
class KeyPointSet:
    points: tuple[str, ...]
    source: str  # "prediction" | "ground_truth"

    def __post_init__(self):
        if not 1 <= len(self.points) <= MAX_POINTS:
            raise ValueError(f"key point set must hold 1..{MAX_POINTS} points, got {len(self.points)}")


@dataclass
class JudgeStats:
    format_errors: int = 0
    match_fallbacks: int = 0
    calls: int = 0


@dataclass
class JudgeResult:
    precision: float
    recall: float
    f1: float
    pred_points: list[str] = field(default_factory=list)
    gt_points: list[str] = field(default_factory=list)
    match_matrix: list[list[bool]] = field(default_factory=list)

    def transcript(self) -> dict:
        return {"pred_points": self.pred_points, "gt_points": self.gt_points, "match_matrix": self.match_matrix}


def _normalise_header(line: str) -> str:
    return re.sub(r"[*#_]+", "", line).strip().lower()


def parse_keypoints(text: str) -> tuple[list[str], list[str]]:
    """Split a key-point extraction response into (predicted, ground-truth) points."""
    sections: dict[str, list[str]] = {}
    current = None
    for line in text.splitlines():
        head = _normalise_header(line)
        if head.startswith(PRED_HEADER):
            current = "pred"
            sections.setdefault(current, [])
            line = head[len(PRED_HEADER):]
        elif head.startswith(GT_HEADER):
            current = "gt"
            sections.setdefault(current, [])
            line = head[len(GT_HEADER):]
        if current is None:
            continue
        m = _NUMBERED.match(line)
        if m:
            sections[current].append(m.group(1))
    for key, name in (("pred", "predicted"), ("gt", "ground truth")):
        if key not in sections:
            raise JudgeFormatError(f"missing header for {name} text")
        if not sections[key]:
            raise JudgeFormatError(f"no points under the {name} header")
    return sections["pred"], sections["gt"]


def extract_keypoints(prediction: str, reference: str, llm_client: LlmClient, stats: JudgeStats | None = None):
    if not prediction.strip() or not reference.strip():
        raise ValueError("prediction and reference must be non-empty")
    prompt = render_keypoint_prompt(prediction, reference)
    error = None
    for attempt in range(2):
        if stats is not None:
            stats.calls += 1
        resp = llm_client.complete(prompt, max_tokens=1024, refresh=attempt > 0)
        try:
            pred, gt = parse_keypoints(resp.text)
        except JudgeFormatError as exc:
            error = exc
            continue
        if len(pred) > MAX_POINTS or len(gt) > MAX_POINTS:
            log.warning("judge returned more than %d points; truncating", MAX_POINTS)
        return (
            KeyPointSet(tuple(pred[:MAX_POINTS]), "prediction"),
            KeyPointSet(tuple(gt[:MAX_POINTS]), "ground_truth"),
        )
    if stats is not None:
        stats.format_errors += 1
    raise JudgeFormatError(f"key point extraction failed twice: {error}")


def judge_match(pred_point: str, gt_point: str, llm_client: LlmClient, stats: JudgeStats | None = None) -> bool:
    if not pred_point.strip() or not gt_point.strip():
        raise ValueError("points must be non-empty")
    prompt = render_match_prompt(pred_point, gt_point)
    for attempt in range(2):
        if stats is not None:
            stats.calls += 1
        answer = llm_client.complete(prompt, max_tokens=8, refresh=attempt > 0).text.strip().lower()
        if answer.startswith("yes"):
            return True
        if answer.startswith("no"):
            return False
    log.warning("unparseable match verdict for %.40r / %.40r; counting as mismatch", pred_point, gt_point)
    if stats is not None:
        stats.match_fallbacks += 1
    return False


def f1_gpt(pred_points, gt_points, match_matrix) -> tuple[float, float, float]:
    if not pred_points or not gt_points:
        raise ValueError("point sets must be non-empty")
    if len(match_matrix) != len(pred_points) or any(len(row) != len(gt_points) for row in match_matrix):
        raise ValueError("match_matrix must be |pred| x |gt|")
    matched_pred = sum(1 for row in match_matrix if any(row))
    matched_gt = sum(1 for j in range(len(gt_points)) if any(row[j] for row in match_matrix))
    p = matched_pred / len(pred_points)
    r = matched_gt / len(gt_points)
    f1 = 0.0 if p + r == 0 else 2 * p * r / (p + r)
    return p, r, f1


def cider_gpt(cider_score: float, f1: float) -> float:
    if cider_score < 0 or not 0 <= f1 <= 1:
        raise ValueError("cider must be >= 0 and f1 in [0, 1]")
    return cider_score * f1


def judge_pair(prediction: str, reference: str, llm_client: LlmClient, stats: JudgeStats | None = None) -> JudgeResult:
    """Key point extraction, then one match call per (predicted, ground-truth) pair."""
    pred_set, gt_set = extract_keypoints(prediction, reference, llm_client, stats)
    matrix = [[judge_match(p, g, llm_client, stats) for g in gt_set.points] for p in pred_set.points]
    p, r, f1 = f1_gpt(pred_set.points, gt_set.points, matrix)
    return JudgeResult(p, r, f1, list(pred_set.points), list(gt_set.points), matrix)
