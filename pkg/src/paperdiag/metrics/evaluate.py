"""Corpus evaluation: per-sample scores, corpus means and judge transcripts."""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Iterable, Optional

from ..assemble import load_samples
from ..errors import JudgeFormatError, PredictionError
from ..llm import LlmClient
from .bleu import bleu4, corpus_bleu4
from .cider import cider
from .judge import JudgeStats, cider_gpt, judge_pair
from .meteor import meteor
from .rouge import rouge_l

log = logging.getLogger(__name__)

ALL_METRICS = ("b4", "rouge", "meteor", "cider", "f1gpt")
_SCORE_KEYS = ("bleu4", "rouge_l", "meteor", "cider", "f1_gpt", "cider_gpt")


def parse_metrics(spec: str | Iterable[str]) -> tuple[str, ...]:
    items = [m.strip().lower() for m in (spec.split(",") if isinstance(spec, str) else spec) if m.strip()]
    unknown = [m for m in items if m not in ALL_METRICS]
    if unknown:
        raise ValueError(f"unknown metrics {unknown}; choose from {', '.join(ALL_METRICS)}")
    return tuple(m for m in ALL_METRICS if m in items)


def load_predictions(path: Path | str) -> dict[str, str]:
    preds: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                sid, text = rec["sample_id"], rec["prediction"]
            except (ValueError, KeyError, TypeError) as exc:
                raise PredictionError(f"{path}:{lineno}: bad prediction record ({exc})") from exc
            if sid in preds:
                raise PredictionError(f"{path}:{lineno}: duplicate sample_id {sid}")
            preds[sid] = text
    return preds


def evaluate_pairs(
    pairs: list[tuple[str, str, str]],
    metrics=ALL_METRICS,
    llm_client: Optional[LlmClient] = None,
) -> dict:
    """Score (sample_id, prediction, reference) triples."""
    metrics = parse_metrics(metrics)
    if "f1gpt" in metrics and llm_client is None:
        raise ValueError("f1gpt requires an LLM judge client")
    pairs = sorted(pairs)
    preds = [p for _, p, _ in pairs]
    refs = [r for _, _, r in pairs]
    cider_scores = cider(preds, refs)[0] if "cider" in metrics else None

    stats = JudgeStats()
    samples = []
    for i, (sid, pred, ref) in enumerate(pairs):
        scores: dict = {k: None for k in _SCORE_KEYS}
        if "b4" in metrics:
            scores["bleu4"] = bleu4(pred, ref)
        if "rouge" in metrics:
            scores["rouge_l"] = rouge_l(pred, ref)
        if "meteor" in metrics:
            scores["meteor"] = meteor(pred, ref)
        if cider_scores is not None:
            scores["cider"] = cider_scores[i]
        transcript = None
        if "f1gpt" in metrics:
            if not pred.strip():
                scores["f1_gpt"] = 0.0
            else:
                try:
                    result = judge_pair(pred, ref, llm_client, stats)
                    scores["f1_gpt"] = result.f1
                    transcript = result.transcript()
                except JudgeFormatError as exc:
                    log.warning("%s: judge output unusable (%s); excluded", sid, exc)
            if scores["f1_gpt"] is not None and scores["cider"] is not None:
                scores["cider_gpt"] = cider_gpt(scores["cider"], scores["f1_gpt"])
        samples.append({
            "sample_id": sid,
            "prediction": pred,
            "reference": ref,
            "scores": scores,
            "judge_transcript": transcript,
        })

    raw: dict = {}
    for key in _SCORE_KEYS:
        vals = [s["scores"][key] for s in samples if s["scores"][key] is not None]
        raw[key] = sum(vals) / len(vals) if vals else None
    if "b4" in metrics:
        raw["bleu4"] = corpus_bleu4(preds, refs) if pairs else 0.0
        raw["bleu4_sentence_mean"] = (sum(s["scores"]["bleu4"] for s in samples) / len(samples)) if samples else 0.0

    def scaled(key, factor):
        return None if raw.get(key) is None else raw[key] * factor

    return {
        "n_samples": len(samples),
        "metrics": list(metrics),
        "corpus": {
            "raw": raw,
            "scaled": {
                "B4": scaled("bleu4", 100),
                "R": scaled("rouge_l", 100),
                "M": scaled("meteor", 100),
                "C": scaled("cider", 1),
                "F1gpt": scaled("f1_gpt", 1),
                "Cgpt": scaled("cider_gpt", 1),
            },
        },
        "exclusions": {
            "f1_gpt": sum(1 for s in samples if "f1gpt" in metrics and s["scores"]["f1_gpt"] is None),
        },
        "judge": {"calls": stats.calls, "format_errors": stats.format_errors, "match_fallbacks": stats.match_fallbacks},
        "samples": samples,
    }


def evaluate_corpus(pred_file, dataset, metrics_selection=ALL_METRICS, llm_client: Optional[LlmClient] = None,
                    split: str = "test", tasks: Iterable[str] | None = None) -> dict:
    """Score a prediction file against one split of an emitted dataset.

    Every prediction must name a sample of the split, and every sample of the
    evaluated task(s) must have a prediction. Without ``tasks`` the task set
    is inferred from the predicted sample ids.
    """
    preds = load_predictions(pred_file) if not isinstance(pred_file, dict) else dict(pred_file)
    all_samples = load_samples(dataset, split) if not isinstance(dataset, list) else [s for s in dataset if s.split == split]
    by_id = {s.sample_id: s for s in all_samples}
    unknown = sorted(set(preds) - set(by_id))
    if unknown:
        raise PredictionError(f"{len(unknown)} predictions for unknown sample ids in split {split!r}: {unknown[:10]}")
    task_set = set(tasks) if tasks else {by_id[sid].task for sid in preds}
    wanted = [s for s in all_samples if s.task in task_set]
    missing = sorted(s.sample_id for s in wanted if s.sample_id not in preds)
    if missing:
        raise PredictionError(f"{len(missing)} samples lack predictions: {missing[:10]}")
    stray = sorted(sid for sid in preds if by_id[sid].task not in task_set)
    if stray:
        raise PredictionError(f"predictions for samples outside tasks {sorted(task_set)}: {stray[:10]}")
    report = evaluate_pairs([(s.sample_id, preds[s.sample_id], s.target) for s in wanted], metrics_selection, llm_client)
    report["split"] = split
    report["tasks"] = sorted(task_set)
    return report


def rank(report: dict, metric: str) -> list[str]:
    """Sample ids ordered best-first by a per-sample score (ties broken by id)."""
    scored = [(s["scores"][metric], s["sample_id"]) for s in report["samples"] if s["scores"][metric] is not None]
    return [sid for _, sid in sorted(scored, key=lambda x: (-x[0], x[1]))]
