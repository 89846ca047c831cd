from .bleu import bleu4, corpus_bleu4
from .cider import cider
from .evaluate import ALL_METRICS, evaluate_corpus, evaluate_pairs, parse_metrics, rank
from .judge import KeyPointSet, cider_gpt, extract_keypoints, f1_gpt, judge_match, judge_pair
from .meteor import meteor
from .rouge import rouge_l

__all__ = [
    "bleu4", "corpus_bleu4", "rouge_l", "meteor", "cider",
    "KeyPointSet", "extract_keypoints", "judge_match", "f1_gpt", "cider_gpt", "judge_pair",
    "ALL_METRICS", "evaluate_corpus", "evaluate_pairs", "parse_metrics", "rank",
]
