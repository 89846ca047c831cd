"""Task sample assembly, instructions, paper-level splits, statistics, JSONL output."""

from __future__ import annotations

import hashlib
import json
import logging
import math
import random
import re
from collections import Counter, defaultdict
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Mapping, Optional

from .align import CONTEXT_CAP, build_context, first_reference
from .models import DiagramPayload, DocumentModel, Outline, SPLITS, TASKS, TaskSample
from .prompts import OBJECT_SLOT, instruction_families
from .tokenizer import token_count

log = logging.getLogger(__name__)

CAPTION_CAP = 256
ANALYSIS_CAP = 256
TABLE_LATEX_CAP = 256
DEFAULT_RATIOS = (0.96, 0.02, 0.02)


@dataclass(frozen=True)
class DiagramAssets:
    """What can be shown for one diagram: figure images, or a table as image and/or code."""

    figure_images: tuple[str, ...] = ()
    table_image: Optional[str] = None
    table_latex: Optional[str] = None

    @property
    def available(self) -> bool:
        return bool(self.figure_images or self.table_image or self.table_latex)


def collect_assets(
    model: DocumentModel,
    table_images: Mapping[str, str],
    figure_paths: Mapping[str, str] | None = None,
    latex_cap: int = TABLE_LATEX_CAP,
) -> dict[str, DiagramAssets]:
    """Map each diagram label to its payload options.

    ``table_images`` maps table labels to dataset-relative PNG paths;
    ``figure_paths`` maps source-relative graphics paths to dataset-relative
    ones (identity when omitted). Over-length table code is withheld.
    """
    assets = {}
    for d in model.diagrams:
        if d.kind == "figure":
            paths = tuple((figure_paths or {}).get(p, p) for p in d.graphics_paths)
            assets[d.label] = DiagramAssets(figure_images=paths)
        else:
            latex = d.latex_body if token_count(d.latex_body) <= latex_cap else None
            assets[d.label] = DiagramAssets(table_image=table_images.get(d.label), table_latex=latex)
    return assets


def make_sample_id(paper_id: str, task: str, labels: Iterable[str], target: str, variant: str = "") -> str:
    payload = json.dumps([paper_id, task, list(labels), target, variant], ensure_ascii=False)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:20]


def sample_rng(seed: int, sample_id: str, purpose: str) -> random.Random:
    """Per-sample RNG so choices do not depend on iteration order."""
    return random.Random(hashlib.sha256(f"{seed}:{purpose}:{sample_id}".encode()).digest())


# -- instructions -----------------------------------------------------------

def _family(task: str, n_diagrams: int, outline_free: bool = False) -> str:
    if task == "captioning":
        return "captioning"
    if task == "analysis":
        return "analysis_outline_free" if outline_free else "analysis"
    if task == "outline_rec":
        return "outline_rec_with_diagrams" if n_diagrams > 0 else "outline_rec_no_diagrams"
    raise ValueError(f"unknown task {task!r}")


def pick_instruction(task: str, n_diagrams: int, rng: random.Random, outline_free: bool = False) -> str:
    families = instruction_families()
    template = rng.choice(families[_family(task, n_diagrams, outline_free)])
    objects = families["objects_plural"] if n_diagrams > 1 else families["objects_singular"]
    if OBJECT_SLOT in template:
        template = template.replace(OBJECT_SLOT, rng.choice(objects))
    return template


def instruction_template_of(instruction: str) -> tuple[str, str, Optional[str]] | None:
    """Find (family, template, object word) that produced ``instruction``, or None."""
    families = instruction_families()
    objects = families["objects_singular"] + families["objects_plural"]
    alt = "|".join(sorted(map(re.escape, objects), key=len, reverse=True))
    for fam, templates in families.items():
        if fam.startswith("objects_"):
            continue
        for t in templates:
            if OBJECT_SLOT not in t:
                if t == instruction:
                    return fam, t, None
                continue
            pattern = "^" + re.escape(t).replace(re.escape(OBJECT_SLOT), f"({alt})") + "$"
            m = re.match(pattern, instruction)
            if m:
                return fam, t, m.group(1)
    return None


# -- diagrams ---------------------------------------------------------------

def _table_choice(assets: DiagramAssets, rng: random.Random, sample_id: str, balanced: bool) -> list[DiagramPayload]:
    options = []
    if assets.table_image:
        options.append(DiagramPayload("table_image", assets.table_image))
    if assets.table_latex:
        options.append(DiagramPayload("table_latex", assets.table_latex))
    if len(options) < 2:
        return options
    if balanced:
        # test split: alternate formats by sample-id parity
        return [options[int(sample_id, 16) % 2]]
    return [rng.choice(options)]


def _payloads(labels, assets: Mapping[str, DiagramAssets], rng, sample_id, balanced) -> list[DiagramPayload] | None:
    out: list[DiagramPayload] = []
    for label in labels:
        a = assets.get(label)
        if a is None or not a.available:
            return None
        if a.figure_images:
            out.extend(DiagramPayload("figure_image", p) for p in a.figure_images)
        else:
            chosen = _table_choice(a, rng, sample_id, balanced)
            if not chosen:
                return None
            out.extend(chosen)
    return out


# -- tasks ------------------------------------------------------------------

def assemble_captioning(model: DocumentModel, alignments, rendered: Mapping[str, DiagramAssets],
                        seed: int = 0, caption_cap: int = CAPTION_CAP, context_cap: int = CONTEXT_CAP) -> list[TaskSample]:
    """One sample per referenced diagram and format variant; the caption is the target.

    ``alignments`` is accepted for interface symmetry; a diagram qualifies when
    any paragraph references it.
    """
    pid = model.paper_id.arxiv_id
    samples = []
    for d in model.diagrams:
        if not d.caption or token_count(d.caption) > caption_cap:
            continue
        boundary = first_reference(model, d.label)
        if boundary is None:
            continue
        a = rendered.get(d.label)
        if a is None:
            continue
        context, _ = build_context(model, boundary, context_cap)
        variants: list[tuple[str, list[DiagramPayload]]] = []
        if d.kind == "figure":
            if a.figure_images:
                variants.append(("figure", [DiagramPayload("figure_image", p) for p in a.figure_images]))
        else:
            if a.table_image:
                variants.append(("table_image", [DiagramPayload("table_image", a.table_image)]))
            if a.table_latex:
                variants.append(("table_latex", [DiagramPayload("table_latex", a.table_latex)]))
        for variant, payloads in variants:
            sid = make_sample_id(pid, "captioning", [d.label], d.caption, variant)
            inst = pick_instruction("captioning", len(payloads), sample_rng(seed, sid, "instruction"))
            samples.append(TaskSample(sid, "captioning", pid, context, inst, d.caption, tuple(payloads)))
    return samples


def assemble_analysis(model: DocumentModel, alignments, outlines: Mapping[int, Outline],
                      rendered: Mapping[str, DiagramAssets], include_outline_free: bool = False,
                      seed: int = 0, split: Optional[str] = None,
                      analysis_cap: int = ANALYSIS_CAP) -> list[TaskSample]:
    pid = model.paper_id.arxiv_id
    samples = []
    for al in alignments:
        outline = outlines.get(al.analysis_paragraph)
        if outline is None:
            continue
        target = model.paragraphs[al.analysis_paragraph].text
        if token_count(target) > analysis_cap:
            continue
        variants = [("outline", outline.rendered)]
        if include_outline_free:
            variants.append(("outline_free", None))
        for variant, outline_text in variants:
            sid = make_sample_id(pid, "analysis", al.diagram_labels, target, variant)
            rng = sample_rng(seed, sid, "format")
            payloads = _payloads(al.diagram_labels, rendered, rng, sid, split == "test")
            if payloads is None:
                continue
            inst = pick_instruction("analysis", len(payloads), sample_rng(seed, sid, "instruction"),
                                    outline_free=outline_text is None)
            samples.append(TaskSample(sid, "analysis", pid, al.context, inst, target, tuple(payloads),
                                      outline=outline_text))
    return samples


def assemble_outline_rec(model: DocumentModel, alignments, outlines: Mapping[int, Outline], with_diagrams: bool,
                         rendered: Mapping[str, DiagramAssets] | None = None, seed: int = 0,
                         split: Optional[str] = None) -> list[TaskSample]:
    pid = model.paper_id.arxiv_id
    variant = "with_diagrams" if with_diagrams else "no_diagrams"
    samples = []
    for al in alignments:
        outline = outlines.get(al.analysis_paragraph)
        if outline is None:
            continue
        sid = make_sample_id(pid, "outline_rec", al.diagram_labels, outline.rendered, variant)
        payloads: list[DiagramPayload] = []
        if with_diagrams:
            got = _payloads(al.diagram_labels, rendered or {}, sample_rng(seed, sid, "format"), sid, split == "test")
            if got is None:
                continue
            payloads = got
        inst = pick_instruction("outline_rec", len(payloads), sample_rng(seed, sid, "instruction"))
        samples.append(TaskSample(sid, "outline_rec", pid, al.context, inst, outline.rendered, tuple(payloads)))
    return samples


# -- splits -----------------------------------------------------------------

def _split_counts(n: int, ratios) -> list[int]:
    raw = [r * n for r in ratios]
    counts = [math.floor(x) for x in raw]
    order = sorted(range(len(ratios)), key=lambda i: (-(raw[i] - counts[i]), i))
    for i in order[: n - sum(counts)]:
        counts[i] += 1
    # every split with a positive ratio gets at least one paper
    for i, r in enumerate(ratios):
        if r > 0 and counts[i] == 0:
            donor = max(range(len(counts)), key=lambda k: counts[k])
            counts[donor] -= 1
            counts[i] += 1
    return counts


def assign_splits(paper_ids: Iterable[str], ratios=DEFAULT_RATIOS, seed: int = 0) -> dict[str, str]:
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != len(SPLITS) or any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"split ratios must be three non-negative numbers summing to 1, got {ratios}")
    ids = sorted(set(paper_ids))
    needed = sum(1 for r in ratios if r > 0)
    if len(ids) < needed:
        raise ValueError(f"{len(ids)} papers cannot fill {needed} splits")
    random.Random(seed).shuffle(ids)
    out = {}
    start = 0
    for split, count in zip(SPLITS, _split_counts(len(ids), ratios)):
        for pid in ids[start:start + count]:
            out[pid] = split
        start += count
    return out


def split_dataset(samples: list[TaskSample], ratios=DEFAULT_RATIOS, seed: int = 0) -> list[TaskSample]:
    assignment = assign_splits((s.paper_id for s in samples), ratios, seed)
    return [replace(s, split=assignment[s.paper_id]) for s in samples]


# -- statistics -------------------------------------------------------------

def _type_bucket(sample: TaskSample) -> str:
    kinds = {d.kind for d in sample.diagrams}
    if not kinds:
        return "none"
    if len(kinds) > 1:
        return "mixed"
    return kinds.pop()


def _length_stats(values: list[int]) -> dict:
    if not values:
        return {"count": 0, "mean": 0.0, "max": 0}
    return {"count": len(values), "mean": sum(values) / len(values), "max": max(values)}


def compute_stats(samples: list[TaskSample]) -> dict:
    tasks = {}
    for task in TASKS:
        subset = [s for s in samples if s.task == task]
        per_split = {}
        for split in SPLITS:
            ss = [s for s in subset if s.split == split]
            per_split[split] = {"paper_count": len({s.paper_id for s in ss}), "sample_count": len(ss)}
        count_hist = Counter(len(s.diagrams) for s in subset)
        type_hist = Counter(_type_bucket(s) for s in subset)
        tasks[task] = {
            "paper_count": len({s.paper_id for s in subset}),
            "sample_count": len(subset),
            "splits": per_split,
            "diagram_count_hist": {str(k): count_hist[k] for k in sorted(count_hist)},
            "diagram_type_hist": dict(sorted(type_hist.items())),
        }
    lengths = {
        "context": [token_count(s.context) for s in samples],
        "outline": [token_count(s.outline) for s in samples if s.task == "analysis" and s.outline is not None],
        "table_latex": [token_count(d.value) for s in samples for d in s.diagrams if d.kind == "table_latex"],
        "caption": [token_count(s.target) for s in samples if s.task == "captioning"],
        "analysis": [token_count(s.target) for s in samples if s.task == "analysis"],
    }
    return {"tasks": tasks, "token_lengths": {k: _length_stats(v) for k, v in lengths.items()}}


def format_stats(report: dict) -> str:
    lines = [f"{'task':<12} {'split':<6} {'papers':>7} {'samples':>8}"]
    for task, t in report["tasks"].items():
        for split, c in t["splits"].items():
            lines.append(f"{task:<12} {split:<6} {c['paper_count']:>7} {c['sample_count']:>8}")
    lines.append("")
    lines.append(f"{'component':<12} {'mean':>8} {'max':>6}")
    for name, st in report["token_lengths"].items():
        lines.append(f"{name:<12} {st['mean']:>8.1f} {st['max']:>6}")
    return "\n".join(lines)


# -- output -----------------------------------------------------------------

def dataset_file(out_dir: Path, task: str, split: str) -> Path:
    return Path(out_dir) / task / f"{split}.jsonl"


def emit_jsonl(samples: list[TaskSample], out_dir: Path | str) -> dict[tuple[str, str], Path]:
    """Write ``<out_dir>/<task>/<split>.jsonl`` files, records sorted by (paper_id, sample_id)."""
    out_dir = Path(out_dir)
    groups: dict[tuple[str, str], list[TaskSample]] = defaultdict(list)
    for s in samples:
        if s.split is None:
            raise ValueError(f"sample {s.sample_id} has no split")
        groups[(s.task, s.split)].append(s)
    written = {}
    for (task, split), group in sorted(groups.items()):
        group.sort(key=lambda s: (s.paper_id, s.sample_id))
        path = dataset_file(out_dir, task, split)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for s in group:
                fh.write(json.dumps(s.to_dict(), ensure_ascii=False) + "\n")
        written[(task, split)] = path
    return written


def load_samples(dataset_dir: Path | str, split: Optional[str] = None, tasks: Iterable[str] | None = None) -> list[TaskSample]:
    dataset_dir = Path(dataset_dir)
    out = []
    for task in tasks or TASKS:
        for sp in [split] if split else SPLITS:
            path = dataset_file(dataset_dir, task, sp)
            if not path.exists():
                continue
            with open(path, encoding="utf-8") as fh:
                for line in fh:
                    if line.strip():
                        out.append(TaskSample.from_dict(json.loads(line)))
    return out
