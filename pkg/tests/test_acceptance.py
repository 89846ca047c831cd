"""Acceptance criteria 1-9. Each test records one PASS/FAIL line, printed in the terminal summary."""

from __future__ import annotations

import collections
import json
import math
import random

import pymupdf
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

import oracles
from conftest import ACCEPTANCE, run_fixture
from fixture_oracle import CORPUS, EXPECTED_COUNTS, PAPERS, SPLITS_SEED0, expected_samples, signature
from stubs import judge_client

from paperdiag.latex import clean_paragraph, inline_math_spans, parse_latex
from paperdiag.metrics import bleu4, cider, cider_gpt, evaluate_pairs, f1_gpt, judge_pair, meteor, rank, rouge_l
from paperdiag.models import PaperId, PaperSource
from paperdiag.pipeline import discover_sources
from paperdiag.prompts import OBJECT_SLOT, instruction_families
from paperdiag.render import BBox, compile_pdf, detect_table_bbox, isolate_tables, page_text, rasterize_page
from paperdiag.tokenizer import token_count, tokenize

CONTEXT_CAP = 512
LONG_MATH = 40


def record(n: int, problems: list[str], detail: str) -> None:
    ok = not problems
    ACCEPTANCE[n] = (ok, detail if ok else f"{detail}; {len(problems)} problem(s), first: {problems[0]}")
    assert ok, "\n".join(problems[:20])


# -- 1 ----------------------------------------------------------------------

def test_criterion_1_fixture_oracle(fixture_build):
    problems = []
    if fixture_build.status != 0:
        problems.append(f"pipeline status {fixture_build.status}")
    got = collections.Counter(signature(s) for s in fixture_build.samples)
    want = collections.Counter(expected_samples(outline_free=True))
    problems += [f"unexpected sample {x[:3]}" for x in (got - want)]
    problems += [f"missing sample {x[:3]}" for x in (want - got)]
    counts = collections.Counter(s.task for s in fixture_build.samples)
    if dict(counts) != EXPECTED_COUNTS:
        problems.append(f"counts {dict(counts)} != {EXPECTED_COUNTS}")
    splits = {s.paper_id: s.split for s in fixture_build.samples}
    if splits != SPLITS_SEED0:
        problems.append(f"splits {splits}")
    if fixture_build.elapsed >= 60:
        problems.append(f"runtime {fixture_build.elapsed:.1f}s")
    record(1, problems, f"{sum(counts.values())} samples match the oracle, splits exact, "
                        f"runtime {fixture_build.elapsed:.2f}s < 60s")


# -- 2 ----------------------------------------------------------------------

_CITE_CMDS = ["\\cite{a}", "\\cite{a,b}", "\\citep{x2020}", "\\citet{y}", "\\citep[p.~3]{z}",
              "\\citet*{w}", "\\citealp[see][]{q}", "\\Citep{k}"]
_WORDS = ["the", "model", "results", "we", "show", "accuracy", "Figure~\\ref{fig:a}", "is", "large", "(a)"]


def _math(n: int) -> str:
    body = "".join("abcxyz+-="[i % 9] for i in range(n))
    return f"${body}$"


piece = st.one_of(
    st.sampled_from(_WORDS),
    st.sampled_from(_CITE_CMDS).map(lambda c: ("cite", c)),
    st.integers(1, 80).map(lambda n: ("math", n)),
)


def _compose(pieces) -> tuple[str, int, int]:
    text, cites, longest = [], 0, 0
    for p in pieces:
        if isinstance(p, tuple) and p[0] == "cite":
            text.append(p[1])
            cites += 1
        elif isinstance(p, tuple):
            text.append(_math(p[1]))
            longest = max(longest, p[1])
        else:
            text.append(p)
    return " ".join(text), cites, longest


_FUZZ_STATS = collections.Counter()


@settings(max_examples=1000, derandomize=True, deadline=None, suppress_health_check=list(HealthCheck))
@given(st.lists(piece, min_size=1, max_size=12))
def _fuzz_clean(pieces):
    raw, cites, longest = _compose(pieces)
    out = clean_paragraph(raw)
    _FUZZ_STATS["cases"] += 1
    if longest > LONG_MATH:
        _FUZZ_STATS["long_math"] += 1
        assert out is None, raw
        return
    assert out is not None, raw
    assert "\\cite" not in out and "\\Cite" not in out, out
    assert out.count("<cite>") == cites, out
    assert all(len(s) <= LONG_MATH for s in inline_math_spans(out)), out
    if cites:
        _FUZZ_STATS["cites"] += 1


def _emitted_ok(text: str) -> str | None:
    if "\\cite{" in text:
        return "contains \\cite{"
    try:
        spans = inline_math_spans(text)
    except ValueError:
        return "unbalanced math"
    if any(len(s) > LONG_MATH for s in spans):
        return "long inline math"
    return None


def test_criterion_2_cleaning(fixture_build, tmp_path):
    problems = []
    try:
        _fuzz_clean()
    except AssertionError as exc:
        problems.append(f"fuzz: {exc}")
    # fuzzed paragraphs also go through the full parser, embedded in a document
    rng = random.Random(7)
    paras = []
    for _ in range(200):
        pieces = [rng.choice(_WORDS) for _ in range(rng.randint(1, 6))]
        if rng.random() < 0.5:
            pieces.insert(rng.randint(0, len(pieces)), rng.choice(_CITE_CMDS))
        if rng.random() < 0.3:
            pieces.insert(rng.randint(0, len(pieces)), _math(rng.randint(1, 80)))
        paras.append(" ".join(pieces + ["end."]))
    root = tmp_path / "fuzzdoc"
    root.mkdir()
    (root / "main.tex").write_text("\\documentclass{article}\n\\begin{document}\n" + "\n\n".join(paras)
                                   + "\n\\end{document}\n", encoding="utf-8")
    model = parse_latex((root / "main.tex").read_text(), PaperSource(PaperId("9999.00001"), root))
    emitted = [p.text for p in model.paragraphs]
    for pid in PAPERS:
        emitted += [p.text for p in fixture_build.model(pid).paragraphs]
    for s in fixture_build.samples:
        emitted += [s.target, s.context]
    for text in emitted:
        why = _emitted_ok(text)
        if why:
            problems.append(f"{why}: {text[:60]!r}")
    if _FUZZ_STATS["cases"] < 1000 or not _FUZZ_STATS["long_math"] or not _FUZZ_STATS["cites"]:
        problems.append(f"fuzz coverage too thin: {dict(_FUZZ_STATS)}")
    record(2, problems, f"{_FUZZ_STATS['cases']} fuzzed paragraphs ({_FUZZ_STATS['cites']} with citations "
                        f"transformed, {_FUZZ_STATS['long_math']} with long math dropped) and "
                        f"{len(emitted)} emitted texts clean")


# -- 3 ----------------------------------------------------------------------

def _labels_of(sample, model, analysis_by_outline) -> list[str]:
    known = set(model.label_index)
    if sample.task == "captioning":
        return [d.label for d in model.diagrams if d.caption == sample.target]
    if sample.task == "analysis":
        para = next(p for p in model.paragraphs if p.text == sample.target)
        return [lbl for lbl in para.ref_labels if lbl in known]
    return _labels_of(analysis_by_outline[(sample.paper_id, sample.target, sample.context)], model, {})


def test_criterion_3_context_cap(fixture_build):
    problems = []
    analysis_by_outline = {(s.paper_id, s.outline, s.context): s for s in fixture_build.samples
                           if s.task == "analysis" and s.outline}
    checked = 0
    for s in fixture_build.samples:
        model = fixture_build.model(s.paper_id)
        paras = [p.text for p in model.paragraphs]
        counts = [token_count(t) for t in paras]
        labels = _labels_of(s, model, analysis_by_outline)
        first = {lbl: next(p.index for p in model.paragraphs if lbl in p.ref_labels) for lbl in labels}
        b = min(first.values())
        n = token_count(s.context)
        checked += 1
        if n > CONTEXT_CAP:
            problems.append(f"{s.sample_id}: {n} tokens")
            continue
        if b == 0:
            if s.context:
                problems.append(f"{s.sample_id}: context before the first paragraph")
            continue
        if counts[b - 1] > CONTEXT_CAP:
            # fallback: the nearest paragraph alone is too long, its tail is used
            want = " ".join(tokenize(paras[b - 1])[-CONTEXT_CAP:])
            if " ".join(tokenize(s.context)) != want or n != CONTEXT_CAP:
                problems.append(f"{s.sample_id}: bad truncated context")
            continue
        starts = [i for i in range(b) if "\n\n".join(paras[i:b]) == s.context]
        if not starts:
            problems.append(f"{s.sample_id}: context is not the run of paragraphs before {b}")
            continue
        i = starts[0]
        if i > 0 and sum(counts[i - 1:b]) <= CONTEXT_CAP:
            problems.append(f"{s.sample_id}: context not maximal, paragraph {i - 1} still fits")
    record(3, problems, f"{checked} contexts within {CONTEXT_CAP} tokens and maximal")


# -- 4 ----------------------------------------------------------------------

def _synthetic_page(rng: random.Random, path) -> BBox:
    """One letter page with a ruled table at a random spot and a folio; returns its pixel box at 144 dpi."""
    doc = pymupdf.open()
    page = doc.new_page(width=612, height=792)
    w, h = rng.uniform(350, 468), rng.uniform(100, 300)
    x0, y0 = rng.uniform(72, 540 - w), rng.uniform(72, 720 - h)
    rows, cols = rng.randint(3, 8), rng.randint(2, 5)
    lw = 0.8
    grid = rng.random() < 0.5
    for r in range(rows + 1):
        if grid or r in (0, 1, rows):
            y = y0 + h * r / rows
            page.draw_line((x0, y), (x0 + w, y), width=lw)
    if grid:
        for c in range(cols + 1):
            x = x0 + w * c / cols
            page.draw_line((x, y0), (x, y0 + h), width=lw)
    for r in range(rows):
        for c in range(cols):
            page.insert_text((x0 + w * c / cols + 4, y0 + h * (r + 0.7) / rows), f"v{r}{c}", fontsize=8)
    page.insert_text((300, 770), "7", fontsize=9)  # folio in the bottom margin
    doc.save(path)
    doc.close()
    s = 2.0
    return BBox(math.floor((x0 - lw / 2) * s), math.floor((y0 - lw / 2) * s),
                math.ceil((x0 + w + lw / 2) * s), math.ceil((y0 + h + lw / 2) * s))


def _caption_leaks(caption: str, text: str) -> list[tuple]:
    cap = tokenize(caption.lower())
    body = tokenize(text.lower())
    grams = {tuple(body[i:i + 3]) for i in range(len(body) - 2)}
    return [tuple(cap[i:i + 3]) for i in range(len(cap) - 2) if tuple(cap[i:i + 3]) in grams]


def test_criterion_4_table_rendering(fixture_build, tmp_path):
    problems = []
    rng = random.Random(2024)
    ious = []
    for k in range(10):
        pdf = tmp_path / f"synthetic{k}.pdf"
        truth = _synthetic_page(rng, pdf)
        found = detect_table_bbox(rasterize_page(pdf, 1, dpi=144))
        iou = found.iou(truth)
        ious.append(iou)
        if iou < 0.9:
            problems.append(f"page {k}: IoU {iou:.3f} ({found.as_tuple()} vs {truth.as_tuple()})")

    pages = 0
    for src in discover_sources(CORPUS):
        model = fixture_build.model(src.paper_id.arxiv_id)
        captions = {d.label: d.caption for d in model.diagrams if d.kind == "table"}
        patched, jobs = isolate_tables(src, tmp_path / src.paper_id.safe_name)
        if not jobs:
            continue
        pdf = compile_pdf(patched)
        for job in jobs:
            text = page_text(pdf, job.page_number)
            pages += 1
            if not text.strip():
                problems.append(f"{job.table_label}: no text extracted")
            leaks = _caption_leaks(captions[job.table_label], text)
            if leaks:
                problems.append(f"{job.table_label}: caption leak {leaks[0]}")
    if pages < 3:
        problems.append(f"only {pages} caption-bearing pages checked")
    record(4, problems, f"min IoU {min(ious):.3f} over 10 pages; 0 caption leaks on {pages} rendered pages")


# -- 5 ----------------------------------------------------------------------

_VOCAB = "a b c d e f g the cat sat on mat dog".split()


def _sentence(rng, lo=1, hi=9):
    return " ".join(rng.choice(_VOCAB) for _ in range(rng.randint(lo, hi)))


# (prediction, reference, exact+stem matches, chunks), alignments worked out by hand
METEOR_FIXTURES = [
    ("the cat sat on the mat", "the cat sat on the mat", 6, 1),
    ("the cat sat on the mat", "on the mat sat the cat", 6, 3),
    ("cats running quickly", "the cat runs quickly", 3, 1),
    ("a b c d", "x y z", 0, 0),
    ("the dog barked loudly at night", "at night the dog barked", 5, 2),
]


def test_criterion_5_metric_oracles():
    problems = []
    rng = random.Random(5)
    for corpus in range(20):
        n = rng.randint(2, 6)
        preds = [_sentence(rng) for _ in range(n)]
        refs = [_sentence(rng) for _ in range(n)]
        if corpus % 4 == 0:
            preds[0] = refs[0]
        for p, r in zip(preds, refs):
            for name, got, want in (("bleu4", bleu4(p, r), oracles.bleu4(p, r)),
                                    ("rouge_l", rouge_l(p, r), oracles.rouge_l(p, r))):
                if abs(got - want) > 1e-6:
                    problems.append(f"{name}({p!r}, {r!r}) = {got} vs oracle {want}")
        got, _ = cider(preds, refs)
        want = oracles.cider(preds, refs)
        for g, w in zip(got, want):
            if abs(g - w) > 1e-6:
                problems.append(f"cider corpus {corpus}: {g} vs oracle {w}")
    for pred, ref, matches, chunks in METEOR_FIXTURES:
        got = meteor(pred, ref)
        want = oracles.meteor_formula(len(tokenize(pred)), len(tokenize(ref)), matches, chunks)
        if abs(got - want) > 1e-9:
            problems.append(f"meteor({pred!r}, {ref!r}) = {got} vs {want}")
    for k in range(20):
        s = _sentence(rng, 4, 12)
        if bleu4(s, s) != 1.0 or rouge_l(s, s) != 1.0:
            problems.append(f"identical pair {s!r}: bleu4={bleu4(s, s)} rouge_l={rouge_l(s, s)}")
    record(5, problems, "bleu4/rouge_l/cider match brute force on 20 corpora (1e-6), meteor on 5 fixtures "
                        "(1e-9), identical pairs score 1")


# -- 6 ----------------------------------------------------------------------

def test_criterion_6_f1_gpt_arithmetic():
    problems = []
    matching = {("p1", "g1"), ("p2", "g2")}
    client = judge_client(lambda p, g: (p, g) in matching)
    res = judge_pair("p1; p2; p3", "g1; g2; g3; g4", client)
    if abs(res.f1 - 4 / 7) > 1e-12:
        problems.append(f"3/4 with 2/2 matched: F1 {res.f1}")
    if judge_pair("p1; p2; p3", "g1; g2", judge_client(lambda p, g: True)).f1 != 1.0:
        problems.append("all-true judge is not 1")
    if judge_pair("p1; p2; p3", "g1; g2", judge_client(lambda p, g: False)).f1 != 0.0:
        problems.append("all-false judge is not 0")
    _, _, f = f1_gpt(["a", "b", "c"], ["w", "x", "y", "z"],
                     [[True, False, False, False], [False, True, False, False], [False] * 4])
    if abs(f - 4 / 7) > 1e-12:
        problems.append(f"matrix F1 {f}")
    rng = random.Random(6)
    for _ in range(100):
        c, f1 = rng.uniform(0, 10), rng.random()
        if abs(cider_gpt(c, f1) - c * f1) > 1e-12:
            problems.append(f"cider_gpt({c}, {f1})")
    record(6, problems, "F1 = 4/7 for 3 pred / 4 gt with 2/2 matched, all-true 1, all-false 0, "
                        "cider_gpt = product on 100 pairs")


# -- 7 ----------------------------------------------------------------------

def test_criterion_7_ranking():
    problems = []
    ref_a = "the encoder improves accuracy; the decoder reduces latency; training is stable"
    ref_b = "loss drops quickly at small learning rates; the batch size matters little; memory grows linearly"
    ref_c = "we release the code and the data"
    pred_a = "the encoder raises accuracy; the decoder cuts latency; training stays stable"
    pred_b = "loss drops quickly at large learning rates; the batch size matters a lot; memory grows fast"
    pred_c = "we release the code and the data"
    good = {("the encoder raises accuracy", "the encoder improves accuracy"),
            ("the decoder cuts latency", "the decoder reduces latency"),
            ("training stays stable", "training is stable"),
            ("memory grows fast", "memory grows linearly"),
            ("we release the code and the data", "we release the code and the data")}
    client = judge_client(lambda p, g: (p, g) in good)
    report = evaluate_pairs([("A", pred_a, ref_a), ("B", pred_b, ref_b), ("C", pred_c, ref_c)],
                            ("cider", "f1gpt"), client)
    sc = {s["sample_id"]: s["scores"] for s in report["samples"]}
    if not sc["A"]["cider"] < sc["B"]["cider"]:
        problems.append(f"setup: CIDEr does not prefer B ({sc['A']['cider']} vs {sc['B']['cider']})")
    if not sc["A"]["f1_gpt"] > sc["B"]["f1_gpt"]:
        problems.append("setup: F1gpt does not prefer A")
    if not sc["A"]["cider"] * sc["A"]["f1_gpt"] > sc["B"]["cider"] * sc["B"]["f1_gpt"]:
        problems.append("setup: product does not favour A")
    by_cgpt = [x for x in rank(report, "cider_gpt") if x in ("A", "B")]
    by_cider = [x for x in rank(report, "cider") if x in ("A", "B")]
    if by_cgpt != ["A", "B"]:
        problems.append(f"cider_gpt ranking {by_cgpt}")
    if by_cider != ["B", "A"]:
        problems.append(f"cider ranking {by_cider}")
    record(7, problems, f"cider ranks B>A ({sc['B']['cider']:.3f}>{sc['A']['cider']:.3f}), "
                        f"cider_gpt ranks A>B")


# -- 8 ----------------------------------------------------------------------

def _jsonl_bytes(dataset):
    return {p.relative_to(dataset).as_posix(): p.read_bytes() for p in sorted(dataset.rglob("*.jsonl"))}


def test_criterion_8_splits(tmp_path):
    problems = []
    out = tmp_path / "seeds"
    for seed in range(50):
        _, status, _, _ = run_fixture(out, seed=seed)
        if status != 0:
            problems.append(f"seed {seed}: status {status}")
            continue
        seen: dict[str, set] = collections.defaultdict(set)
        for f in (out / "dataset").rglob("*.jsonl"):
            for line in f.read_text(encoding="utf-8").splitlines():
                rec = json.loads(line)
                seen[rec["paper_id"]].add(rec["split"])
                if f.stem != rec["split"]:
                    problems.append(f"seed {seed}: {f.name} holds a {rec['split']} sample")
        for pid, splits in seen.items():
            if len(splits) != 1:
                problems.append(f"seed {seed}: {pid} in {sorted(splits)}")
    run_fixture(tmp_path / "r1", seed=3)
    run_fixture(tmp_path / "r2", seed=3)
    first, second = _jsonl_bytes(tmp_path / "r1" / "dataset"), _jsonl_bytes(tmp_path / "r2" / "dataset")
    if not first or first != second:
        problems.append("two runs with seed 3 differ")
    record(8, problems, f"50 seeds paper-disjoint; two seed-3 runs byte-identical over {len(first)} JSONL files")


# -- 9 ----------------------------------------------------------------------

def _matches_template(instruction: str, template: str, objects: list[str]) -> str | None:
    """Object word filling the slot when ``instruction`` is ``template`` with its slot filled; "" without slot."""
    if OBJECT_SLOT not in template:
        return "" if instruction == template else None
    head, tail = template.split(OBJECT_SLOT)
    if not (instruction.startswith(head) and instruction.endswith(tail)):
        return None
    middle = instruction[len(head):len(instruction) - len(tail)]
    return middle if middle in objects else None


def test_criterion_9_instruction_fidelity(fixture_build):
    problems = []
    fam = instruction_families()
    singular, plural = list(fam["objects_singular"]), list(fam["objects_plural"])
    templates = [t for k, v in fam.items() if not k.startswith("objects_") for t in v]
    for s in fixture_build.samples:
        hits = [m for t in templates if (m := _matches_template(s.instruction, t, singular + plural)) is not None]
        if not hits:
            problems.append(f"{s.sample_id}: instruction not in the templates: {s.instruction!r}")
            continue
        word = hits[0]
        if word:
            want_plural = len(s.diagrams) > 1
            if (word in plural) != want_plural:
                problems.append(f"{s.sample_id}: {word!r} with {len(s.diagrams)} diagram(s)")
    record(9, problems, f"{len(fixture_build.samples)} instructions verbatim from the templates, "
                        f"object number agrees")
