"""Hand-derived expectations for the six-paper fixture corpus.

Paragraph texts below are the cleaned paragraphs read off the fixture
sources by hand. A sample is identified by
(paper, task, target, context, outline, diagram signature); for
captioning the signature is the exact payload kinds, for the other tasks
it is "figure"/"table" per payload because table formats are drawn at
random.
"""

from __future__ import annotations

from pathlib import Path

from stubs import stub_outline_text

CORPUS = Path(__file__).parent / "fixtures" / "corpus"
J = "\n\n"


def words(word: str, n: int) -> str:
    return " ".join([word] * n)


A, B, C, D, E, F = "2301.00001", "2301.00002", "2301.00003", "2301.00004", "2301.00005", "cs/0112017"
PAPERS = (A, B, C, D, E, F)

PARAGRAPHS = {
    A: [
        "Vision models read charts poorly.",
        "We study diagram captioning in detail.",
        "Figure~\\ref{fig:overview} shows the overall system.",
        "Table~\\ref{tab:acc} and Figure~\\ref{fig:curve} report accuracy and the training curve.",
        "We conclude briefly.",
    ],
    B: [
        "Prior work relies on templates <cite>.",
        "We keep short math such as $x+y$ and cite <cite> once more.",
        "Both panels of Figure~\\ref{fig:views} share one encoder and one decoder.",
    ],
    C: [
        words("alpha", 300),
        words("beta", 200),
        words("gamma", 150),
        "Figure~\\ref{fig:c1} plots the loss over many steps.",
        words("delta", 600),
        "Table~\\ref{tab:c2} lists the sizes of all models used.",
    ],
    D: [
        "This paper studies robustness of detectors.",
        "Table~\\ref{tab:big} summarises all runs. " + words("epsilon", 300),
        "Verbose: Figure~\\ref{fig:nocap} and Figure~\\ref{fig:mathcap} are discussed at length here.",
        "Figure~\\ref{fig:mathcap} tracks the error during training runs.",
    ],
    E: [
        "Figure~\\ref{fig:e1} opens the paper with a teaser image.",
        "We compare methods in \\cref{fig:e1,fig:e3} and in Section~\\ref{sec:exp}.",
        "Results appear in Section~\\ref{sec:exp} only.",
    ],
    F: [
        "Digital libraries index millions of records.",
        "As Figure~\\ref{fig:plot} shows, growth is steady over years.",
        "Table~\\ref{tab:boxed} gives the counts per archive and year.",
        "The duplicate Figure~\\ref{fig:dup} is resolved to its first definition.",
    ],
}

# label -> (kind, caption after cleaning)
DIAGRAMS = {
    A: {"fig:overview": ("figure", "Overview of the system."), "tab:acc": ("table", "Accuracy on the benchmark."),
        "fig:curve": ("figure", "Training curve.")},
    B: {"fig:views": ("figure", "Two views of the pipeline.")},
    C: {"fig:c1": ("figure", "Loss curve."), "tab:c2": ("table", "Model sizes.")},
    D: {"tab:big": ("table", "Full results for every configuration."), "fig:nocap": ("figure", ""),
        "fig:mathcap": ("figure", "")},
    E: {"fig:e1": ("figure", "Teaser."), "fig:e2": ("figure", "Unused figure."),
        "fig:e3": ("figure", "Comparison of methods.")},
    F: {"fig:plot": ("figure", "Growth of the archive."), "tab:boxed": ("table", "Counts per archive."),
        "fig:dup": ("figure", "First duplicate.")},
}

# tables whose rendered image exists (the boxed table sits in an unsupported environment)
RENDERED_TABLES = {A: {"tab:acc"}, C: {"tab:c2"}, D: {"tab:big"}, F: set()}

# seed 0, ratios (0.96, 0.02, 0.02) on 6 papers: counts 4/1/1
SPLITS_SEED0 = {
    "2301.00005": "train", "2301.00003": "train", "2301.00002": "train", "2301.00001": "train",
    "cs/0112017": "val", "2301.00004": "test",
}


def _ctx(paper, *idx):
    return J.join(PARAGRAPHS[paper][i] for i in idx)


# captioning: (paper, caption, context, payload kinds)
CAPTIONING = [
    (A, "Overview of the system.", _ctx(A, 0, 1), ("figure_image",)),
    (A, "Accuracy on the benchmark.", _ctx(A, 0, 1, 2), ("table_image",)),
    (A, "Accuracy on the benchmark.", _ctx(A, 0, 1, 2), ("table_latex",)),
    (A, "Training curve.", _ctx(A, 0, 1, 2), ("figure_image",)),
    (B, "Two views of the pipeline.", _ctx(B, 0, 1), ("figure_image", "figure_image")),
    (C, "Loss curve.", _ctx(C, 1, 2), ("figure_image",)),
    (C, "Model sizes.", words("delta", 512), ("table_image",)),
    (C, "Model sizes.", words("delta", 512), ("table_latex",)),
    # the 40-row table code exceeds 256 tokens: image variant only
    (D, "Full results for every configuration.", _ctx(D, 0), ("table_image",)),
    (E, "Teaser.", "", ("figure_image",)),
    (E, "Comparison of methods.", _ctx(E, 0), ("figure_image",)),
    (F, "Growth of the archive.", _ctx(F, 0), ("figure_image",)),
    (F, "Counts per archive.", _ctx(F, 0, 1), ("table_latex",)),
    (F, "First duplicate.", _ctx(F, 0, 1, 2), ("figure_image",)),
]

# analysis alignments that survive: (paper, analysis paragraph, context, diagram classes)
ANALYSIS = [
    (A, 2, _ctx(A, 0, 1), ("figure",)),
    (A, 3, _ctx(A, 0, 1, 2), ("table", "figure")),
    (B, 2, _ctx(B, 0, 1), ("figure", "figure")),
    (C, 3, _ctx(C, 1, 2), ("figure",)),
    (C, 5, words("delta", 512), ("table",)),
    # D1 is over 256 tokens, D2's outline is rejected twice
    (D, 3, _ctx(D, 0, 1), ("figure",)),
    (E, 0, "", ("figure",)),
    (E, 1, "", ("figure", "figure")),
    (F, 1, _ctx(F, 0), ("figure",)),
    (F, 2, _ctx(F, 0, 1), ("table",)),
    (F, 3, _ctx(F, 0, 1, 2), ("figure",)),
]


def outline_of(paper, idx) -> str:
    return stub_outline_text(PARAGRAPHS[paper][idx])


def expected_samples(outline_free: bool = True) -> list[tuple]:
    out = []
    for paper, target, ctx, kinds in CAPTIONING:
        out.append((paper, "captioning", target, ctx, None, kinds))
    for paper, idx, ctx, classes in ANALYSIS:
        target = PARAGRAPHS[paper][idx]
        outline = outline_of(paper, idx)
        out.append((paper, "analysis", target, ctx, outline, classes))
        if outline_free:
            out.append((paper, "analysis", target, ctx, None, classes))
        out.append((paper, "outline_rec", outline, ctx, None, classes))
        out.append((paper, "outline_rec", outline, ctx, None, ()))
    return sorted(out, key=repr)


def signature(sample) -> tuple:
    if sample.task == "captioning":
        kinds = tuple(d.kind for d in sample.diagrams)
    else:
        kinds = tuple("figure" if d.kind == "figure_image" else "table" for d in sample.diagrams)
    return (sample.paper_id, sample.task, sample.target, sample.context, sample.outline, kinds)


EXPECTED_COUNTS = {"captioning": 14, "analysis": 22, "outline_rec": 22}
