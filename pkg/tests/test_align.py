import pytest

from paperdiag.align import build_context, first_reference, group_corefs
from paperdiag.errors import UnknownLabel
from paperdiag.models import DiagramEnv, DocumentModel, PaperId, Paragraph
from paperdiag.tokenizer import last_tokens, token_count, tokenize


def model(paragraphs, labels=("fig:a", "fig:b", "tab:c")):
    paras = tuple(Paragraph(i, t, tuple(refs), token_count(t)) for i, (t, refs) in enumerate(paragraphs))
    diagrams = tuple(DiagramEnv("table" if lbl.startswith("tab") else "figure", lbl, "cap", ("x.png",), "x")
                     for lbl in labels)
    return DocumentModel(PaperId("2301.00001"), paras, diagrams, {d.label: i for i, d in enumerate(diagrams)})


def words(n, w="w"):
    return " ".join([w] * n)


def test_tokenizer():
    assert tokenize("Figure~\\ref{fig:a} shows 3.5%!") == [
        "Figure", "~", "\\", "ref", "{", "fig", ":", "a", "}", "shows", "3", ".", "5", "%", "!"]
    assert last_tokens("a b c, d", 2) == ", d"


def test_first_reference_and_unknown_label():
    m = model([("intro", []), ("see a", ["fig:a"]), ("again a", ["fig:a"])])
    assert first_reference(m, "fig:a") == 1
    assert first_reference(m, "fig:b") is None
    with pytest.raises(UnknownLabel):
        first_reference(m, "fig:zzz")


def test_context_takes_whole_paragraphs_up_to_cap():
    m = model([(words(300, "a"), []), (words(200, "b"), []), (words(300, "c"), []), ("ref", ["fig:a"])])
    text, n = build_context(m, 3)
    assert text == words(200, "b") + "\n\n" + words(300, "c") and n == 500
    assert build_context(m, 0) == ("", 0)


def test_context_exactly_at_cap_and_truncation():
    m = model([(words(12, "a"), []), (words(500, "b"), []), (words(600, "c"), [])])
    assert build_context(m, 2)[1] == 512
    text, n = build_context(m, 3)
    assert n == 512 and text == words(512, "c")
    with pytest.raises(ValueError):
        build_context(m, -1)


def test_group_corefs_uses_earliest_first_reference():
    m = model([
        ("intro", []),
        ("Figure a", ["fig:a"]),
        ("middle", []),
        ("a and b", ["fig:b", "fig:a"]),
        ("about eq", ["eq:1"]),
    ])
    al = group_corefs(m)
    assert [(a.diagram_labels, a.analysis_paragraph, a.first_ref_paragraph) for a in al] == [
        (("fig:a",), 1, 1), (("fig:b", "fig:a"), 3, 1)]
    assert al[1].context == "intro"
