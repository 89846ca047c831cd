"""LaTeX body → DocumentModel (paragraphs + figure/table environments)."""

from __future__ import annotations

import logging
import re
from pathlib import Path

from ..errors import EmptyDocument
from ..models import DiagramEnv, DocumentModel, PaperSource, Paragraph
from ..tokenizer import token_count
from .cleaning import DISPLAY_ENVS, clean_paragraph
from .texutils import find_environments, iter_commands, remove_spans, strip_comments

log = logging.getLogger(__name__)

FLOAT_ENVS = (
    "figure", "figure*", "table", "table*", "wrapfigure", "wraptable",
    "sidewaysfigure", "sidewaystable",
)
SUB_ENVS = ("subfigure", "subtable", "minipage")
TABULAR_ENVS = ("tabular", "tabular*", "tabularx", "tabulary", "longtable", "array")
HEADING_COMMANDS = ("part", "chapter", "section", "subsection", "subsubsection")
REF_COMMANDS = ("ref", "cref", "Cref", "autoref", "subref", "vref", "Vref", "labelcref")
GRAPHICS_EXTENSIONS = (".png", ".jpg", ".jpeg", ".pdf")

_BEGIN_DOC = re.compile(r"\\begin\s*\{document\}")
_END_DOC = re.compile(r"\\end\s*\{document\}")
_PARA_SPLIT = re.compile(r"\n[ \t]*\n(?:[ \t]*\n)*")
# wrapper environment delimiters left behind once floats are cut out
_ENV_MARKER = re.compile(r"\\(?:begin|end)\s*\{([^}]*)\}")
_BARE_COMMAND = re.compile(r"\\[A-Za-z@]+\*?(?:\s*\[[^\[\]]*\])*(?:\s*\{[^{}]*\})*")


def _document_body(text: str) -> str:
    m = _BEGIN_DOC.search(text)
    if m:
        text = text[m.end():]
    e = _END_DOC.search(text)
    if e:
        text = text[:e.start()]
    return text


def _strip_commands(text: str, names: tuple[str, ...]) -> str:
    spans = [(c.start, c.end) for c in iter_commands(text, names)]
    return remove_spans(text, spans) if spans else text


def extract_refs(text: str) -> tuple[str, ...]:
    """Labels referenced in ``text``, in order of appearance, duplicates removed."""
    seen: dict[str, None] = {}
    for cmd in iter_commands(text, REF_COMMANDS):
        for label in cmd.args[0].split(","):
            label = label.strip()
            if label:
                seen.setdefault(label, None)
    return tuple(seen)


def _graphics_dirs(full_text: str) -> list[str]:
    dirs = [""]
    for cmd in iter_commands(full_text, ("graphicspath",)):
        dirs.extend(re.findall(r"\{([^{}]*)\}", cmd.args[0]))
    return dirs


def resolve_graphic(root: Path, name: str, search_dirs=("",)) -> str | None:
    """Resolve an ``\\includegraphics`` argument to a path relative to ``root``."""
    name = name.strip().strip('"')
    for d in search_dirs:
        base = root / d / name
        if base.suffix.lower() in GRAPHICS_EXTENSIONS and base.is_file():
            return base.relative_to(root).as_posix()
        for ext in GRAPHICS_EXTENSIONS:
            cand = base.with_name(base.name + ext)
            if cand.is_file():
                return cand.relative_to(root).as_posix()
    return None


def _top_level(body: str) -> str:
    subs, _ = find_environments(body, SUB_ENVS)
    if not subs:
        return body
    return remove_spans(body, [(s.start, s.end) for s in subs], " ")


def _first_arg(text: str, name: str) -> str | None:
    for cmd in iter_commands(text, (name,)):
        return cmd.args[0]
    return None


def _clean_caption(raw: str) -> str:
    raw = _strip_commands(raw, ("label",))
    cleaned = clean_paragraph(raw)
    if cleaned is None:
        # an over-long or broken formula in the caption disqualifies it as a target
        return ""
    return cleaned


def _table_body(body: str) -> str:
    tabs, _ = find_environments(body, TABULAR_ENVS)
    if tabs:
        body = body[tabs[0].start:tabs[-1].end]
    body = _strip_commands(body, ("caption", "label"))
    return body.strip()


def diagram_label(body: str) -> str | None:
    """First label outside nested sub-environments, else the first one anywhere."""
    label = _first_arg(_top_level(body), "label") or _first_arg(body, "label")
    return label.strip() if label and label.strip() else None


def parse_diagram(env_name: str, body: str, root: Path, graphics_dirs, warnings: list[str]) -> DiagramEnv | None:
    kind = "figure" if "figure" in env_name else "table"
    top = _top_level(body)
    label = diagram_label(body)
    if not label:
        return None
    caption_raw = _first_arg(top, "caption")
    if caption_raw is None:
        caption_raw = _first_arg(body, "caption") or ""
    caption = _clean_caption(caption_raw)
    if kind == "figure":
        paths = []
        for cmd in iter_commands(body, ("includegraphics",)):
            rel = resolve_graphic(root, cmd.args[0], graphics_dirs)
            if rel is None:
                warnings.append(f"{label}: graphic {cmd.args[0]!r} not found")
            elif rel not in paths:
                paths.append(rel)
        if not paths:
            warnings.append(f"{label}: figure without resolvable graphics dropped")
            return None
        return DiagramEnv("figure", label, caption, tuple(paths), "")
    latex = _table_body(body)
    if not latex:
        warnings.append(f"{label}: table without body dropped")
        return None
    return DiagramEnv("table", label, caption, (), latex)


def _is_structural(text: str) -> bool:
    """True for paragraphs made only of commands (``\\maketitle``, ``\\bibliography{x}``...)."""
    return not re.search(r"\w", _BARE_COMMAND.sub("", text).replace("{", "").replace("}", ""))


def split_paragraphs(body: str) -> list[str]:
    return [p for p in _PARA_SPLIT.split(body) if p.strip()]


def parse_latex(main_text: str, source: PaperSource) -> DocumentModel:
    """Build a DocumentModel from the inlined main file."""
    warnings: list[str] = []
    full = strip_comments(main_text)
    body = _document_body(full)
    graphics_dirs = _graphics_dirs(full)

    envs, env_warnings = find_environments(body, FLOAT_ENVS)
    warnings.extend(env_warnings)
    diagrams: list[DiagramEnv] = []
    label_index: dict[str, int] = {}
    for env in envs:
        d = parse_diagram(env.name, body[env.body_start:env.body_end], source.root, graphics_dirs, warnings)
        if d is None:
            continue
        if d.label in label_index:
            warnings.append(f"duplicate label {d.label!r}; keeping the first definition")
            continue
        label_index[d.label] = len(diagrams)
        diagrams.append(d)

    text = remove_spans(body, [(e.start, e.end) for e in envs])
    headings = [(c.start, c.end) for c in iter_commands(text, HEADING_COMMANDS)]
    text = remove_spans(text, headings, "\n\n")

    paragraphs: list[Paragraph] = []
    for raw in split_paragraphs(text):
        raw = _strip_commands(raw, ("label",))
        raw = _ENV_MARKER.sub(lambda m: m.group(0) if m.group(1) in DISPLAY_ENVS else " ", raw)
        if _is_structural(raw):
            continue
        cleaned = clean_paragraph(raw)
        if cleaned is None or not cleaned:
            continue
        paragraphs.append(Paragraph(len(paragraphs), cleaned, extract_refs(cleaned), token_count(cleaned)))

    if not paragraphs:
        raise EmptyDocument(f"{source.paper_id.arxiv_id}: no paragraphs after cleaning")
    for w in warnings:
        log.debug("%s: %s", source.paper_id.arxiv_id, w)
    return DocumentModel(source.paper_id, tuple(paragraphs), tuple(diagrams), label_index, tuple(warnings))

