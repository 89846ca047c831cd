"""Rewrite a paper's source so every labeled table sits alone on its own page."""

from __future__ import annotations

import logging
import re
import shutil
from dataclasses import dataclass
from pathlib import Path

from ..latex.parser import FLOAT_ENVS, diagram_label
from ..latex.resolve import load_main_text
from ..latex.texutils import find_environments, iter_commands, read_group
from ..models import PaperId, PaperSource

log = logging.getLogger(__name__)

TABLE_ENVS = tuple(e for e in FLOAT_ENVS if "table" in e)
PATCHED_MAIN = "tables_only.tex"
PATCHED_PDF = "tables_only.pdf"
CAPTION_COMMANDS = ("caption", "subcaption", "captionof")
# environments a table may legitimately sit in
_ALLOWED_PARENTS = {"document", "center", "appendix", "appendices", "landscape", "flushleft", "flushright"}

_BEGIN_END_RE = re.compile(r"\\(begin|end)\s*\{([^}]*)\}")
_BEGIN_DOC = re.compile(r"\\begin\s*\{document\}")


@dataclass(frozen=True)
class RenderJob:
    paper_id: PaperId
    table_label: str
    patched_source_dir: Path
    pdf_path: Path
    page_number: int
    raster_dpi: int = 144


def empty_captions(table_src: str) -> str:
    """Keep every caption command but drop its argument (numbering stays stable)."""
    out = []
    last = 0
    for cmd in iter_commands(table_src, CAPTION_COMMANDS, n_required=1):
        out.append(table_src[last:cmd.start])
        if cmd.name == "captionof":
            # \captionof{type}{text}: the first group is the float type
            out.append(f"\\captionof{{{cmd.args[0]}}}{{}}")
            rest = table_src[cmd.end:].lstrip()
            skipped = len(table_src[cmd.end:]) - len(rest)
            g = read_group(rest, 0)
            last = cmd.end + skipped + (g[1] if g else 0)
            continue
        out.append(f"\\{cmd.name}{{}}")
        last = cmd.end
    out.append(table_src[last:])
    return "".join(out)


def _parents(text: str, pos: int) -> list[str]:
    stack: list[str] = []
    for m in _BEGIN_END_RE.finditer(text, 0, pos):
        name = m.group(2).strip()
        if m.group(1) == "begin":
            stack.append(name)
        elif name in stack:
            while stack and stack.pop() != name:
                pass
    return stack


def isolate_tables(source: PaperSource, work_dir: Path | str, raster_dpi: int = 144):
    """Copy the source tree to ``work_dir`` and write a patched main file.

    The patched document keeps the original preamble and contains only the
    labeled tables, each between ``\\clearpage`` commands with captions
    emptied, so table k lands on page k. Returns (patched dir, jobs).
    """
    work_dir = Path(work_dir)
    if work_dir.exists():
        shutil.rmtree(work_dir)
    shutil.copytree(source.root, work_dir)
    _, text = load_main_text(source)

    m = _BEGIN_DOC.search(text)
    if m:
        preamble, body = text[:m.start()], text[m.end():]
    else:
        preamble, body = "\\documentclass{article}\n", text

    envs, warnings = find_environments(body, TABLE_ENVS)
    for w in warnings:
        log.warning("%s: %s", source.paper_id.arxiv_id, w)
    pieces = []
    jobs = []
    for env in envs:
        src = body[env.start:env.end]
        label = diagram_label(body[env.body_start:env.body_end])
        if not label:
            continue
        foreign = [p for p in _parents(body, env.start) if p not in _ALLOWED_PARENTS]
        if foreign:
            log.warning("%s: table %s inside unsupported environment %s; skipped",
                        source.paper_id.arxiv_id, label, foreign[-1])
            continue
        if any(j.table_label == label for j in jobs):
            continue
        pieces.append("\\clearpage\n" + empty_captions(src) + "\n\\clearpage\n")
        jobs.append(RenderJob(source.paper_id, label, work_dir, work_dir / PATCHED_PDF, len(jobs) + 1, raster_dpi))

    patched = preamble + "\\begin{document}\n\\pagestyle{empty}\n" + "".join(pieces) + "\\end{document}\n"
    (work_dir / PATCHED_MAIN).write_text(patched, encoding="utf-8")
    return work_dir, jobs
