"""Main-file discovery and ``\\input`` / ``\\include`` inlining."""

from __future__ import annotations

import logging
import re
from pathlib import Path

from ..errors import CyclicInclude, NoMainFile
from ..models import PaperSource
from .texutils import iter_commands, strip_comments

log = logging.getLogger(__name__)

_BEGIN_DOC_RE = re.compile(r"\\begin\s*\{document\}")
_DOCCLASS_RE = re.compile(r"\\documentclass\b")
_PREFERRED_NAMES = ("main.tex", "ms.tex", "paper.tex")


def read_tex(path: Path) -> str:
    return path.read_bytes().decode("utf-8", errors="replace")


def resolve_main_file(source: PaperSource) -> Path:
    """Pick the root .tex file of a source tree."""
    files = source.tex_files()
    if not files:
        raise NoMainFile(f"{source.paper_id.arxiv_id}: no .tex files under {source.root}")
    if len(files) == 1:
        return files[0]
    texts = {f: strip_comments(read_tex(f)) for f in files}
    candidates = [f for f in files if _BEGIN_DOC_RE.search(texts[f])]
    if not candidates:
        raise NoMainFile(f"{source.paper_id.arxiv_id}: no file contains \\begin{{document}}")
    if len(candidates) > 1:
        with_class = [f for f in candidates if _DOCCLASS_RE.search(texts[f])]
        candidates = with_class or candidates
    if len(candidates) > 1:
        ranked = sorted(
            candidates,
            key=lambda f: (
                _PREFERRED_NAMES.index(f.name) if f.name in _PREFERRED_NAMES else len(_PREFERRED_NAMES),
                len(f.relative_to(source.root).parts),
                str(f),
            ),
        )
        log.warning("%s: %d main-file candidates, using %s", source.paper_id.arxiv_id, len(ranked), ranked[0].name)
        return ranked[0]
    return candidates[0]


def _locate(root: Path, including_dir: Path, name: str) -> Path | None:
    name = name.strip()
    for base in (root, including_dir):
        for cand in (base / name, base / f"{name}.tex"):
            if cand.is_file():
                return cand
    return None


def inline_includes(path: Path, root: Path, _stack: tuple[Path, ...] = ()) -> str:
    """Return the comment-stripped text of ``path`` with inputs inlined recursively."""
    path = path.resolve()
    root = root.resolve()
    if path in _stack:
        idx = _stack.index(path)
        cycle = [p.name for p in _stack[idx:]] + [path.name]
        raise CyclicInclude(cycle)
    stack = _stack + (path,)
    text = strip_comments(read_tex(path))
    out = []
    last = 0
    for cmd in iter_commands(text, ("input", "include", "subfile"), n_required=1):
        target = _locate(root, path.parent, cmd.args[0])
        out.append(text[last:cmd.start])
        if target is None:
            log.warning("%s: cannot resolve \\%s{%s}", path.name, cmd.name, cmd.args[0])
        else:
            out.append(inline_includes(target, root, stack))
        last = cmd.end
    out.append(text[last:])
    return "".join(out)


def load_main_text(source: PaperSource) -> tuple[Path, str]:
    main = resolve_main_file(source)
    return main, inline_includes(main, source.root)
