"""Low-level LaTeX scanning helpers: comments, brace groups, environments."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator, Optional


def _escaped(text: str, pos: int) -> bool:
    """True if the character at ``pos`` is preceded by an odd number of backslashes."""
    n = 0
    i = pos - 1
    while i >= 0 and text[i] == "\\":
        n += 1
        i -= 1
    return n % 2 == 1


def strip_comments(text: str) -> str:
    """Remove unescaped ``%`` comments.

    As in TeX, the comment swallows its line ending, so a comment-only line
    never turns into a blank (paragraph-breaking) line.
    """
    out = []
    for line in text.splitlines(keepends=True):
        start = 0
        while True:
            pos = line.find("%", start)
            if pos < 0:
                out.append(line)
                break
            if _escaped(line, pos):
                start = pos + 1
                continue
            head = line[:pos]
            if head.strip() == "":
                # whole line is a comment: drop it entirely
                out.append("")
            else:
                out.append(head)
            break
    return "".join(out)


def _skip_ws(text: str, pos: int) -> int:
    while pos < len(text) and text[pos] in " \t\n\r":
        pos += 1
    return pos


def read_group(text: str, pos: int, open_ch: str = "{", close_ch: str = "}") -> Optional[tuple[str, int]]:
    """Read a balanced group starting at ``pos`` (which must hold ``open_ch``).

    Returns (inner text, index just past the closing delimiter) or None when
    the group is unterminated.
    """
    if pos >= len(text) or text[pos] != open_ch:
        return None
    depth = 0
    i = pos
    while i < len(text):
        c = text[i]
        if c == "\\":
            i += 2
            continue
        if c == open_ch:
            depth += 1
        elif c == close_ch:
            depth -= 1
            if depth == 0:
                return text[pos + 1:i], i + 1
        i += 1
    return None


def read_command_args(text: str, pos: int, n_required: int = 1, allow_star: bool = True):
    """Parse ``*``, ``[opt]`` groups and ``n_required`` brace groups after a command name.

    ``pos`` points just past the command name. Returns (optional args,
    required args, end position) or None if a required group is missing.
    """
    i = pos
    if allow_star and i < len(text) and text[i] == "*":
        i += 1
    opts = []
    while True:
        j = _skip_ws(text, i)
        if j < len(text) and text[j] == "[":
            g = read_group(text, j, "[", "]")
            if g is None:
                return None
            opts.append(g[0])
            i = g[1]
        else:
            break
    req = []
    for _ in range(n_required):
        j = _skip_ws(text, i)
        g = read_group(text, j)
        if g is None:
            return None
        req.append(g[0])
        i = g[1]
    return opts, req, i


@dataclass(frozen=True)
class CommandMatch:
    name: str
    start: int
    end: int
    opts: tuple[str, ...]
    args: tuple[str, ...]


def iter_commands(text: str, names: tuple[str, ...], n_required: int = 1) -> Iterator[CommandMatch]:
    """Yield occurrences of ``\\name[..]{..}`` for any of ``names``."""
    pattern = re.compile(r"\\(" + "|".join(re.escape(n) for n in names) + r")(?![A-Za-z@])")
    pos = 0
    while True:
        m = pattern.search(text, pos)
        if m is None:
            return
        if _escaped(text, m.start()):
            pos = m.end()
            continue
        parsed = read_command_args(text, m.end(), n_required)
        if parsed is None:
            pos = m.end()
            continue
        opts, args, end = parsed
        yield CommandMatch(m.group(1), m.start(), end, tuple(opts), tuple(args))
        pos = end


_BEGIN_END_RE = re.compile(r"\\(begin|end)\s*\{([^}]*)\}")


@dataclass(frozen=True)
class EnvMatch:
    name: str
    start: int  # index of "\begin"
    body_start: int
    body_end: int  # index of matching "\end"
    end: int  # just past "\end{name}"


def find_environments(text: str, names: tuple[str, ...]) -> tuple[list[EnvMatch], list[str]]:
    """Locate top-level environments named in ``names`` (nesting-aware).

    Returns (matches in source order, warnings). An environment whose
    ``\\end`` is missing is reported and skipped.
    """
    wanted = set(names)
    matches: list[EnvMatch] = []
    warnings: list[str] = []
    pos = 0
    while True:
        m = _BEGIN_END_RE.search(text, pos)
        if m is None:
            break
        kind, name = m.group(1), m.group(2).strip()
        if kind != "begin" or name not in wanted or _escaped(text, m.start()):
            pos = m.end()
            continue
        depth = 1
        scan = m.end()
        close = None
        while True:
            n = _BEGIN_END_RE.search(text, scan)
            if n is None:
                break
            if n.group(2).strip() == name and not _escaped(text, n.start()):
                depth += 1 if n.group(1) == "begin" else -1
                if depth == 0:
                    close = n
                    break
            scan = n.end()
        if close is None:
            line = text.count("\n", 0, m.start()) + 1
            warnings.append(f"unbalanced environment {name!r} at line {line}; skipped")
            pos = m.end()
            continue
        matches.append(EnvMatch(name, m.start(), m.end(), close.start(), close.end()))
        pos = close.end()
    return matches, warnings


def remove_spans(text: str, spans: list[tuple[int, int]], replacement: str = "") -> str:
    """Delete non-overlapping (start, end) spans from ``text``.

    When a span covers whole lines its line ending goes too, so removing a
    float never manufactures a blank line.
    """
    widened = []
    for start, end in sorted(spans):
        line_start = text.rfind("\n", 0, start) + 1
        nl = text.find("\n", end)
        line_end = len(text) if nl < 0 else nl
        if text[line_start:start].strip() == "" and text[end:line_end].strip() == "":
            start, end = line_start, (line_end + 1 if nl >= 0 else line_end)
        widened.append((start, end))
    out = []
    last = 0
    for start, end in widened:
        start = max(start, last)
        out.append(text[last:start])
        out.append(replacement)
        last = max(end, last)
    out.append(text[last:])
    return "".join(out)
