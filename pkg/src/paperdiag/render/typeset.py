"""Builtin fallback typesetter for table-only documents.

Used when no LaTeX compiler is installed. It understands the subset of
LaTeX found in the isolated-table documents: table floats holding
tabular-like environments (or included graphics), captions, booktabs and
``\\hline``/``\\cline`` rules, ``\\multicolumn``/``\\multirow``, common text
formatting and simple user macros from the preamble. Each table float is
drawn on its own US-letter page as a ruled grid. Anything else fails the
way a compiler would, with an "Undefined control sequence" log entry.
"""

from __future__ import annotations

import re
import time
from dataclasses import dataclass, field
from pathlib import Path

import pymupdf

from ..errors import CompileFailed, CompileTimeout
from ..latex.parser import GRAPHICS_EXTENSIONS, TABULAR_ENVS
from ..latex.texutils import _escaped, find_environments, read_command_args, read_group, strip_comments

PAGE_W, PAGE_H = 612.0, 792.0  # US letter, points
MARGIN = 72.0
TOP = 96.0
FONT = "helv"
BOLD_FONT = "hebo"
FONT_SIZE = 9.0
CELL_PAD = 6.0

_TABLE_FLOATS = ("table", "table*", "wraptable", "sidewaystable")

# commands that produce no visible output here (their arguments are consumed)
_SILENT = {
    "centering": 0, "small": 0, "footnotesize": 0, "scriptsize": 0, "tiny": 0, "normalsize": 0,
    "large": 0, "Large": 0, "LARGE": 0, "huge": 0, "Huge": 0, "bfseries": 0, "itshape": 0, "ttfamily": 0,
    "rmfamily": 0, "sffamily": 0, "scshape": 0, "upshape": 0, "mdseries": 0, "normalfont": 0, "selectfont": 0,
    "hfill": 0, "vfill": 0, "quad": 0, "qquad": 0, "noindent": 0, "par": 0, "relax": 0, "centerline": 0,
    "clearpage": 0, "newpage": 0, "pagestyle": 1, "thispagestyle": 1, "label": 1, "vspace": 1, "hspace": 1,
    "setlength": 2, "addtolength": 2, "renewcommand": 2, "arraystretch": 0, "tabcolsep": 0, "extracolsep": 1,
    "captionsetup": 1, "belowrulesep": 0, "aboverulesep": 0, "smallskip": 0, "medskip": 0, "bigskip": 0,
    "fontsize": 2, "rowcolor": 1, "cellcolor": 1, "columncolor": 1, "color": 1, "arrayrulecolor": 1,
    "protect": 0, "nobreak": 0, "strut": 0, "ignorespaces": 0, "unskip": 0, "leavevmode": 0, "Xhline": 1,
    "specialrule": 3, "morecmidrules": 0, "footnote": 1, "footnotemark": 0, "linewidth": 0, "textwidth": 0,
    "columnwidth": 0, "hsize": 0, "sisetup": 1, "raggedright": 0, "raggedleft": 0, "baselinestretch": 0,
}
# commands that show their last argument
_PASS_THROUGH = {
    "textbf": 1, "textit": 1, "emph": 1, "textrm": 1, "textsf": 1, "texttt": 1, "textsc": 1, "textup": 1,
    "textmd": 1, "textnormal": 1, "underline": 1, "mathbf": 1, "mathrm": 1, "mathit": 1, "mathsf": 1,
    "mathtt": 1, "mathcal": 1, "mathbb": 1, "boldsymbol": 1, "bm": 1, "text": 1, "mbox": 1, "textsuperscript": 1,
    "textsubscript": 1, "operatorname": 1, "multirow": 3, "makecell": 1, "shortstack": 1, "textcolor": 2,
    "resizebox": 3, "scalebox": 2, "rotatebox": 2, "adjustbox": 2, "num": 1, "si": 1, "SI": 2, "hbox": 1,
    "parbox": 2, "raisebox": 2, "fbox": 1, "ensuremath": 1, "widehat": 1, "hat": 1, "bar": 1, "tilde": 1,
    "overline": 1, "vec": 1, "textsl": 1, "uline": 1, "sout": 1, "cite": 1, "ref": 1, "eqref": 1,
}
_SYMBOLS = {
    "pm": "\u00b1", "times": "\u00d7", "cdot": "\u00b7", "div": "\u00f7", "leq": "<=", "le": "<=", "geq": ">=",
    "ge": ">=", "neq": "!=", "approx": "~", "sim": "~", "rightarrow": "->", "to": "->", "leftarrow": "<-",
    "uparrow": "^", "downarrow": "v", "checkmark": "v", "cmark": "v", "xmark": "x", "infty": "inf", "dots": "...",
    "ldots": "...", "cdots": "...", "degree": "\u00b0", "circ": "\u00b0", "mu": "\u00b5", "textbackslash": "\\",
    "textasciitilde": "~", "textbar": "|", "textendash": "-", "textemdash": "-", "S": "\u00a7", "P": "\u00b6",
    "textdegree": "\u00b0", "copyright": "\u00a9", "dag": "+", "ddag": "++", "dagger": "+", "ast": "*", "star": "*",
    "bullet": "\u00b7", "%": "%", "&": "&", "_": "_", "#": "#", "$": "$", "{": "{", "}": "}", ",": " ", ";": " ",
    ":": " ", "!": "", " ": " ", "\\": " ", "-": "", "/": "", "tabularnewline": " ", "newline": " ", "linebreak": " ",
    "mid": "|", "vert": "|", "langle": "<", "rangle": ">", "lvert": "|", "rvert": "|", "left": "", "right": "",
    "big": "", "Big": "", "bigg": "", "Bigg": "", "displaystyle": "", "textstyle": "", "scriptstyle": "",
    "prime": "'", "partial": "d", "nabla": "V", "sum": "sum", "prod": "prod", "log": "log", "exp": "exp",
    "max": "max", "min": "min", "arg": "arg", "sqrt": "sqrt", "frac": "", "neg": "not ", "wedge": "^",
    "vee": "v", "cap": "n", "cup": "u", "in": "in", "notin": "not in", "subset": "<", "forall": "A", "exists": "E",
    "and": "&", "hline": "", "toprule": "", "midrule": "", "bottomrule": "",
}
_GREEK = (
    "alpha beta gamma delta epsilon varepsilon zeta eta theta vartheta iota kappa lambda nu xi pi rho sigma "
    "tau upsilon phi varphi chi psi omega Gamma Delta Theta Lambda Xi Pi Sigma Upsilon Phi Psi Omega"
).split()
for _g in _GREEK:
    _SYMBOLS.setdefault(_g, _g)
_RULES = {"hline", "toprule", "midrule", "bottomrule", "cline", "cmidrule", "addlinespace", "hdashline"}
_FLOAT_LEVEL = {"caption", "includegraphics", "begin", "end", "multicolumn", "captionof", "subcaption"}

_KNOWN = set(_SILENT) | set(_PASS_THROUGH) | set(_SYMBOLS) | _RULES | _FLOAT_LEVEL
_CMD_RE = re.compile(r"\\([A-Za-z@]+|.)")
_DEF_RE = re.compile(
    r"\\(?:re)?newcommand\*?\s*\{?\s*\\([A-Za-z@]+)\s*\}?\s*(?:\[(\d)\])?(?:\s*\[[^\]]*\])?\s*"
    r"|\\(?:DeclareRobustCommand|providecommand)\*?\s*\{?\s*\\([A-Za-z@]+)\s*\}?\s*(?:\[(\d)\])?\s*"
    r"|\\def\s*\\([A-Za-z@]+)\s*"
)
_MATHOP_RE = re.compile(r"\\DeclareMathOperator\*?\s*\{\s*\\([A-Za-z@]+)\s*\}\s*\{([^{}]*)\}")
_BEGIN_DOC = re.compile(r"\\begin\s*\{document\}")
_END_DOC = re.compile(r"\\end\s*\{document\}")


@dataclass
class Macro:
    n_args: int
    body: str


def collect_macros(preamble: str) -> dict[str, Macro]:
    macros: dict[str, Macro] = {}
    for m in _DEF_RE.finditer(preamble):
        name = m.group(1) or m.group(3) or m.group(5)
        n = int(m.group(2) or m.group(4) or 0)
        g = read_group(preamble, m.end())
        macros[name] = Macro(n, g[0] if g else "")
    for m in _MATHOP_RE.finditer(preamble):
        macros[m.group(1)] = Macro(0, m.group(2))
    return macros


def expand_macros(text: str, macros: dict[str, Macro], depth: int = 0) -> str:
    if not macros or depth > 8:
        return text
    out = []
    i = 0
    changed = False
    for m in _CMD_RE.finditer(text):
        name = m.group(1)
        if m.start() < i or name not in macros:
            continue
        mac = macros[name]
        parsed = read_command_args(text, m.end(), mac.n_args, allow_star=False) if mac.n_args else ([], [], m.end())
        if parsed is None:
            continue
        _, args, end = parsed
        body = mac.body
        for k, a in enumerate(args, 1):
            body = body.replace(f"#{k}", a)
        out.append(text[i:m.start()])
        out.append("{" + body + "}")
        i = end
        changed = True
    out.append(text[i:])
    result = "".join(out)
    return expand_macros(result, macros, depth + 1) if changed else result


def _line_of(text: str, pos: int) -> int:
    return text.count("\n", 0, pos) + 1


def check_commands(doc_text: str, body_offset: int, body: str, macros) -> None:
    """Fail like TeX on the first control sequence nobody defines."""
    for m in _CMD_RE.finditer(body):
        if _escaped(body, m.start()):
            continue
        name = m.group(1)
        if name in _KNOWN or name in macros or not name[0].isalpha():
            continue
        line = _line_of(doc_text, body_offset + m.start())
        src_line = doc_text.splitlines()[line - 1] if line - 1 < len(doc_text.splitlines()) else ""
        raise CompileFailed(
            f"! Undefined control sequence.\nl.{line} {src_line.strip()}\n"
            f"No pages of output.\n",
        )


# plain-text conversion ----------------------------------------------------

def to_plain(latex: str) -> str:
    out = []
    i = 0
    n = len(latex)
    while i < n:
        c = latex[i]
        if c == "\\":
            m = _CMD_RE.match(latex, i)
            if not m:
                break
            name = m.group(1)
            j = m.end()
            if name in _PASS_THROUGH:
                parsed = read_command_args(latex, j, _PASS_THROUGH[name])
                if parsed:
                    _, args, j = parsed
                    out.append(to_plain(args[-1]))
                    i = j
                    continue
            elif name in _SILENT:
                parsed = read_command_args(latex, j, _SILENT[name])
                i = parsed[2] if parsed else j
                continue
            elif name in _SYMBOLS:
                out.append(_SYMBOLS[name])
                if name[0].isalpha():
                    while j < n and latex[j] == " ":
                        j += 1
                    if j < n and latex[j:j + 2] == "{}":
                        j += 2
                i = j
                continue
            elif name == "frac":
                parsed = read_command_args(latex, j, 2, allow_star=False)
                if parsed:
                    _, (a, b), j = parsed
                    out.append(f"{to_plain(a)}/{to_plain(b)}")
                    i = j
                    continue
            i = j
            continue
        if c in "{}$":
            i += 1
            continue
        if c == "~":
            out.append(" ")
        elif c in "^_":
            pass
        elif latex.startswith("---", i):
            out.append("-")
            i += 3
            continue
        elif latex.startswith("--", i):
            out.append("-")
            i += 2
            continue
        elif latex.startswith("``", i) or latex.startswith("''", i):
            out.append('"')
            i += 2
            continue
        else:
            out.append(c)
        i += 1
    return re.sub(r"\s+", " ", "".join(out)).strip()


# tabular parsing ----------------------------------------------------------

@dataclass
class Cell:
    text: str
    span: int = 1
    align: str = "l"
    bold: bool = False


@dataclass
class Row:
    cells: list[Cell] = field(default_factory=list)
    rules_above: list[tuple[int, int, float]] = field(default_factory=list)  # (first col, last col, width)


@dataclass
class Grid:
    aligns: list[str]
    vrules: list[int]  # column boundaries (0..ncols) with a vertical rule
    rows: list[Row]
    rules_below: list[tuple[int, int, float]]


def parse_colspec(spec: str) -> tuple[list[str], list[int]]:
    aligns: list[str] = []
    vrules: list[int] = []
    i = 0
    while i < len(spec):
        c = spec[i]
        if c in "lcrLCRSX":
            aligns.append({"L": "l", "C": "c", "R": "r", "S": "c", "X": "l"}.get(c, c))
            i += 1
        elif c in "pmb":
            aligns.append("l")
            g = read_group(spec, i + 1)
            i = g[1] if g else i + 1
        elif c == "w":
            # w{align}{width}
            g1 = read_group(spec, i + 1)
            g2 = read_group(spec, g1[1]) if g1 else None
            aligns.append(g1[0].strip() if g1 and g1[0].strip() in ("l", "c", "r") else "l")
            i = g2[1] if g2 else i + 1
        elif c == "|":
            vrules.append(len(aligns))
            i += 1
        elif c in "@!><":
            g = read_group(spec, i + 1)
            i = g[1] if g else i + 1
        elif c == "*":
            g1 = read_group(spec, i + 1)
            g2 = read_group(spec, g1[1]) if g1 else None
            if g1 and g2:
                spec = spec[:i] + g2[0] * int(g1[0].strip() or 0) + spec[g2[1]:]
                continue
            i += 1
        elif c == "{":
            g = read_group(spec, i)
            i = g[1] if g else i + 1
        else:
            i += 1
    if not aligns:
        aligns = ["l"]
    return aligns, sorted(set(vrules))


def _split_top(text: str, sep: str) -> list[str]:
    parts, depth, last, i = [], 0, 0, 0
    while i < len(text):
        c = text[i]
        if c == "\\":
            if depth == 0 and sep == "\\\\" and text.startswith("\\\\", i):
                parts.append(text[last:i])
                i += 2
                # optional spacing argument \\[2pt]
                j = i
                while j < len(text) and text[j] in " \t":
                    j += 1
                if j < len(text) and text[j] == "[":
                    g = read_group(text, j, "[", "]")
                    if g:
                        i = g[1]
                last = i
                continue
            i += 2
            continue
        if c == "{":
            depth += 1
        elif c == "}":
            depth -= 1
        elif depth == 0 and sep == "&" and c == "&":
            parts.append(text[last:i])
            last = i + 1
        i += 1
    parts.append(text[last:])
    return parts


_RULE_RE = re.compile(r"\s*\\(hline|toprule|midrule|bottomrule|cline|cmidrule|addlinespace|hdashline|Xhline|specialrule)\b")


def _leading_rules(row: str, ncols: int) -> tuple[list[tuple[int, int, float]], str]:
    rules = []
    while True:
        m = _RULE_RE.match(row)
        if not m:
            return rules, row
        name = m.group(1)
        j = m.end()
        if name in ("cline", "cmidrule"):
            k = j
            while k < len(row) and row[k] in " \t\n":
                k += 1
            if k < len(row) and row[k] == "(":
                k = row.find(")", k) + 1
            parsed = read_command_args(row, k, 1, allow_star=False)
            if parsed:
                _, (rng,), j = parsed
                a, _, b = rng.partition("-")
                try:
                    rules.append((int(a) - 1, int(b or a) - 1, 0.5))
                except ValueError:
                    pass
        elif name in ("addlinespace", "Xhline", "specialrule"):
            parsed = read_command_args(row, j, 1 if name == "Xhline" else (3 if name == "specialrule" else 0))
            j = parsed[2] if parsed else j
            if name != "addlinespace":
                rules.append((0, ncols - 1, 0.8))
        else:
            width = {"toprule": 0.8, "bottomrule": 0.8, "midrule": 0.5}.get(name, 0.4)
            if name in ("toprule", "midrule", "bottomrule"):
                k = j
                while k < len(row) and row[k] in " \t\n":
                    k += 1
                if k < len(row) and row[k] == "[":
                    g = read_group(row, k, "[", "]")
                    j = g[1] if g else j
            rules.append((0, ncols - 1, width))
        row = row[j:]


def _parse_cell(raw: str, default_align: str) -> Cell:
    raw = raw.strip()
    m = re.match(r"\\multicolumn\b", raw)
    if m:
        parsed = read_command_args(raw, m.end(), 3, allow_star=False)
        if parsed:
            _, (n, spec, content), end = parsed
            aligns, _ = parse_colspec(spec)
            try:
                span = max(1, int(n.strip()))
            except ValueError:
                span = 1
            return Cell(to_plain(content + raw[end:]), span, aligns[0], _is_bold(content))
    return Cell(to_plain(raw), 1, default_align, _is_bold(raw))


def _is_bold(raw: str) -> bool:
    return bool(re.match(r"\s*(\{\s*)?\\(textbf|bfseries|mathbf)\b", raw))


def parse_tabular(env_name: str, inner: str) -> Grid:
    pos = 0
    n_pre = 1 if env_name in ("tabular*", "tabularx", "tabulary") else 0
    parsed = read_command_args(inner, pos, n_pre + 1, allow_star=False)
    if parsed is None:
        raise CompileFailed(f"! Missing column specification for {env_name}.\n")
    _, args, pos = parsed
    aligns, vrules = parse_colspec(args[-1])
    ncols = len(aligns)
    rows: list[Row] = []
    pending: list[tuple[int, int, float]] = []
    for raw in _split_top(inner[pos:], "\\\\"):
        rules, rest = _leading_rules(raw, ncols)
        pending.extend(rules)
        if not rest.strip():
            continue
        row = Row(rules_above=pending)
        pending = []
        col = 0
        for raw_cell in _split_top(rest, "&"):
            cell = _parse_cell(raw_cell, aligns[min(col, ncols - 1)])
            row.cells.append(cell)
            col += cell.span
        rows.append(row)
    return Grid(aligns, vrules, rows, pending)


# layout -------------------------------------------------------------------

def _text_width(text: str, size: float, bold: bool) -> float:
    return pymupdf.get_text_length(text, fontname=BOLD_FONT if bold else FONT, fontsize=size)


def _layout_widths(grid: Grid, size: float) -> list[float]:
    ncols = max([len(grid.aligns)] + [sum(c.span for c in r.cells) for r in grid.rows])
    widths = [2 * CELL_PAD] * ncols
    for span_pass in (False, True):
        for row in grid.rows:
            col = 0
            for cell in row.cells:
                need = _text_width(cell.text, size, cell.bold) + 2 * CELL_PAD
                if (cell.span > 1) == span_pass:
                    cols = range(col, min(col + cell.span, ncols))
                    have = sum(widths[c] for c in cols)
                    if need > have and len(cols):
                        extra = (need - have) / len(cols)
                        for c in cols:
                            widths[c] += extra
                col += cell.span
    return widths


def draw_grid(page, grid: Grid, top: float, deadline: float | None) -> float:
    """Draw ``grid`` centered horizontally starting at ``top``; return its bottom y."""
    size = FONT_SIZE
    widths = _layout_widths(grid, size)
    avail = PAGE_W - 2 * MARGIN
    if sum(widths) > avail:
        size = max(4.0, size * avail / sum(widths))
        widths = _layout_widths(grid, size)
        if sum(widths) > avail:
            scale = avail / sum(widths)
            widths = [w * scale for w in widths]
    ncols = len(widths)
    row_h = size * 1.6
    left = (PAGE_W - sum(widths)) / 2
    xs = [left]
    for w in widths:
        xs.append(xs[-1] + w)

    def hrule(y, first, last, width):
        first, last = max(0, first), min(ncols - 1, last)
        if first <= last:
            page.draw_line((xs[first], y), (xs[last + 1], y), color=(0, 0, 0), width=width)

    y = top
    row_tops = []
    for row in grid.rows:
        if deadline is not None and time.monotonic() > deadline:
            raise CompileTimeout("builtin typesetter exceeded its time budget")
        if row.rules_above:
            for first, last, width in row.rules_above:
                hrule(y, first, last, width)
            y += 2
        row_tops.append(y)
        col = 0
        for cell in row.cells:
            if col >= ncols:
                break
            x0, x1 = xs[col], xs[min(col + cell.span, ncols)]
            tw = _text_width(cell.text, size, cell.bold)
            if cell.align == "r":
                tx = x1 - CELL_PAD - tw
            elif cell.align == "c":
                tx = (x0 + x1 - tw) / 2
            else:
                tx = x0 + CELL_PAD
            if cell.text:
                page.insert_text((tx, y + row_h * 0.7), cell.text, fontname=BOLD_FONT if cell.bold else FONT,
                                 fontsize=size)
            col += cell.span
        y += row_h
    for first, last, width in grid.rules_below:
        hrule(y, first, last, width)
    bottom = y
    if grid.vrules and grid.rows:
        for b in grid.vrules:
            if b <= ncols:
                page.draw_line((xs[b], top), (xs[b], bottom), color=(0, 0, 0), width=0.4)
    return bottom


def _find_graphic(base: Path, name: str) -> Path | None:
    cand = base / name
    if cand.suffix.lower() in GRAPHICS_EXTENSIONS and cand.is_file():
        return cand
    for ext in GRAPHICS_EXTENSIONS:
        p = base / (name + ext)
        if p.is_file():
            return p
    return None


def _draw_graphic(page, path: Path, top: float) -> float:
    avail = PAGE_W - 2 * MARGIN
    if path.suffix.lower() == ".pdf":
        with pymupdf.open(path) as src:
            r = src[0].rect
            scale = min(1.0, avail / r.width)
            rect = pymupdf.Rect((PAGE_W - r.width * scale) / 2, top, (PAGE_W + r.width * scale) / 2,
                                top + r.height * scale)
            page.show_pdf_page(rect, src, 0)
            return rect.y1
    pix = pymupdf.Pixmap(str(path))
    w, h = pix.width * 72 / 144, pix.height * 72 / 144
    scale = min(1.0, avail / w)
    rect = pymupdf.Rect((PAGE_W - w * scale) / 2, top, (PAGE_W + w * scale) / 2, top + h * scale)
    page.insert_image(rect, filename=str(path))
    return rect.y1


def _caption_text(body: str) -> str | None:
    m = re.search(r"\\caption(?![A-Za-z@])", body)
    if not m:
        return None
    parsed = read_command_args(body, m.end(), 1)
    return to_plain(parsed[1][0]) if parsed else ""


def typeset(tex_path: Path | str, pdf_path: Path | str | None = None, timeout_s: float | None = None) -> Path:
    """Typeset ``tex_path`` into a PDF next to it (or at ``pdf_path``)."""
    tex_path = Path(tex_path)
    pdf_path = Path(pdf_path) if pdf_path else tex_path.with_suffix(".pdf")
    log_path = tex_path.with_suffix(".log")
    deadline = time.monotonic() + timeout_s if timeout_s else None
    try:
        text = strip_comments(tex_path.read_text(encoding="utf-8", errors="replace"))
        m = _BEGIN_DOC.search(text)
        if not m:
            raise CompileFailed("! LaTeX Error: Missing \\begin{document}.\n")
        e = _END_DOC.search(text, m.end())
        body_end = e.start() if e else len(text)
        preamble, body = text[:m.start()], text[m.end():body_end]
        macros = collect_macros(preamble)
        check_commands(text, m.end(), body, macros)
        floats, warnings = find_environments(body, _TABLE_FLOATS)
        if warnings:
            raise CompileFailed("! LaTeX Error: \\begin{table} ended by \\end{document}.\n" + "\n".join(warnings))

        doc = pymupdf.open()
        table_no = 0
        for fl in floats:
            if deadline is not None and time.monotonic() > deadline:
                raise CompileTimeout("builtin typesetter exceeded its time budget")
            inner = expand_macros(body[fl.body_start:fl.body_end], macros)
            page = doc.new_page(width=PAGE_W, height=PAGE_H)
            y = TOP
            caption = _caption_text(inner)
            tabs, _ = find_environments(inner, TABULAR_ENVS)
            if caption is not None:
                table_no += 1
                heading = f"Table {table_no}: {caption}".rstrip()
                tw = _text_width(heading, FONT_SIZE, False)
                page.insert_text(((PAGE_W - tw) / 2, y + FONT_SIZE), heading, fontname=FONT, fontsize=FONT_SIZE)
                y += FONT_SIZE * 2.2
            for tab in tabs:
                grid = parse_tabular(tab.name, inner[tab.body_start:tab.body_end])
                y = draw_grid(page, grid, y, deadline) + 12
            for gm in re.finditer(r"\\includegraphics(?![A-Za-z@])", inner):
                parsed = read_command_args(inner, gm.end(), 1)
                if not parsed:
                    continue
                path = _find_graphic(tex_path.parent, parsed[1][0].strip())
                if path is None:
                    raise CompileFailed(f"! LaTeX Error: File `{parsed[1][0].strip()}' not found.\n")
                y = _draw_graphic(page, path, y) + 12
        if doc.page_count == 0:
            raise CompileFailed("No pages of output.\n")
        doc.set_metadata({"producer": "paperdiag builtin typesetter", "creator": "", "creationDate": "",
                          "modDate": ""})
        doc.save(pdf_path, garbage=3, deflate=True, no_new_id=True)
        doc.close()
        log_path.write_text(f"Output written on {pdf_path.name} ({table_no} tables).\n", encoding="utf-8")
        return pdf_path
    except CompileFailed as exc:
        log_path.write_text(exc.log or str(exc), encoding="utf-8")
        raise
