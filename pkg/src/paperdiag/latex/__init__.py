from .cleaning import CITE_TOKEN, clean_paragraph, inline_math_spans
from .parser import extract_refs, parse_latex
from .resolve import inline_includes, load_main_text, resolve_main_file

__all__ = [
    "CITE_TOKEN",
    "clean_paragraph",
    "inline_math_spans",
    "extract_refs",
    "parse_latex",
    "inline_includes",
    "load_main_text",
    "resolve_main_file",
]
