"""Compile a patched source directory to PDF.

The compiler is an external command template (``LATEX_CMD``) run inside
the directory, with ``{main}``, ``{stem}`` and ``{dir}`` placeholders. When
the configured executable is missing, or the template is ``builtin``, the
builtin typesetter is used instead.
"""

from __future__ import annotations

import logging
import os
import shlex
import shutil
import signal
import subprocess
from pathlib import Path

from ..errors import CompileFailed, CompileTimeout
from .isolate import PATCHED_MAIN
from .typeset import typeset

log = logging.getLogger(__name__)

DEFAULT_LATEX_CMD = "pdflatex -interaction=nonstopmode -halt-on-error {main}"
LOG_TAIL_LINES = 40


def _log_tail(path: Path, fallback: str = "") -> str:
    text = path.read_text(encoding="utf-8", errors="replace") if path.is_file() else fallback
    return "\n".join(text.splitlines()[-LOG_TAIL_LINES:])


def resolve_command(command: str | None = None) -> list[str] | None:
    """Argument template for the compiler, or None for the builtin typesetter."""
    command = command or os.environ.get("LATEX_CMD") or DEFAULT_LATEX_CMD
    if command.strip() == "builtin":
        return None
    args = shlex.split(command)
    if not args or shutil.which(args[0]) is None:
        log.info("LaTeX compiler %r not found; using builtin typesetter", args[0] if args else command)
        return None
    return args


def compile_pdf(patched_dir: Path | str, timeout_s: int = 120, command: str | None = None,
                main: str = PATCHED_MAIN) -> Path:
    patched_dir = Path(patched_dir)
    main_path = patched_dir / main
    pdf = main_path.with_suffix(".pdf")
    log_file = main_path.with_suffix(".log")
    if pdf.exists():
        pdf.unlink()
    args = resolve_command(command)
    if args is None:
        try:
            return typeset(main_path, pdf, timeout_s=timeout_s)
        except CompileTimeout:
            raise
        except CompileFailed as exc:
            raise CompileFailed(f"builtin typesetting of {main_path} failed", _log_tail(log_file, exc.log)) from None

    fields = {"main": main, "stem": main_path.stem, "dir": str(patched_dir)}
    argv = [a.format(**fields) for a in args]
    proc = subprocess.Popen(argv, cwd=patched_dir, stdout=subprocess.PIPE, stderr=subprocess.STDOUT,
                            stdin=subprocess.DEVNULL, start_new_session=True)
    try:
        out, _ = proc.communicate(timeout=timeout_s)
    except subprocess.TimeoutExpired:
        os.killpg(proc.pid, signal.SIGKILL)
        proc.communicate()
        raise CompileTimeout(f"compiler exceeded {timeout_s}s on {main_path}") from None
    stdout = out.decode("utf-8", errors="replace")
    if not pdf.is_file():
        raise CompileFailed(f"compiler exited {proc.returncode} without producing {pdf.name}",
                            _log_tail(log_file, stdout))
    if proc.returncode != 0:
        log.warning("compiler exited %d but produced %s", proc.returncode, pdf.name)
    return pdf
