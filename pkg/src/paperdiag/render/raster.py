"""PDF page rasterization and text extraction.

The default backend is PyMuPDF. Setting ``RASTER_CMD`` switches to an
external rasterizer, e.g.
``pdftoppm -gray -r {dpi} -f {page} -l {page} -singlefile -png {pdf} {out}``;
the command must write ``{out}.png``.
"""

from __future__ import annotations

import os
import shlex
import subprocess
import tempfile
from pathlib import Path

import cv2
import numpy as np
import pymupdf

from ..errors import PageOutOfRange


def page_count(pdf: Path | str) -> int:
    with pymupdf.open(pdf) as doc:
        return doc.page_count


def _check_page(pdf, page: int) -> None:
    n = page_count(pdf)
    if not 1 <= page <= n:
        raise PageOutOfRange(f"page {page} outside 1..{n} of {pdf}")


def rasterize_page(pdf: Path | str, page: int, dpi: int = 144, command: str | None = None) -> np.ndarray:
    """Render 1-indexed ``page`` as an 8-bit grayscale array."""
    _check_page(pdf, page)
    command = command or os.environ.get("RASTER_CMD")
    if command:
        with tempfile.TemporaryDirectory() as tmp:
            out = Path(tmp) / "page"
            args = [a.format(dpi=dpi, page=page, pdf=str(pdf), out=str(out)) for a in shlex.split(command)]
            subprocess.run(args, check=True, capture_output=True)
            img = cv2.imread(str(out.with_suffix(".png")), cv2.IMREAD_GRAYSCALE)
            if img is None:
                raise RuntimeError(f"rasterizer produced no image: {command}")
            return img
    with pymupdf.open(pdf) as doc:
        pix = doc[page - 1].get_pixmap(dpi=dpi, colorspace=pymupdf.csGRAY, alpha=False)
        buf = np.frombuffer(pix.samples, dtype=np.uint8).reshape(pix.height, pix.stride)
        return buf[:, : pix.width].copy()


def page_text(pdf: Path | str, page: int) -> str:
    _check_page(pdf, page)
    with pymupdf.open(pdf) as doc:
        return doc[page - 1].get_text()


def page_size_points(pdf: Path | str, page: int) -> tuple[float, float]:
    _check_page(pdf, page)
    with pymupdf.open(pdf) as doc:
        r = doc[page - 1].rect
        return r.width, r.height
