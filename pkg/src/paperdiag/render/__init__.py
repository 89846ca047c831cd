"""Table image rendering: isolate, compile, rasterize, crop."""

from __future__ import annotations

import logging
import re
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import cv2

from ..errors import NoTableDetected
from ..models import PaperSource
from .bbox import BBox, CannyParams, canny_edges, crop_table, detect_table_bbox
from .compile import compile_pdf, resolve_command
from .isolate import PATCHED_MAIN, RenderJob, empty_captions, isolate_tables
from .raster import page_count, page_size_points, page_text, rasterize_page

log = logging.getLogger(__name__)

__all__ = [
    "BBox", "CannyParams", "RenderJob", "RenderResult", "canny_edges", "compile_pdf", "crop_table",
    "detect_table_bbox", "empty_captions", "image_name", "isolate_tables", "page_count", "page_size_points",
    "page_text", "rasterize_page", "render_tables", "resolve_command",
]

_UNSAFE = re.compile(r"[^A-Za-z0-9._:+=-]")


def image_name(source: PaperSource, label: str) -> str:
    return f"{source.paper_id.safe_name}__{_UNSAFE.sub('_', label)}.png"


@dataclass
class RenderResult:
    images: dict[str, str] = field(default_factory=dict)  # label -> file name
    bboxes: dict[str, tuple[int, int, int, int]] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)


def render_tables(source: PaperSource, out_dir: Path | str, work_dir: Path | str | None = None,
                  canny: CannyParams = CannyParams(), dpi: int = 144, timeout_s: int = 120,
                  latex_cmd: str | None = None, raster_cmd: str | None = None) -> RenderResult:
    """Render every labeled table of ``source`` to ``out_dir/<paper>__<label>.png``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    result = RenderResult()
    with tempfile.TemporaryDirectory(prefix="paperdiag-render-") as tmp:
        patched = Path(work_dir) if work_dir else Path(tmp) / "src"
        patched_dir, jobs = isolate_tables(source, patched, raster_dpi=dpi)
        if not jobs:
            return result
        pdf = compile_pdf(patched_dir, timeout_s=timeout_s, command=latex_cmd)
        pages = page_count(pdf)
        if pages != len(jobs):
            result.warnings.append(f"expected {len(jobs)} table pages, got {pages}; page mapping unreliable, skipped")
            return result
        for job in jobs:
            page = rasterize_page(pdf, job.page_number, dpi=job.raster_dpi, command=raster_cmd)
            try:
                box = detect_table_bbox(page, canny)
            except NoTableDetected as exc:
                result.warnings.append(f"{job.table_label}: {exc}")
                continue
            name = image_name(source, job.table_label)
            cv2.imwrite(str(out_dir / name), crop_table(page, box))
            result.images[job.table_label] = name
            result.bboxes[job.table_label] = box.as_tuple()
    return result
