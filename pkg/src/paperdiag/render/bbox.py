"""Table bounding-box detection on an isolated page raster (Canny edges)."""

from __future__ import annotations

from dataclasses import dataclass

import cv2
import numpy as np

from ..errors import NoTableDetected


@dataclass(frozen=True)
class CannyParams:
    sigma: float = 1.4
    low: int = 50
    high: int = 150
    margin: float = 0.05
    padding: int = 8
    ink_threshold: int = 128


@dataclass(frozen=True)
class BBox:
    """Half-open pixel box: columns x0..x1-1, rows y0..y1-1."""

    x0: int
    y0: int
    x1: int
    y1: int

    def __post_init__(self):
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise ValueError(f"degenerate bbox {self}")

    @property
    def area(self) -> int:
        return (self.x1 - self.x0) * (self.y1 - self.y0)

    def iou(self, other: "BBox") -> float:
        ix = max(0, min(self.x1, other.x1) - max(self.x0, other.x0))
        iy = max(0, min(self.y1, other.y1) - max(self.y0, other.y0))
        inter = ix * iy
        return inter / (self.area + other.area - inter)

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.x0, self.y0, self.x1, self.y1)


def canny_edges(gray: np.ndarray, params: CannyParams = CannyParams()) -> np.ndarray:
    blurred = cv2.GaussianBlur(gray, (0, 0), params.sigma)
    return cv2.Canny(blurred, params.low, params.high)


def detect_table_bbox(page_image: np.ndarray, params: CannyParams = CannyParams()) -> BBox:
    """Bounds of all Canny edge pixels outside the page margin band, padded.

    The edge box is snapped to the dark pixels it encloses (blur shifts edges
    by a pixel or two), but the result always contains every edge pixel.
    """
    gray = page_image if page_image.ndim == 2 else cv2.cvtColor(page_image, cv2.COLOR_BGR2GRAY)
    h, w = gray.shape
    mh, mw = int(round(h * params.margin)), int(round(w * params.margin))
    edges = canny_edges(gray, params)
    work = np.zeros_like(edges, dtype=bool)
    work[mh:h - mh, mw:w - mw] = edges[mh:h - mh, mw:w - mw] > 0
    ys, xs = np.nonzero(work)
    if xs.size == 0:
        raise NoTableDetected("no edge pixels inside the working area")
    ex0, ex1, ey0, ey1 = int(xs.min()), int(xs.max()) + 1, int(ys.min()), int(ys.max()) + 1

    x0, y0, x1, y1 = ex0, ey0, ex1, ey1
    slack = 3
    sx0, sy0 = max(mw, ex0 - slack), max(mh, ey0 - slack)
    sx1, sy1 = min(w - mw, ex1 + slack), min(h - mh, ey1 + slack)
    iy, ix = np.nonzero(gray[sy0:sy1, sx0:sx1] < params.ink_threshold)
    if ix.size:
        x0, x1 = sx0 + int(ix.min()), sx0 + int(ix.max()) + 1
        y0, y1 = sy0 + int(iy.min()), sy0 + int(iy.max()) + 1

    p = params.padding
    return BBox(
        max(0, min(x0 - p, ex0)),
        max(0, min(y0 - p, ey0)),
        min(w, max(x1 + p, ex1)),
        min(h, max(y1 + p, ey1)),
    )


def crop_table(page_image: np.ndarray, bbox: BBox) -> np.ndarray:
    h, w = page_image.shape[:2]
    if not (0 <= bbox.x0 < bbox.x1 <= w and 0 <= bbox.y0 < bbox.y1 <= h):
        raise ValueError(f"bbox {bbox.as_tuple()} outside image {w}x{h}")
    return page_image[bbox.y0:bbox.y1, bbox.x0:bbox.x1].copy()
