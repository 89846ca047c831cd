"""Core data types shared between pipeline stages.

All types serialize to plain JSON-compatible dicts via ``to_dict`` and can be
rebuilt with ``from_dict``; checkpoints depend on that round trip being exact.
"""

from __future__ import annotations

import re
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

ARXIV_ID_RE = re.compile(r"^(\d+\.\d+|[a-z][a-z\-]*(\.[A-Z]{2})?/\d+)(v\d+)?$")


@dataclass(frozen=True, order=True)
class PaperId:
    arxiv_id: str
    category: str = ""
    year: int = 0

    def __post_init__(self):
        if not self.arxiv_id or not ARXIV_ID_RE.match(self.arxiv_id):
            raise ValueError(f"malformed arXiv id: {self.arxiv_id!r}")

    @property
    def safe_name(self) -> str:
        """Filesystem-safe form; legacy ids like ``cs/0112017`` contain a slash."""
        return self.arxiv_id.replace("/", "_")

    def to_dict(self) -> dict:
        return {"arxiv_id": self.arxiv_id, "category": self.category, "year": self.year}

    @classmethod
    def from_dict(cls, d: dict) -> "PaperId":
        return cls(str(d["arxiv_id"]), str(d.get("category") or ""), int(d.get("year") or 0))


@dataclass(frozen=True)
class PaperSource:
    paper_id: PaperId
    root: Path
    status: str = "downloaded"
    checksum: str = ""

    def tex_files(self) -> list[Path]:
        return sorted(p for p in self.root.rglob("*") if p.is_file() and p.suffix.lower() == ".tex")


@dataclass(frozen=True)
class Paragraph:
    index: int
    text: str
    ref_labels: tuple[str, ...] = ()
    token_count: int = 0

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "text": self.text,
            "ref_labels": list(self.ref_labels),
            "token_count": self.token_count,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Paragraph":
        return cls(d["index"], d["text"], tuple(d["ref_labels"]), d["token_count"])


@dataclass(frozen=True)
class DiagramEnv:
    kind: str  # "figure" | "table"
    label: str
    caption: str
    graphics_paths: tuple[str, ...] = ()
    latex_body: str = ""

    def to_dict(self) -> dict:
        d = asdict(self)
        d["graphics_paths"] = list(self.graphics_paths)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DiagramEnv":
        return cls(d["kind"], d["label"], d["caption"], tuple(d["graphics_paths"]), d["latex_body"])


@dataclass(frozen=True)
class DocumentModel:
    paper_id: PaperId
    paragraphs: tuple[Paragraph, ...]
    diagrams: tuple[DiagramEnv, ...]
    label_index: dict = field(default_factory=dict)
    warnings: tuple[str, ...] = field(default=(), compare=False)

    def diagram(self, label: str) -> DiagramEnv:
        return self.diagrams[self.label_index[label]]

    def to_dict(self) -> dict:
        return {
            "paper_id": self.paper_id.to_dict(),
            "paragraphs": [p.to_dict() for p in self.paragraphs],
            "diagrams": [d.to_dict() for d in self.diagrams],
            "label_index": dict(self.label_index),
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DocumentModel":
        return cls(
            PaperId.from_dict(d["paper_id"]),
            tuple(Paragraph.from_dict(p) for p in d["paragraphs"]),
            tuple(DiagramEnv.from_dict(x) for x in d["diagrams"]),
            dict(d["label_index"]),
            tuple(d.get("warnings", ())),
        )


@dataclass(frozen=True)
class Alignment:
    diagram_labels: tuple[str, ...]
    first_ref_paragraph: int
    analysis_paragraph: int
    context: str
    context_token_count: int

    def to_dict(self) -> dict:
        d = asdict(self)
        d["diagram_labels"] = list(self.diagram_labels)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Alignment":
        return cls(
            tuple(d["diagram_labels"]),
            d["first_ref_paragraph"],
            d["analysis_paragraph"],
            d["context"],
            d["context_token_count"],
        )


@dataclass(frozen=True)
class Outline:
    style: str  # "concise" | "keypoints"
    points: tuple[str, ...]
    rendered: str
    token_count: int

    def to_dict(self) -> dict:
        return {
            "style": self.style,
            "points": list(self.points),
            "rendered": self.rendered,
            "token_count": self.token_count,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Outline":
        return cls(d["style"], tuple(d["points"]), d["rendered"], d["token_count"])


DIAGRAM_KINDS = ("figure_image", "table_image", "table_latex")
TASKS = ("captioning", "analysis", "outline_rec")
SPLITS = ("train", "val", "test")


@dataclass(frozen=True)
class DiagramPayload:
    kind: str
    value: str  # image path relative to the dataset root, or LaTeX code

    def to_dict(self) -> dict:
        return {"kind": self.kind, "value": self.value}

    @classmethod
    def from_dict(cls, d: dict) -> "DiagramPayload":
        if d["kind"] not in DIAGRAM_KINDS:
            raise ValueError(f"unknown diagram kind {d['kind']!r}")
        return cls(d["kind"], d["value"])


@dataclass(frozen=True)
class TaskSample:
    sample_id: str
    task: str
    paper_id: str
    context: str
    instruction: str
    target: str
    diagrams: tuple[DiagramPayload, ...] = ()
    outline: Optional[str] = None
    split: Optional[str] = None

    # record key order is part of the output format
    def to_dict(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "task": self.task,
            "paper_id": self.paper_id,
            "split": self.split,
            "context": self.context,
            "outline": self.outline,
            "instruction": self.instruction,
            "diagrams": [d.to_dict() for d in self.diagrams],
            "target": self.target,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TaskSample":
        if d["task"] not in TASKS:
            raise ValueError(f"unknown task {d['task']!r}")
        if d.get("split") is not None and d["split"] not in SPLITS:
            raise ValueError(f"unknown split {d['split']!r}")
        return cls(
            sample_id=d["sample_id"],
            task=d["task"],
            paper_id=d["paper_id"],
            context=d["context"],
            instruction=d["instruction"],
            target=d["target"],
            diagrams=tuple(DiagramPayload.from_dict(x) for x in d["diagrams"]),
            outline=d.get("outline"),
            split=d.get("split"),
        )
