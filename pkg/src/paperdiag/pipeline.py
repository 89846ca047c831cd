"""Stage orchestration with per-paper checkpoints.

Layout under ``out_dir``::

    checkpoints/<stage>/<paper>.json   {"stage", "paper_id", "inputs_hash", "data"}
    renders/<paper>__<label>.png       cropped table images
    dataset/<task>/<split>.jsonl       emitted samples
    dataset/images/...                 figure and table images referenced by samples
    stats.json, stats.txt              dataset statistics
    events.jsonl                       one structured event per paper and stage
    resolved_config.json               the configuration actually used
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import shutil
import threading
import time
from concurrent.futures import ProcessPoolExecutor, ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Callable, Optional

import yaml

from . import __version__
from .align import CONTEXT_CAP, group_corefs
from .assemble import (
    DEFAULT_RATIOS, assemble_analysis, assemble_captioning, assemble_outline_rec, assign_splits, collect_assets,
    compute_stats, emit_jsonl, format_stats, load_samples, sample_rng,
)
from .errors import ConfigError, MissingCheckpoint, OutlineUnavailable, PaperDiagError
from .ingest import load_manifest, manifest_path
from .latex import load_main_text, parse_latex
from .llm import LlmClient, TokenBucket, client_from_env
from .models import Alignment, DocumentModel, Outline, PaperId, PaperSource
from .outline import OUTLINE_CAP, build_outline, choose_style
from .render import CannyParams, render_tables

log = logging.getLogger(__name__)

STAGES = ("parse", "align", "render-tables", "build-outlines", "assemble", "stats")
PREREQUISITES = {
    "parse": (),
    "align": ("parse",),
    "render-tables": ("parse",),
    "build-outlines": ("align",),
    "assemble": ("parse", "align", "render-tables", "build-outlines"),
    "stats": ("assemble",),
}


# -- configuration ----------------------------------------------------------

@dataclass
class Caps:
    outline: int = OUTLINE_CAP
    table_latex: int = 256
    caption: int = 256
    analysis: int = 256


@dataclass
class RenderSettings:
    dpi: int = 144
    canny_sigma: float = 1.4
    canny_low: int = 50
    canny_high: int = 150
    padding: int = 8
    margin: float = 0.05
    timeout_s: int = 120
    latex_cmd: Optional[str] = None
    raster_cmd: Optional[str] = None

    def canny(self) -> CannyParams:
        return CannyParams(self.canny_sigma, self.canny_low, self.canny_high, self.margin, self.padding)


@dataclass
class LlmSettings:
    base_url: Optional[str] = None
    model: str = "gpt-3.5-turbo"
    temperature: float = 0.0
    concurrency: int = 4
    requests_per_second: Optional[float] = None
    cache_dir: Optional[str] = None


@dataclass
class Flags:
    outline_free_variants: bool = False
    outline_rec_rate: float = 1.0


@dataclass
class PipelineConfig:
    corpus_dir: str = "corpus"
    out_dir: str = "build"
    seed: int = 0
    split_ratios: tuple = DEFAULT_RATIOS
    context_cap: int = CONTEXT_CAP
    workers: int = 1
    caps: Caps = field(default_factory=Caps)
    render: RenderSettings = field(default_factory=RenderSettings)
    llm: LlmSettings = field(default_factory=LlmSettings)
    flags: Flags = field(default_factory=Flags)

    def validate(self) -> "PipelineConfig":
        ratios = tuple(self.split_ratios)
        if len(ratios) != 3 or any(not isinstance(r, (int, float)) or r < 0 for r in ratios):
            raise ConfigError(f"split_ratios must be three non-negative numbers, got {ratios}")
        if abs(sum(ratios) - 1.0) > 1e-9:
            raise ConfigError(f"split_ratios must sum to 1 (got {sum(ratios):.6g})")
        for name in ("outline", "table_latex", "caption", "analysis"):
            if getattr(self.caps, name) <= 0:
                raise ConfigError(f"caps.{name} must be positive")
        if self.context_cap <= 0:
            raise ConfigError("context_cap must be positive")
        if not 0.0 <= self.flags.outline_rec_rate <= 1.0:
            raise ConfigError("flags.outline_rec_rate must lie in [0, 1]")
        if self.render.dpi <= 0 or self.render.timeout_s <= 0:
            raise ConfigError("render.dpi and render.timeout_s must be positive")
        if not 0 <= self.render.canny_low <= self.render.canny_high:
            raise ConfigError("render canny thresholds must satisfy 0 <= low <= high")
        if not 0 <= self.render.margin < 0.5:
            raise ConfigError("render.margin must lie in [0, 0.5)")
        if self.workers < 1 or self.llm.concurrency < 1:
            raise ConfigError("workers and llm.concurrency must be >= 1")
        self.split_ratios = tuple(float(r) for r in ratios)
        return self

    def to_dict(self) -> dict:
        d = asdict(self)
        d["split_ratios"] = list(self.split_ratios)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        sections = {"caps": Caps, "render": RenderSettings, "llm": LlmSettings, "flags": Flags}
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs = {}
        for key, value in d.items():
            if key in sections:
                if not isinstance(value, dict):
                    raise ConfigError(f"config section {key!r} must be a mapping")
                sub_known = {f.name for f in fields(sections[key])}
                bad = set(value) - sub_known
                if bad:
                    raise ConfigError(f"unknown keys in {key}: {sorted(bad)}")
                kwargs[key] = sections[key](**value)
            elif key == "split_ratios":
                if isinstance(value, str):
                    value = [float(x) for x in value.split(",")]
                kwargs[key] = tuple(value)
            else:
                kwargs[key] = value
        return cls(**kwargs).validate()

    @classmethod
    def load(cls, path: Path | str | None = None, overrides: Optional[dict] = None) -> "PipelineConfig":
        data: dict = {}
        if path is not None:
            text = Path(path).read_text(encoding="utf-8")
            try:
                data = (json.loads(text) if str(path).endswith(".json") else yaml.safe_load(text)) or {}
            except (ValueError, yaml.YAMLError) as exc:
                raise ConfigError(f"cannot parse config {path}: {exc}") from exc
            if not isinstance(data, dict):
                raise ConfigError(f"config {path} must be a mapping")
        for key, value in (overrides or {}).items():
            if value is None:
                continue
            if "." in key:
                section, sub = key.split(".", 1)
                data.setdefault(section, {})[sub] = value
            else:
                data[key] = value
        return cls.from_dict(data)


# -- corpus discovery -------------------------------------------------------

def _dir_to_id(name: str) -> Optional[str]:
    for candidate in (name, name.replace("_", "/", 1)):
        try:
            PaperId(candidate)
            return candidate
        except ValueError:
            continue
    return None


def discover_sources(corpus_dir: Path | str) -> list[PaperSource]:
    """Papers under ``corpus_dir``: from its manifest if present, else one per subdirectory.

    A subdirectory is named after its arXiv id (``/`` written as ``_``); an
    optional ``meta.json`` supplies category and year, and an optional
    ``src/`` subfolder holds the tree.
    """
    corpus_dir = Path(corpus_dir)
    if not corpus_dir.is_dir():
        raise ConfigError(f"corpus directory {corpus_dir} does not exist")
    mpath = manifest_path(corpus_dir)
    if mpath.exists():
        return load_manifest(mpath).sources(corpus_dir)
    out = []
    for sub in sorted(p for p in corpus_dir.iterdir() if p.is_dir()):
        arxiv_id = _dir_to_id(sub.name)
        if arxiv_id is None:
            continue
        meta = {}
        if (sub / "meta.json").is_file():
            meta = json.loads((sub / "meta.json").read_text(encoding="utf-8"))
        root = sub / "src" if (sub / "src").is_dir() else sub
        pid = PaperId(arxiv_id, str(meta.get("category", "")), int(meta.get("year", 0)))
        out.append(PaperSource(pid, root, "downloaded"))
    return sorted(out, key=lambda s: s.paper_id.arxiv_id)


def tree_hash(root: Path) -> str:
    h = hashlib.sha256()
    for p in sorted(root.rglob("*")):
        if p.is_file():
            h.update(str(p.relative_to(root).as_posix()).encode())
            h.update(b"\0")
            h.update(hashlib.sha256(p.read_bytes()).digest())
    return h.hexdigest()


def _hash(*parts) -> str:
    return hashlib.sha256(json.dumps([__version__, *parts], sort_keys=True, default=str).encode()).hexdigest()


# -- checkpoints and events -------------------------------------------------

class Checkpoints:
    def __init__(self, out_dir: Path):
        self.root = Path(out_dir) / "checkpoints"

    def path(self, stage: str, pid: PaperId) -> Path:
        return self.root / stage / f"{pid.safe_name}.json"

    def has_stage(self, stage: str) -> bool:
        d = self.root / stage
        return d.is_dir() and (d / "_complete").exists()

    def mark_complete(self, stage: str) -> None:
        d = self.root / stage
        d.mkdir(parents=True, exist_ok=True)
        (d / "_complete").write_text("", encoding="utf-8")

    def load(self, stage: str, pid: PaperId) -> Optional[dict]:
        p = self.path(stage, pid)
        if not p.is_file():
            return None
        return json.loads(p.read_text(encoding="utf-8"))

    def save(self, stage: str, pid: PaperId, inputs_hash: str, data) -> bool:
        """Write a checkpoint; returns False when an identical one already exists."""
        record = {"stage": stage, "paper_id": pid.arxiv_id, "inputs_hash": inputs_hash, "data": data}
        text = json.dumps(record, ensure_ascii=False, sort_keys=True, indent=1) + "\n"
        p = self.path(stage, pid)
        if p.is_file() and p.read_text(encoding="utf-8") == text:
            return False
        p.parent.mkdir(parents=True, exist_ok=True)
        tmp = p.with_suffix(".tmp")
        tmp.write_text(text, encoding="utf-8")
        os.replace(tmp, p)
        return True

    def data_hash(self, stage: str, pid: PaperId) -> Optional[str]:
        rec = self.load(stage, pid)
        if rec is None:
            return None
        return hashlib.sha256(json.dumps(rec["data"], sort_keys=True).encode()).hexdigest()


class EventLog:
    def __init__(self, path: Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def emit(self, stage: str, paper_id: Optional[str], event: str, code: str = "", message: str = "") -> None:
        rec = {"ts": round(time.time(), 3), "stage": stage, "paper_id": paper_id, "event": event,
               "code": code, "message": message}
        with self._lock, open(self.path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


@dataclass
class StageSummary:
    stage: str
    papers: int = 0
    changed: int = 0
    unchanged: int = 0
    failed: int = 0
    skipped: int = 0
    fatal: Optional[str] = None
    extra: dict = field(default_factory=dict)

    def line(self) -> str:
        if self.fatal:
            return f"{self.stage}: FATAL {self.fatal}"
        text = (f"{self.stage}: {self.papers} papers, {self.changed} changed, {self.unchanged} unchanged, "
                f"{self.failed} failed")
        if self.skipped:
            text += f", {self.skipped} skipped"
        for k, v in self.extra.items():
            text += f", {k}={v}"
        return text


# -- per-paper stage workers (top level so they pickle) ---------------------

def _parse_worker(source: PaperSource) -> dict:
    _, text = load_main_text(source)
    return parse_latex(text, source).to_dict()


def _render_worker(args) -> dict:
    source, renders_dir, settings = args
    result = render_tables(source, renders_dir, canny=settings.canny(), dpi=settings.dpi,
                           timeout_s=settings.timeout_s, latex_cmd=settings.latex_cmd,
                           raster_cmd=settings.raster_cmd)
    return {"images": dict(sorted(result.images.items())),
            "bboxes": {k: list(v) for k, v in sorted(result.bboxes.items())},
            "warnings": result.warnings}


def _error_payload(exc: BaseException) -> tuple[str, str]:
    code = getattr(exc, "code", "E_UNEXPECTED")
    return code, f"{type(exc).__name__}: {exc}"


class Pipeline:
    def __init__(self, config: PipelineConfig, llm_client: Optional[LlmClient] = None,
                 llm_factory: Optional[Callable[[PipelineConfig], LlmClient]] = None):
        self.config = config.validate()
        self.out_dir = Path(config.out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.ckpt = Checkpoints(self.out_dir)
        self.events = EventLog(self.out_dir / "events.jsonl")
        self._llm = llm_client
        self._llm_factory = llm_factory
        self._sources: Optional[list[PaperSource]] = None

    # helpers
    @property
    def sources(self) -> list[PaperSource]:
        if self._sources is None:
            self._sources = discover_sources(self.config.corpus_dir)
        return self._sources

    @property
    def dataset_dir(self) -> Path:
        return self.out_dir / "dataset"

    @property
    def renders_dir(self) -> Path:
        return self.out_dir / "renders"

    def llm(self) -> LlmClient:
        if self._llm is None:
            if self._llm_factory is not None:
                self._llm = self._llm_factory(self.config)
            else:
                self._llm = default_llm_client(self.config)
        return self._llm

    def write_resolved_config(self) -> Path:
        path = self.out_dir / "resolved_config.json"
        path.write_text(json.dumps(self.config.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path

    def _require(self, stage: str) -> None:
        for pre in PREREQUISITES[stage]:
            done = self.dataset_dir.joinpath("_complete").exists() if pre == "assemble" else self.ckpt.has_stage(pre)
            if not done:
                raise MissingCheckpoint(f"stage {stage!r} needs {pre!r} checkpoints; run {pre!r} first")

    def _map(self, fn, items, use_processes: bool):
        if self.config.workers <= 1 or len(items) <= 1:
            for it in items:
                yield it, _call(fn, it)
            return
        pool_cls = ProcessPoolExecutor if use_processes else ThreadPoolExecutor
        with pool_cls(max_workers=self.config.workers) as pool:
            futures = [(it, pool.submit(_call, fn, it)) for it in items]
            for it, fut in futures:
                yield it, fut.result()

    def _record(self, summary: StageSummary, stage: str, pid: PaperId, inputs_hash: str, data) -> None:
        changed = self.ckpt.save(stage, pid, inputs_hash, data)
        if changed:
            summary.changed += 1
            self.events.emit(stage, pid.arxiv_id, "changed")
        else:
            summary.unchanged += 1
            self.events.emit(stage, pid.arxiv_id, "unchanged")

    def _fail(self, summary: StageSummary, stage: str, pid: PaperId, exc_info: tuple[str, str]) -> None:
        summary.failed += 1
        code, message = exc_info
        log.warning("%s %s: %s", stage, pid.arxiv_id, message)
        self.events.emit(stage, pid.arxiv_id, "failed", code, message)

    def _fresh(self, stage: str, pid: PaperId, inputs_hash: str) -> bool:
        rec = self.ckpt.load(stage, pid)
        return rec is not None and rec.get("inputs_hash") == inputs_hash

    # stages
    def stage_parse(self) -> StageSummary:
        s = StageSummary("parse")
        todo = []
        for src in self.sources:
            s.papers += 1
            h = _hash("parse", tree_hash(src.root) if src.root.is_dir() else "")
            if self._fresh("parse", src.paper_id, h):
                s.unchanged += 1
                self.events.emit("parse", src.paper_id.arxiv_id, "unchanged")
            else:
                todo.append((src, h))
        hashes = {src.paper_id: h for src, h in todo}
        for src, (ok, payload) in self._map(_parse_worker, [t[0] for t in todo], use_processes=True):
            if ok:
                self._record(s, "parse", src.paper_id, hashes[src.paper_id], payload)
                for w in payload.get("warnings", []):
                    self.events.emit("parse", src.paper_id.arxiv_id, "warning", "W_PARSE", w)
            else:
                self._fail(s, "parse", src.paper_id, payload)
        self.ckpt.mark_complete("parse")
        return s

    def _model(self, pid: PaperId) -> Optional[DocumentModel]:
        rec = self.ckpt.load("parse", pid)
        return DocumentModel.from_dict(rec["data"]) if rec else None

    def stage_align(self) -> StageSummary:
        self._require("align")
        s = StageSummary("align")
        for src in self.sources:
            pid = src.paper_id
            parse_hash = self.ckpt.data_hash("parse", pid)
            if parse_hash is None:
                s.skipped += 1
                continue
            s.papers += 1
            h = _hash("align", parse_hash, self.config.context_cap)
            if self._fresh("align", pid, h):
                s.unchanged += 1
                continue
            try:
                model = self._model(pid)
                data = [a.to_dict() for a in group_corefs(model, self.config.context_cap)]
            except Exception as exc:  # per-paper failures never stop the stage
                self._fail(s, "align", pid, _error_payload(exc))
                continue
            self._record(s, "align", pid, h, data)
        self.ckpt.mark_complete("align")
        return s

    def stage_render(self) -> StageSummary:
        self._require("render-tables")
        s = StageSummary("render-tables")
        settings = self.config.render
        todo = []
        for src in self.sources:
            pid = src.paper_id
            parse_hash = self.ckpt.data_hash("parse", pid)
            if parse_hash is None:
                s.skipped += 1
                continue
            s.papers += 1
            model = self._model(pid)
            if not any(d.kind == "table" for d in model.diagrams):
                h = _hash("render", parse_hash, "no-tables")
                self._record(s, "render-tables", pid, h, {"images": {}, "bboxes": {}, "warnings": []})
                continue
            h = _hash("render", parse_hash, tree_hash(src.root), asdict(settings))
            images_ok = all((self.renders_dir / n).is_file()
                            for n in ((self.ckpt.load("render-tables", pid) or {}).get("data", {})
                                      .get("images", {}).values()))
            if self._fresh("render-tables", pid, h) and images_ok:
                s.unchanged += 1
                continue
            todo.append((src, h))
        hashes = {src.paper_id: h for src, h in todo}
        args = [(src, self.renders_dir, settings) for src, _ in todo]
        for (src, _, _), (ok, payload) in self._map(_render_worker, args, use_processes=True):
            pid = src.paper_id
            if not ok:
                code, message = payload
                if code == "E_COMPILE_FAILED":
                    # deterministic failure: checkpoint it so reruns do not retry
                    self._fail(s, "render-tables", pid, payload)
                    self.ckpt.save("render-tables", pid, hashes[pid],
                                   {"images": {}, "bboxes": {}, "warnings": [], "error": message})
                else:
                    self._fail(s, "render-tables", pid, payload)
                continue
            for w in payload["warnings"]:
                self.events.emit("render-tables", pid.arxiv_id, "warning", "W_RENDER", w)
            self._record(s, "render-tables", pid, hashes[pid], payload)
        self.ckpt.mark_complete("render-tables")
        return s

    def _outline_targets(self, pid: PaperId) -> tuple[Optional[DocumentModel], list[int]]:
        model = self._model(pid)
        rec = self.ckpt.load("align", pid)
        if model is None or rec is None:
            return model, []
        wanted = sorted({a["analysis_paragraph"] for a in rec["data"]})
        return model, [i for i in wanted if model.paragraphs[i].token_count <= self.config.caps.analysis]

    def stage_outlines(self) -> StageSummary:
        self._require("build-outlines")
        s = StageSummary("build-outlines")
        cfg = self.config
        client = None
        dropped = 0
        for src in self.sources:
            pid = src.paper_id
            align_hash = self.ckpt.data_hash("align", pid)
            if align_hash is None:
                s.skipped += 1
                continue
            s.papers += 1
            model, targets = self._outline_targets(pid)
            h = _hash("outline", align_hash, self.ckpt.data_hash("parse", pid), cfg.seed, cfg.caps.outline,
                      cfg.caps.analysis, cfg.llm.model, cfg.llm.temperature)
            if self._fresh("build-outlines", pid, h):
                s.unchanged += 1
                continue
            if targets and client is None:
                client = self.llm()

            def one(idx):
                style = choose_style(cfg.seed, f"{pid.arxiv_id}:{idx}")
                try:
                    return idx, build_outline(model.paragraphs[idx].text, style, client, cfg.caps.outline), None
                except OutlineUnavailable as exc:
                    return idx, None, exc

            data: dict[str, Optional[dict]] = {}
            with ThreadPoolExecutor(max_workers=max(1, cfg.llm.concurrency)) as pool:
                for idx, outline, exc in pool.map(one, targets):
                    data[str(idx)] = outline.to_dict() if outline else None
                    if exc is not None:
                        dropped += 1
                        self.events.emit("build-outlines", pid.arxiv_id, "outline_dropped", exc.code,
                                         f"paragraph {idx}: {exc}")
            self._record(s, "build-outlines", pid, h, data)
        s.extra["dropped_outlines"] = dropped
        self.ckpt.mark_complete("build-outlines")
        return s

    def _paper_inputs(self, src: PaperSource):
        pid = src.paper_id
        model = self._model(pid)
        align = self.ckpt.load("align", pid)
        render = self.ckpt.load("render-tables", pid)
        outlines = self.ckpt.load("build-outlines", pid)
        if model is None or align is None:
            return None
        alignments = [Alignment.from_dict(a) for a in align["data"]]
        images = (render or {}).get("data", {}).get("images", {})
        outl = {int(k): Outline.from_dict(v) for k, v in ((outlines or {}).get("data") or {}).items() if v}
        return model, alignments, images, outl

    def _assets(self, src: PaperSource, model: DocumentModel, images: dict):
        table_images = {label: f"images/tables/{name}" for label, name in images.items()}
        figure_paths = {p: f"images/figures/{src.paper_id.safe_name}/{p}"
                        for d in model.diagrams if d.kind == "figure" for p in d.graphics_paths}
        return collect_assets(model, table_images, figure_paths, self.config.caps.table_latex), figure_paths

    def _paper_samples(self, src, inputs, split: Optional[str]):
        cfg = self.config
        model, alignments, images, outlines = inputs
        assets, _ = self._assets(src, model, images)
        out = assemble_captioning(model, alignments, assets, cfg.seed, cfg.caps.caption, cfg.context_cap)
        out += assemble_analysis(model, alignments, outlines, assets, cfg.flags.outline_free_variants, cfg.seed,
                                 split, cfg.caps.analysis)
        if sample_rng(cfg.seed, src.paper_id.arxiv_id, "outline_rec").random() < cfg.flags.outline_rec_rate:
            for with_diagrams in (True, False):
                out += assemble_outline_rec(model, alignments, outlines, with_diagrams, assets, cfg.seed, split)
        return out

    def stage_assemble(self) -> StageSummary:
        self._require("assemble")
        cfg = self.config
        s = StageSummary("assemble")
        inputs = {}
        for src in self.sources:
            got = self._paper_inputs(src)
            if got is None:
                s.skipped += 1
                continue
            inputs[src.paper_id.arxiv_id] = (src, got)
        # splits are drawn over the papers that contribute at least one sample
        contributing = sorted(pid for pid, (src, got) in inputs.items() if self._paper_samples(src, got, None))
        s.papers = len(contributing)
        if not contributing:
            raise PaperDiagError("no paper produced any sample")
        splits = assign_splits(contributing, cfg.split_ratios, cfg.seed)
        samples = []
        for pid in contributing:
            src, got = inputs[pid]
            samples += [replace(x, split=splits[pid]) for x in self._paper_samples(src, got, splits[pid])]

        if self.dataset_dir.exists():
            shutil.rmtree(self.dataset_dir)
        self.dataset_dir.mkdir(parents=True)
        used = {d.value for x in samples for d in x.diagrams if d.kind != "table_latex"}
        for pid in contributing:
            src, (model, _, images, _) = inputs[pid]
            _, figure_paths = self._assets(src, model, images)
            for rel_src, rel_dst in figure_paths.items():
                if rel_dst in used:
                    dst = self.dataset_dir / rel_dst
                    dst.parent.mkdir(parents=True, exist_ok=True)
                    shutil.copyfile(src.root / rel_src, dst)
            for name in images.values():
                rel_dst = f"images/tables/{name}"
                if rel_dst in used:
                    dst = self.dataset_dir / rel_dst
                    dst.parent.mkdir(parents=True, exist_ok=True)
                    shutil.copyfile(self.renders_dir / name, dst)
        emit_jsonl(samples, self.dataset_dir)
        (self.dataset_dir / "splits.json").write_text(json.dumps(dict(sorted(splits.items())), indent=1) + "\n",
                                                      encoding="utf-8")
        (self.dataset_dir / "_complete").write_text("", encoding="utf-8")
        s.changed = len(contributing)
        s.extra["samples"] = len(samples)
        for pid in contributing:
            self.events.emit("assemble", pid, "ok", "", splits[pid])
        return s

    def stage_stats(self) -> StageSummary:
        self._require("stats")
        samples = load_samples(self.dataset_dir)
        report = compute_stats(samples)
        (self.out_dir / "stats.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        (self.out_dir / "stats.txt").write_text(format_stats(report) + "\n", encoding="utf-8")
        s = StageSummary("stats", papers=len({x.paper_id for x in samples}))
        s.extra["samples"] = len(samples)
        return s

    def run(self, stages) -> tuple[int, list[StageSummary]]:
        """Run ``stages`` in canonical order; exit status 1 iff a stage failed fatally."""
        unknown = [st for st in stages if st not in STAGES]
        if unknown:
            raise ConfigError(f"unknown stages {unknown}; choose from {', '.join(STAGES)}")
        self.write_resolved_config()
        runners = {
            "parse": self.stage_parse, "align": self.stage_align, "render-tables": self.stage_render,
            "build-outlines": self.stage_outlines, "assemble": self.stage_assemble, "stats": self.stage_stats,
        }
        summaries = []
        status = 0
        for stage in [st for st in STAGES if st in stages]:
            try:
                summary = runners[stage]()
            except PaperDiagError as exc:
                self.events.emit(stage, None, "fatal", exc.code, str(exc))
                summaries.append(StageSummary(stage, fatal=f"{exc.code}: {exc}"))
                status = 1
                break
            self.events.emit(stage, None, "summary", "", summary.line())
            summaries.append(summary)
        return status, summaries


def _call(fn, item):
    try:
        return True, fn(item)
    except PaperDiagError as exc:
        return False, _error_payload(exc)
    except Exception as exc:  # unexpected per-paper errors are logged, not fatal
        return False, ("E_UNEXPECTED", f"{type(exc).__name__}: {exc}")


def default_llm_client(config: PipelineConfig) -> LlmClient:
    settings = config.llm
    if settings.base_url:
        os.environ.setdefault("LLM_BASE_URL", settings.base_url)
    cache_dir = settings.cache_dir or str(Path(config.out_dir) / "llm_cache")
    limiter = TokenBucket(settings.requests_per_second) if settings.requests_per_second else None
    return client_from_env(cache_dir, model_name=os.environ.get("LLM_MODEL") or settings.model,
                           temperature=settings.temperature, concurrency=settings.concurrency,
                           rate_limiter=limiter)


__all__ = ["PipelineConfig", "Pipeline", "STAGES", "StageSummary", "discover_sources"]
