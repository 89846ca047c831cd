"""Paper index fetching, source bundle download and the corpus manifest."""

from __future__ import annotations

import gzip
import hashlib
import io
import json
import logging
import os
import shutil
import tarfile
import tempfile
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Optional
from urllib.parse import urlparse

import requests

from .errors import DuplicateEntry, IndexFetchError, IndexParseError, ManifestParseError
from .models import ARXIV_ID_RE, PaperId, PaperSource

log = logging.getLogger(__name__)

DEFAULT_INDEX_URL = "https://paperswithcode.com/api/v1/papers/"
DEFAULT_ARCHIVE_URL_TEMPLATE = "https://arxiv.org/e-print/{arxiv_id}"
MANIFEST_STATUSES = ("pending", "downloaded", "parsed", "failed", "missing")
# manifest records are written with exactly this key order
MANIFEST_FIELDS = ("paper_id", "source_path", "status", "checksum", "reason", "version")
ARCHIVE_NAME = "source.archive"
SOURCE_DIR = "src"


class HostRateLimiter:
    """Minimum delay between requests to the same host (thread-safe)."""

    def __init__(self, min_interval: float = 1.0, clock=time.monotonic, sleep=time.sleep):
        self.min_interval = min_interval
        self._clock = clock
        self._sleep = sleep
        self._next: dict[str, float] = {}
        self._lock = threading.Lock()

    def wait(self, url: str) -> None:
        host = urlparse(url).netloc or "local"
        with self._lock:
            now = self._clock()
            slot = max(now, self._next.get(host, now))
            self._next[host] = slot + self.min_interval
        if slot > now:
            self._sleep(slot - now)


# index -------------------------------------------------------------------

@dataclass(frozen=True)
class IndexFilters:
    year_range: Optional[tuple[int, int]] = None  # inclusive
    categories: Optional[frozenset[str]] = None  # None = all

    def accepts(self, pid: PaperId) -> bool:
        if self.year_range is not None and not (self.year_range[0] <= pid.year <= self.year_range[1]):
            return False
        return not self.categories or pid.category in self.categories


def _record_to_id(rec) -> Optional[PaperId]:
    if not isinstance(rec, dict):
        raise IndexParseError(f"index record is not an object: {rec!r}", rec)
    arxiv_id = rec.get("arxiv_id", rec.get("id"))
    if arxiv_id is None:
        return None  # index entries without an arXiv source
    if not isinstance(arxiv_id, str) or not ARXIV_ID_RE.match(arxiv_id.strip()):
        raise IndexParseError(f"malformed arxiv_id in index record {rec!r}", rec)
    year = rec.get("year")
    if year is None and rec.get("published"):
        year = str(rec["published"])[:4]
    try:
        year = int(year) if year is not None else 0
    except (TypeError, ValueError):
        raise IndexParseError(f"malformed year in index record {rec!r}", rec) from None
    category = rec.get("category") or rec.get("primary_category") or ""
    return PaperId(arxiv_id.strip(), str(category), year)


def _read_index_page(location: str, session, limiter: Optional[HostRateLimiter], retries: int = 3):
    if not urlparse(location).scheme.startswith("http"):
        path = location[7:] if location.startswith("file://") else location
        try:
            return json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise IndexFetchError(f"cannot read index {path}: {exc}") from exc
        except ValueError as exc:
            raise IndexParseError(f"index {path} is not valid JSON: {exc}") from exc
    last = None
    for attempt in range(retries):
        if limiter:
            limiter.wait(location)
        try:
            resp = session.get(location, timeout=30)
            if resp.status_code >= 500 or resp.status_code == 429:
                last = IndexFetchError(f"index returned HTTP {resp.status_code} for {location}")
            elif resp.status_code != 200:
                raise IndexFetchError(f"index returned HTTP {resp.status_code} for {location}")
            else:
                try:
                    return resp.json()
                except ValueError as exc:
                    raise IndexParseError(f"index page {location} is not valid JSON: {exc}") from exc
        except requests.RequestException as exc:
            last = IndexFetchError(f"network failure fetching {location}: {exc}")
        time.sleep(min(8.0, 0.5 * 2 ** attempt))
    raise last


def fetch_paper_index(index_endpoint: str, filters: IndexFilters = IndexFilters(), session=None,
                      limiter: Optional[HostRateLimiter] = None, max_pages: int = 100000) -> list[PaperId]:
    """All ids from a (paginated) index satisfying ``filters``, deduplicated and sorted.

    A page is either a JSON list of records or ``{"results": [...], "next": url}``.
    Records carry ``arxiv_id``, ``category`` and ``year`` (or an ISO ``published`` date).
    """
    if filters.year_range is not None and filters.year_range[0] > filters.year_range[1]:
        return []
    session = session or requests.Session()
    found: dict[str, PaperId] = {}
    location: Optional[str] = index_endpoint
    pages = 0
    while location and pages < max_pages:
        page = _read_index_page(location, session, limiter)
        pages += 1
        if isinstance(page, list):
            records, location = page, None
        elif isinstance(page, dict) and isinstance(page.get("results"), list):
            records, location = page["results"], page.get("next")
        else:
            raise IndexParseError(f"unrecognized index page shape at {location}", page)
        for rec in records:
            pid = _record_to_id(rec)
            if pid is not None and filters.accepts(pid):
                found.setdefault(pid.arxiv_id, pid)
    return sorted(found.values(), key=lambda p: p.arxiv_id)


def read_ids_file(path: Path | str) -> list[PaperId]:
    """Ids from a text file: one ``arxiv_id [category [year]]`` per line, ``#`` comments."""
    ids: dict[str, PaperId] = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.replace(",", " ").split()
        try:
            pid = PaperId(parts[0], parts[1] if len(parts) > 1 else "", int(parts[2]) if len(parts) > 2 else 0)
        except ValueError as exc:
            raise IndexParseError(f"{path}:{lineno}: {exc}", line) from exc
        ids.setdefault(pid.arxiv_id, pid)
    return sorted(ids.values(), key=lambda p: p.arxiv_id)


# manifest ----------------------------------------------------------------

@dataclass(frozen=True)
class ManifestEntry:
    paper_id: PaperId
    source_path: str  # relative to the corpus directory
    status: str = "pending"
    checksum: str = ""
    reason: str = ""
    version: str = "latest"

    def __post_init__(self):
        if self.status not in MANIFEST_STATUSES:
            raise ValueError(f"bad manifest status {self.status!r}")

    def to_dict(self) -> dict:
        d = {"paper_id": self.paper_id.to_dict(), "source_path": self.source_path, "status": self.status,
             "checksum": self.checksum, "reason": self.reason, "version": self.version}
        return {k: d[k] for k in MANIFEST_FIELDS}


@dataclass
class CorpusManifest:
    entries: list[ManifestEntry] = field(default_factory=list)

    def __post_init__(self):
        self._lock = threading.Lock()
        seen = set()
        for e in self.entries:
            if e.paper_id.arxiv_id in seen:
                raise DuplicateEntry(f"duplicate paper_id {e.paper_id.arxiv_id}")
            seen.add(e.paper_id.arxiv_id)

    def __eq__(self, other):
        return isinstance(other, CorpusManifest) and self.entries == other.entries

    def get(self, arxiv_id: str) -> Optional[ManifestEntry]:
        for e in self.entries:
            if e.paper_id.arxiv_id == arxiv_id:
                return e
        return None

    def upsert(self, entry: ManifestEntry) -> None:
        with self._lock:
            for i, e in enumerate(self.entries):
                if e.paper_id.arxiv_id == entry.paper_id.arxiv_id:
                    self.entries[i] = entry
                    return
            self.entries.append(entry)

    def sources(self, corpus_dir: Path | str, statuses=("downloaded", "parsed")) -> list[PaperSource]:
        corpus_dir = Path(corpus_dir)
        return [PaperSource(e.paper_id, corpus_dir / e.source_path, e.status, e.checksum)
                for e in sorted(self.entries, key=lambda e: e.paper_id.arxiv_id) if e.status in statuses]

    def validate(self, corpus_dir: Path | str) -> list[str]:
        """Problems with downloaded entries whose source tree is missing or has no .tex file."""
        problems = []
        for src in self.sources(corpus_dir, ("downloaded",)):
            if not src.root.is_dir() or not src.tex_files():
                problems.append(f"{src.paper_id.arxiv_id}: {src.root} missing or without .tex files")
        return problems


def save_manifest(manifest: CorpusManifest, path: Path | str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    with os.fdopen(fd, "w", encoding="utf-8") as fh:
        for e in manifest.entries:
            fh.write(json.dumps(e.to_dict(), ensure_ascii=False) + "\n")
    os.replace(tmp, path)


def load_manifest(path: Path | str) -> CorpusManifest:
    entries = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
                entry = ManifestEntry(PaperId.from_dict(d["paper_id"]), d["source_path"], d["status"],
                                      d.get("checksum", ""), d.get("reason", ""), d.get("version", "latest"))
            except (ValueError, KeyError, TypeError) as exc:
                raise ManifestParseError(f"corrupt manifest record ({exc})", lineno) from exc
            if entry.paper_id.arxiv_id in seen:
                raise DuplicateEntry(f"duplicate paper_id {entry.paper_id.arxiv_id}", lineno)
            seen.add(entry.paper_id.arxiv_id)
            entries.append(entry)
    return CorpusManifest(entries)


# download ----------------------------------------------------------------

class _Missing(Exception):
    pass


def _fetch_archive(url: str, session, limiter: Optional[HostRateLimiter], retries: int = 3) -> bytes:
    if not urlparse(url).scheme.startswith("http"):
        path = Path(url[7:] if url.startswith("file://") else url)
        if not path.is_file():
            raise _Missing(f"no archive at {path}")
        return path.read_bytes()
    last = None
    for attempt in range(retries):
        if limiter:
            limiter.wait(url)
        try:
            resp = session.get(url, timeout=120)
        except requests.RequestException as exc:
            last = IndexFetchError(f"network failure fetching {url}: {exc}")
        else:
            if resp.status_code in (404, 410):
                raise _Missing(f"HTTP {resp.status_code} for {url}")
            if resp.status_code == 200:
                return resp.content
            last = IndexFetchError(f"HTTP {resp.status_code} for {url}")
            if resp.status_code < 500 and resp.status_code != 429:
                break
        time.sleep(min(8.0, 0.5 * 2 ** attempt))
    raise last


class CorruptArchive(Exception):
    pass


class NoLatexSource(Exception):
    pass


def _safe_members(tar: tarfile.TarFile):
    for m in tar.getmembers():
        name = m.name.lstrip("./") if m.name.startswith("./") else m.name
        parts = Path(name).parts
        if not parts or name.startswith("/") or ".." in parts:
            log.warning("skipping unsafe archive member %r", m.name)
            continue
        if not (m.isfile() or m.isdir()):
            continue  # links and devices never leave the archive
        yield m


def unpack_archive(data: bytes, dest: Path) -> None:
    """Unpack a tar, gzip'd tar or gzip'd single file into ``dest``."""
    if data[:4] == b"%PDF":
        raise NoLatexSource("archive is a PDF, no LaTeX source")
    payload = data
    if data[:2] == b"\x1f\x8b":
        try:
            payload = gzip.decompress(data)
        except (OSError, EOFError) as exc:
            raise CorruptArchive(f"bad gzip stream: {exc}") from exc
    try:
        with tarfile.open(fileobj=io.BytesIO(payload), mode="r:*") as tar:
            members = list(_safe_members(tar))
            dest.mkdir(parents=True, exist_ok=True)
            for m in members:
                target = dest / m.name
                if m.isdir():
                    target.mkdir(parents=True, exist_ok=True)
                    continue
                target.parent.mkdir(parents=True, exist_ok=True)
                src = tar.extractfile(m)
                with open(target, "wb") as out:
                    shutil.copyfileobj(src, out)
            return
    except tarfile.ReadError:
        pass
    except (tarfile.TarError, EOFError, OSError) as exc:
        raise CorruptArchive(f"bad tar archive: {exc}") from exc
    if payload[:4] == b"%PDF":
        raise NoLatexSource("archive is a PDF, no LaTeX source")
    text = payload.decode("utf-8", errors="replace")
    if "\\documentclass" in text or "\\begin{document}" in text or "\\input" in text:
        dest.mkdir(parents=True, exist_ok=True)
        (dest / "main.tex").write_bytes(payload)
        return
    raise CorruptArchive("unrecognized archive format")


def _archive_url(template: str, pid: PaperId) -> str:
    return template.format(arxiv_id=pid.arxiv_id, safe_id=pid.safe_name)


def _version_of(pid: PaperId) -> str:
    m = ARXIV_ID_RE.match(pid.arxiv_id)
    return m.group(3)[1:] if m and m.group(3) else "latest"


def download_entry(paper_id: PaperId, dest_dir: Path | str, archive_url_template: str | None = None,
                   previous: Optional[ManifestEntry] = None, session=None,
                   limiter: Optional[HostRateLimiter] = None) -> ManifestEntry:
    """Fetch and unpack one paper under ``dest_dir/<paper>``; never raises for per-paper failures."""
    dest_dir = Path(dest_dir)
    template = archive_url_template or os.environ.get("ARCHIVE_URL_TEMPLATE") or DEFAULT_ARCHIVE_URL_TEMPLATE
    paper_dir = dest_dir / paper_id.safe_name
    src_dir = paper_dir / SOURCE_DIR
    archive = paper_dir / ARCHIVE_NAME
    rel = f"{paper_id.safe_name}/{SOURCE_DIR}"
    entry = ManifestEntry(paper_id, rel, "pending", version=_version_of(paper_id))

    def intact(checksum: str) -> bool:
        return bool(checksum) and src_dir.is_dir() and any(src_dir.rglob("*.tex")) \
            and archive.is_file() and hashlib.sha256(archive.read_bytes()).hexdigest() == checksum

    if previous is not None and previous.status in ("downloaded", "parsed") and intact(previous.checksum):
        return previous

    try:
        data = _fetch_archive(_archive_url(template, paper_id), session or requests.Session(), limiter)
    except _Missing as exc:
        return replace(entry, status="missing", reason=str(exc))
    except IndexFetchError as exc:
        return replace(entry, status="failed", reason=f"FetchError: {exc}")
    checksum = hashlib.sha256(data).hexdigest()
    if previous is not None and previous.checksum == checksum and intact(checksum):
        return replace(previous, status=previous.status if previous.status != "failed" else "downloaded")

    paper_dir.mkdir(parents=True, exist_ok=True)
    staging = Path(tempfile.mkdtemp(dir=paper_dir, prefix=".unpack-"))
    try:
        unpack_archive(data, staging)
        if not any(staging.rglob("*.tex")):
            raise NoLatexSource("archive contains no .tex file")
    except (CorruptArchive, NoLatexSource) as exc:
        shutil.rmtree(staging, ignore_errors=True)
        return replace(entry, status="failed", checksum=checksum, reason=f"{type(exc).__name__}: {exc}")
    if src_dir.exists():
        shutil.rmtree(src_dir)
    staging.rename(src_dir)
    tmp = archive.with_suffix(".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, archive)
    return replace(entry, status="downloaded", checksum=checksum)


def download_source(paper_id: PaperId, dest_dir: Path | str, archive_url_template: str | None = None,
                    manifest: Optional[CorpusManifest] = None, **kwargs) -> PaperSource:
    previous = manifest.get(paper_id.arxiv_id) if manifest is not None else None
    entry = download_entry(paper_id, dest_dir, archive_url_template, previous, **kwargs)
    if manifest is not None:
        manifest.upsert(entry)
    return PaperSource(paper_id, Path(dest_dir) / entry.source_path, entry.status, entry.checksum)


def ingest(ids: Iterable[PaperId], corpus_dir: Path | str, archive_url_template: str | None = None,
           workers: int = 4, min_interval: float = 1.0, session=None) -> CorpusManifest:
    """Download all ``ids`` into ``corpus_dir`` and persist ``corpus_dir/manifest.jsonl``.

    Downloads run in a thread pool; only this function's thread touches the
    manifest file, which is rewritten after every completed paper so an
    interrupted run resumes where it stopped.
    """
    corpus_dir = Path(corpus_dir)
    corpus_dir.mkdir(parents=True, exist_ok=True)
    path = manifest_path(corpus_dir)
    manifest = load_manifest(path) if path.exists() else CorpusManifest()
    limiter = HostRateLimiter(min_interval)
    session = session or requests.Session()
    ids = sorted({p.arxiv_id: p for p in ids}.values(), key=lambda p: p.arxiv_id)
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        futures = [pool.submit(download_entry, pid, corpus_dir, archive_url_template,
                               manifest.get(pid.arxiv_id), session, limiter) for pid in ids]
        for fut in futures:
            entry = fut.result()
            if entry.status in ("failed", "missing"):
                log.warning("%s: %s (%s)", entry.paper_id.arxiv_id, entry.status, entry.reason)
            manifest.upsert(entry)
            save_manifest(manifest, path)
    manifest.entries.sort(key=lambda e: e.paper_id.arxiv_id)
    save_manifest(manifest, path)
    return manifest


def manifest_path(corpus_dir: Path | str) -> Path:
    return Path(corpus_dir) / "manifest.jsonl"
