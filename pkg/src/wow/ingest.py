"""Corpus ETL: raw text files to clean Documents with metadata.

Handles Gutenberg-style boilerplate markers, `Key: Value` header metadata,
chapter detection, manifest-driven overrides and incremental additions.
Missing metadata is kept as None and surfaces downstream as the
"(unknown)" dimension member; rows are never dropped for missing data.
"""

from __future__ import annotations

import html
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

from wow.errors import ConfigError

log = logging.getLogger(__name__)

START_MARKER_RE = re.compile(
    r"^\*{3}\s*START OF (THE|THIS) PROJECT GUTENBERG.*\*{3}\s*$", re.IGNORECASE
)
END_MARKER_RE = re.compile(
    r"^\*{3}\s*END OF (THE|THIS) PROJECT GUTENBERG.*\*{3}\s*$", re.IGNORECASE
)
HEADER_LINE_RE = re.compile(r"^(Title|Author|Language|Release Date|Posting Date):\s*(.+)$")
CHAPTER_RE = re.compile(r"^(CHAPTER|Chapter)\s+([IVXLC]+|\d+)\b.*$", re.MULTILINE)

_YEAR_RE = re.compile(r"\d{4}")
_TAG_RE = re.compile(r"<[^>]*>")

# Marker provenance states
MARKERS_FULL = "full"
MARKERS_START_ONLY = "start_only"
MARKERS_NONE = "none"

FULL_CHAPTER = "FULL"
FRONT_CHAPTER = "FRONT"


@dataclass(frozen=True)
class RawFile:
    source_id: str
    text: str


@dataclass(frozen=True)
class DocMetadata:
    title: str
    author: str | None = None
    year: int | None = None
    nationality: str | None = None
    language: str | None = None
    era_override: str | None = None


@dataclass(frozen=True)
class Chapter:
    label: str
    start: int
    end: int


@dataclass(frozen=True)
class Document:
    doc_id: int
    source_id: str
    metadata: DocMetadata
    body: str
    chapters: tuple[Chapter, ...]
    marker_state: str = MARKERS_NONE


@dataclass(frozen=True)
class ManifestEntry:
    source_id: str
    title: str | None = None
    author: str | None = None
    year: int | None = None
    nationality: str | None = None
    era: str | None = None


@dataclass
class CorpusManifest:
    entries: list[ManifestEntry]
    base_dir: Path | None = None


@dataclass
class IngestError:
    source_id: str
    message: str


@dataclass
class IngestResult:
    documents: list[Document]
    errors: list[IngestError] = field(default_factory=list)


def read_raw(path: str | Path) -> RawFile:
    data = Path(path).read_bytes()
    return RawFile(source_id=str(path), text=data.decode("utf-8", errors="replace"))


def _line_spans(text: str):
    """Yield (start, end_without_newline, end_with_newline) per line."""
    start = 0
    n = len(text)
    while start <= n:
        nl = text.find("\n", start)
        if nl == -1:
            yield start, n, n
            return
        end = nl
        if end > start and text[end - 1] == "\r":
            end -= 1
        yield start, end, nl + 1
        start = nl + 1


def find_markers(text: str) -> tuple[tuple[int, int] | None, tuple[int, int] | None]:
    """Locate the first START marker line and the first END line after it.

    Returns ((start_line_begin, start_line_end_incl_newline), same for the
    END line), either of which may be None.
    """
    start_span = None
    end_span = None
    for begin, end, nl_end in _line_spans(text):
        line = text[begin:end]
        if start_span is None:
            if START_MARKER_RE.match(line):
                start_span = (begin, nl_end)
        elif END_MARKER_RE.match(line):
            end_span = (begin, nl_end)
            break
    return start_span, end_span


def strip_boilerplate(text: str) -> tuple[str, str]:
    """Return (body, header).

    Body is the text strictly between the first START marker line and the
    first END marker line after it, with surrounding blank lines stripped;
    header is everything before the START marker. Without markers the body
    is the full text and the header is empty. A START without an END keeps
    everything after the START line.
    """
    start_span, end_span = find_markers(text)
    if start_span is None:
        return text, ""
    header = text[: start_span[0]]
    if end_span is None:
        body = text[start_span[1]:]
    else:
        body = text[start_span[1]: end_span[0]]
    return body.strip("\r\n"), header


def marker_state(text: str) -> str:
    start_span, end_span = find_markers(text)
    if start_span is None:
        return MARKERS_NONE
    return MARKERS_FULL if end_span is not None else MARKERS_START_ONLY


def _parse_year(value: str) -> int | None:
    for match in _YEAR_RE.finditer(value):
        year = int(match.group())
        if 1 <= year <= 2100:
            return year
    return None


def extract_metadata(
    header: str,
    source_id: str,
    overrides: ManifestEntry | None = None,
    registry: dict[str, str] | None = None,
) -> DocMetadata:
    """Parse `Key: Value` header lines, apply manifest overrides.

    Precedence: manifest override > parsed header > author registry (for
    nationality only). Anything unparseable becomes None, except the title
    which falls back to the source id.
    """
    fields: dict[str, str] = {}
    for line in header.splitlines():
        m = HEADER_LINE_RE.match(line.strip())
        if m and m.group(1) not in fields:
            fields[m.group(1)] = m.group(2).strip()

    title = fields.get("Title")
    author = fields.get("Author")
    language = fields.get("Language")
    year = None
    for key in ("Release Date", "Posting Date"):
        if key in fields:
            year = _parse_year(fields[key])
            if year is not None:
                break

    nationality = None
    era = None
    if overrides is not None:
        title = overrides.title or title
        author = overrides.author or author
        year = overrides.year if overrides.year is not None else year
        nationality = overrides.nationality or None
        era = overrides.era or None
    if nationality is None and registry and author:
        nationality = registry.get(author)

    return DocMetadata(
        title=title or source_id,
        author=author,
        year=year,
        nationality=nationality,
        language=language,
        era_override=era,
    )


def detect_chapters(body: str) -> list[Chapter]:
    """Find chapter spans from heading lines.

    Text before the first heading becomes a synthetic FRONT chapter; a
    body without headings is a single FULL chapter. Repeated heading
    labels are suffixed to keep labels unique within the document.
    """
    matches = list(CHAPTER_RE.finditer(body))
    if not matches:
        return [Chapter(FULL_CHAPTER, 0, len(body))]

    chapters: list[Chapter] = []
    if body[: matches[0].start()].strip():
        chapters.append(Chapter(FRONT_CHAPTER, 0, matches[0].start()))
    for i, m in enumerate(matches):
        label = m.group(0).rstrip()
        content_start = body.find("\n", m.end())
        content_start = m.end() if content_start == -1 else content_start + 1
        content_end = matches[i + 1].start() if i + 1 < len(matches) else len(body)
        chapters.append(Chapter(label, content_start, content_end))

    seen: dict[str, int] = {}
    unique: list[Chapter] = []
    for ch in chapters:
        n = seen.get(ch.label, 0) + 1
        seen[ch.label] = n
        unique.append(ch if n == 1 else Chapter(f"{ch.label} #{n}", ch.start, ch.end))
    return unique


def load_manifest(path: str | Path) -> CorpusManifest:
    """Read a corpus manifest TSV.

    Columns: source_id, title, author, year, nationality, era. Empty
    cells mean "no override"; `#` starts a comment line.
    """
    path = Path(path)
    entries: list[ManifestEntry] = []
    seen: set[str] = set()
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        cols = line.split("\t")
        cols += [""] * (6 - len(cols))
        source_id = cols[0].strip()
        if not source_id:
            raise ConfigError(f"{path}:{lineno}: empty source_id")
        if source_id in seen:
            raise ConfigError(f"{path}:{lineno}: duplicate source_id {source_id!r}")
        seen.add(source_id)
        year: int | None = None
        if cols[3].strip():
            try:
                year = int(cols[3].strip())
            except ValueError:
                raise ConfigError(f"{path}:{lineno}: bad year {cols[3]!r}") from None
            if not 1 <= year <= 2100:
                raise ConfigError(f"{path}:{lineno}: year {year} out of range")
        entries.append(
            ManifestEntry(
                source_id=source_id,
                title=cols[1].strip() or None,
                author=cols[2].strip() or None,
                year=year,
                nationality=cols[4].strip() or None,
                era=cols[5].strip() or None,
            )
        )
    return CorpusManifest(entries=entries, base_dir=path.parent)


def load_registry(path: str | Path) -> dict[str, str]:
    """Read the author registry TSV: author <TAB> nationality."""
    registry: dict[str, str] = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) >= 2 and parts[0].strip():
            registry[parts[0].strip()] = parts[1].strip()
    return registry


def _looks_like_markup(source_id: str, text: str) -> bool:
    if source_id.lower().endswith((".xml", ".html", ".htm", ".xhtml")):
        return True
    head = text.lstrip()[:200].lower()
    return head.startswith(("<?xml", "<!doctype", "<html"))


def strip_markup(text: str) -> str:
    """Flatten XML/HTML-ish input to plain text (no structural use)."""
    return html.unescape(_TAG_RE.sub(" ", text))


def ingest_file(
    raw: RawFile,
    doc_id: int,
    overrides: ManifestEntry | None = None,
    registry: dict[str, str] | None = None,
) -> Document:
    text = raw.text
    if _looks_like_markup(raw.source_id, text):
        text = strip_markup(text)
    body, header = strip_boilerplate(text)
    metadata = extract_metadata(header, raw.source_id, overrides, registry)
    chapters = detect_chapters(body)
    return Document(
        doc_id=doc_id,
        source_id=raw.source_id,
        metadata=metadata,
        body=body,
        chapters=tuple(chapters),
        marker_state=marker_state(text),
    )


def ingest_corpus(
    manifest: CorpusManifest,
    registry: dict[str, str] | None = None,
    existing_ids: dict[str, int] | None = None,
) -> IngestResult:
    """Ingest every manifest entry into a Document.

    Ids are assigned densely in manifest order; sources already present in
    existing_ids keep their id, so re-running with an extended manifest
    appends new documents without renumbering old ones. Unreadable sources
    produce an error record and do not stop the rest of the corpus.
    """
    existing = dict(existing_ids or {})
    next_id = max(existing.values(), default=-1) + 1
    documents: list[Document] = []
    errors: list[IngestError] = []
    for entry in manifest.entries:
        path = Path(entry.source_id)
        if manifest.base_dir is not None and not path.is_absolute():
            path = manifest.base_dir / path
        try:
            raw = RawFile(entry.source_id, path.read_bytes().decode("utf-8", errors="replace"))
        except OSError as exc:
            errors.append(IngestError(entry.source_id, str(exc)))
            log.warning("skipping %s: %s", entry.source_id, exc)
            continue
        if entry.source_id in existing:
            doc_id = existing[entry.source_id]
        else:
            doc_id = next_id
            existing[entry.source_id] = doc_id
            next_id += 1
        documents.append(ingest_file(raw, doc_id, entry, registry))
    documents.sort(key=lambda d: d.doc_id)
    return IngestResult(documents=documents, errors=errors)
