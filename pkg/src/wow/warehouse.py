"""Warehouse container and on-disk persistence.

Directory layout:

    warehouse/manifest.json     version, document count, cube and view lists
    warehouse/ingest.json       source_id -> doc_id (incremental ingest state)
    warehouse/docs/NNNNNN.json  ingested documents (metadata + body + chapters)
    warehouse/dims/<name>.json  dictionaries, hierarchies, edges
    warehouse/cubes/<file>.cube binary cells (see _encode_cube)

Cube files: magic "WOW1", u16 format version, u16 axis count, axis
descriptors, u64 cell count, then fixed-width records of little-endian
u32 coordinates and a u64 count, sorted row-major, and a trailing CRC32
of everything before it. Loading never yields a partial warehouse: any
failure raises before the object is returned.
"""

from __future__ import annotations

import json
import logging
import os
import struct
import zlib
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from wow import builders
from wow.builders import CUBE_NAMES, SENTENCE_STYLE, WORD_FREQUENCY
from wow.cube import Axis, CubeSchema, MaterializedView, SparseCube, materialize
from wow.dims import ALL_LEVEL, Dimension, EraTable
from wow.errors import (
    ChecksumError,
    FormatError,
    TruncationError,
    VersionError,
    WarehouseMissingError,
)
from wow.ingest import Chapter, DocMetadata, Document
from wow.textproc import Lexicons

log = logging.getLogger(__name__)

FORMAT_VERSION = 1
CUBE_MAGIC = b"WOW1"
CUBE_FORMAT_VERSION = 1

DEFAULT_VIEWS: tuple[tuple[str, str, dict[str, str]], ...] = (
    ("wf_author_word", WORD_FREQUENCY, {"book": "author", "word": "word"}),
    ("wf_century_word", WORD_FREQUENCY, {"book": "century", "word": "word"}),
    (
        "ss_century_bins",
        SENTENCE_STYLE,
        {
            "book": "century",
            "first_word": ALL_LEVEL,
            "word_count": "bin",
            "comma_count": "bin",
            "colon_semi_count": "bin",
            "stopword_count": "bin",
        },
    ),
)


@dataclass
class Warehouse:
    documents: list[Document] = field(default_factory=list)
    source_ids: dict[str, int] = field(default_factory=dict)
    dims: dict[str, Dimension] = field(default_factory=dict)
    cubes: dict[str, SparseCube] = field(default_factory=dict)
    views: dict[str, MaterializedView] = field(default_factory=dict)

    def views_of(self, cube_name: str) -> list[MaterializedView]:
        return [v for v in self.views.values() if v.base == cube_name]

    def reset_scan_counts(self) -> None:
        for c in self.cubes.values():
            c.scan_count = 0
        for v in self.views.values():
            v.cube.scan_count = 0


def build_warehouse(
    documents: list[Document],
    lexicons: Lexicons,
    era_table: EraTable,
    which: tuple[str, ...] = CUBE_NAMES,
    default_views: bool = True,
) -> Warehouse:
    """Build cubes, dimensions and the default summary views for a corpus."""
    cubes, dims = builders.build_cubes(documents, lexicons, era_table, which)
    wh = Warehouse(
        documents=list(documents),
        source_ids={d.source_id: d.doc_id for d in documents},
        dims=dims,
        cubes=cubes,
    )
    if default_views:
        for name, base, levels in DEFAULT_VIEWS:
            if base in cubes:
                wh.views[name] = materialize(cubes[base], dims, levels, name)
    return wh


# ---------------------------------------------------------------------------
# binary cube codec


def _encode_cube(cube: SparseCube) -> bytes:
    parts = [CUBE_MAGIC, struct.pack("<HH", CUBE_FORMAT_VERSION, len(cube.schema.axes))]
    for ax in cube.schema.axes:
        for text in (ax.name, ax.dim, ax.level):
            raw = text.encode("utf-8")
            parts.append(struct.pack("<H", len(raw)))
            parts.append(raw)
    parts.append(struct.pack("<Q", cube.ncells))
    coords = cube.coords.astype("<u4", copy=False)
    counts = cube.counts.astype("<u8", copy=False)
    k = coords.shape[1]
    record = np.zeros(cube.ncells, dtype=[("c", "<u4", (k,)), ("n", "<u8")])
    record["c"] = coords
    record["n"] = counts
    parts.append(record.tobytes())
    payload = b"".join(parts)
    return payload + struct.pack("<I", zlib.crc32(payload))


def _decode_cube(data: bytes, name: str) -> SparseCube:
    if len(data) < 4 or data[:4] != CUBE_MAGIC:
        raise FormatError(f"{name}: not a cube file (bad magic)")
    if len(data) < 12:
        raise TruncationError(f"{name}: file shorter than its header")
    stored_crc = struct.unpack("<I", data[-4:])[0]
    actual_crc = zlib.crc32(data[:-4])
    if stored_crc != actual_crc:
        raise ChecksumError(f"{name}: CRC mismatch")
    version, k = struct.unpack_from("<HH", data, 4)
    if version != CUBE_FORMAT_VERSION:
        raise VersionError(
            f"{name}: cube format v{version} not supported (expected v{CUBE_FORMAT_VERSION})"
        )
    off = 8
    fields = []
    try:
        for _ in range(3 * k):
            (n,) = struct.unpack_from("<H", data, off)
            off += 2
            fields.append(data[off:off + n].decode("utf-8"))
            off += n
        (ncells,) = struct.unpack_from("<Q", data, off)
        off += 8
    except struct.error as exc:
        raise TruncationError(f"{name}: truncated header") from exc
    axes = tuple(
        Axis(fields[3 * i], fields[3 * i + 1], fields[3 * i + 2]) for i in range(k)
    )
    record_size = 4 * k + 8
    expected = off + ncells * record_size + 4
    if len(data) != expected:
        raise TruncationError(
            f"{name}: expected {expected} bytes for {ncells} cells, found {len(data)}"
        )
    record = np.frombuffer(
        data, dtype=[("c", "<u4", (k,)), ("n", "<u8")], count=ncells, offset=off
    )
    coords = record["c"].astype(np.int32).reshape(ncells, k)
    counts = record["n"].astype(np.int64)
    return SparseCube(CubeSchema(name=name, axes=axes), coords, counts)


# ---------------------------------------------------------------------------
# save / load


def _write_atomic(path: Path, data: bytes) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def _dump_json(obj) -> bytes:
    return (json.dumps(obj, sort_keys=True, indent=1) + "\n").encode("utf-8")


def _doc_to_obj(doc: Document) -> dict:
    md = doc.metadata
    return {
        "doc_id": doc.doc_id,
        "source_id": doc.source_id,
        "marker_state": doc.marker_state,
        "metadata": {
            "title": md.title,
            "author": md.author,
            "year": md.year,
            "nationality": md.nationality,
            "language": md.language,
            "era_override": md.era_override,
        },
        "chapters": [[c.label, c.start, c.end] for c in doc.chapters],
        "body": doc.body,
    }


def _doc_from_obj(obj: dict) -> Document:
    md = obj["metadata"]
    return Document(
        doc_id=obj["doc_id"],
        source_id=obj["source_id"],
        marker_state=obj["marker_state"],
        metadata=DocMetadata(
            title=md["title"],
            author=md["author"],
            year=md["year"],
            nationality=md["nationality"],
            language=md["language"],
            era_override=md["era_override"],
        ),
        body=obj["body"],
        chapters=tuple(Chapter(label, start, end) for label, start, end in obj["chapters"]),
    )


def save_warehouse(wh: Warehouse, path: str | Path) -> None:
    root = Path(path)
    (root / "docs").mkdir(parents=True, exist_ok=True)
    (root / "dims").mkdir(exist_ok=True)
    (root / "cubes").mkdir(exist_ok=True)

    kept_docs = set()
    for doc in wh.documents:
        fname = f"{doc.doc_id:06d}.json"
        kept_docs.add(fname)
        _write_atomic(root / "docs" / fname, _dump_json(_doc_to_obj(doc)))
    _write_atomic(root / "ingest.json", _dump_json({"sources": wh.source_ids}))

    kept_dims = set()
    for name in sorted(wh.dims):
        fname = f"{name.replace('/', '_')}.json"
        kept_dims.add(fname)
        _write_atomic(root / "dims" / fname, _dump_json(wh.dims[name].to_json_dict()))

    kept_cubes = set()
    cube_entries = []
    for name in sorted(wh.cubes):
        fname = f"cube_{name}.cube"
        kept_cubes.add(fname)
        _write_atomic(root / "cubes" / fname, _encode_cube(wh.cubes[name]))
        cube_entries.append({"name": name, "file": fname})
    view_entries = []
    for name in sorted(wh.views):
        view = wh.views[name]
        fname = f"view_{name}.cube"
        kept_cubes.add(fname)
        _write_atomic(root / "cubes" / fname, _encode_cube(view.cube))
        view_entries.append(
            {"name": name, "base": view.base, "levels": view.levels, "file": fname}
        )

    manifest = {
        "format_version": FORMAT_VERSION,
        "created_at": datetime.now(timezone.utc).isoformat(),
        "documents": len(wh.documents),
        "cubes": cube_entries,
        "views": view_entries,
    }
    _write_atomic(root / "manifest.json", _dump_json(manifest))

    # drop files for entries no longer in the warehouse
    for sub, kept in (("docs", kept_docs), ("dims", kept_dims), ("cubes", kept_cubes)):
        for f in (root / sub).iterdir():
            if f.name not in kept and not f.name.endswith(".tmp"):
                f.unlink()


def load_warehouse(path: str | Path, require_cubes: bool = False) -> Warehouse:
    root = Path(path)
    manifest_path = root / "manifest.json"
    if not manifest_path.is_file():
        raise WarehouseMissingError(f"no warehouse manifest at {manifest_path}")
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"manifest.json is not valid JSON: {exc}") from exc
    version = manifest.get("format_version")
    if version != FORMAT_VERSION:
        raise VersionError(
            f"warehouse format v{version} not supported (expected v{FORMAT_VERSION})"
        )

    wh = Warehouse()
    docs_dir = root / "docs"
    if docs_dir.is_dir():
        for f in sorted(docs_dir.glob("*.json")):
            wh.documents.append(_doc_from_obj(json.loads(f.read_text(encoding="utf-8"))))
        wh.documents.sort(key=lambda d: d.doc_id)
    ingest_path = root / "ingest.json"
    if ingest_path.is_file():
        wh.source_ids = json.loads(ingest_path.read_text(encoding="utf-8"))["sources"]
    else:
        wh.source_ids = {d.source_id: d.doc_id for d in wh.documents}

    dims_dir = root / "dims"
    if dims_dir.is_dir():
        for f in sorted(dims_dir.glob("*.json")):
            dim = Dimension.from_json_dict(json.loads(f.read_text(encoding="utf-8")))
            wh.dims[dim.name] = dim

    if require_cubes and not manifest.get("cubes"):
        raise WarehouseMissingError(
            f"warehouse at {root} has no cubes; run `wow build` first"
        )
    for entry in manifest.get("cubes", []):
        data = (root / "cubes" / entry["file"]).read_bytes()
        wh.cubes[entry["name"]] = _decode_cube(data, entry["name"])
    for entry in manifest.get("views", []):
        data = (root / "cubes" / entry["file"]).read_bytes()
        wh.views[entry["name"]] = MaterializedView(
            name=entry["name"],
            base=entry["base"],
            levels=entry["levels"],
            cube=_decode_cube(data, entry["name"]),
        )
    return wh
