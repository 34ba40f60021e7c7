"""Dictionary-encoded dimensions and level-to-level rollup maps.

A Dimension owns one member dictionary per level and a table of edges
(child level -> parent level -> parent id per child id). Hierarchies are
named, linearly ordered level lists sharing those edges, so a level that
appears in several hierarchies (book, year, stem) has exactly one
dictionary and one parent map per adjacent pair. Member id 0 is reserved
for "(unknown)" in every dictionary and propagates upward unchanged.

The pseudo-level "ALL" exists on every dimension: every member rolls to
the single member "ALL" with id 0.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from wow import textproc
from wow.errors import ConfigError, QueryError
from wow.ingest import Document
from wow.textproc import Lexicons

log = logging.getLogger(__name__)

UNKNOWN = "(unknown)"
ALL_LEVEL = "ALL"
ALL_MEMBER = "ALL"


class Dictionary:
    """Bidirectional member-string <-> dense-id map; id 0 is "(unknown)"."""

    __slots__ = ("_by_str", "_by_id")

    def __init__(self, members: list[str] | None = None):
        self._by_str: dict[str, int] = {}
        self._by_id: list[str] = []
        if members is not None:
            if not members or members[0] != UNKNOWN:
                raise ConfigError("member list must start with the (unknown) member")
            for m in members:
                self.add(m)
        else:
            self.add(UNKNOWN)

    def add(self, member: str) -> int:
        mid = self._by_str.get(member)
        if mid is None:
            mid = len(self._by_id)
            self._by_str[member] = mid
            self._by_id.append(member)
        return mid

    def encode(self, member: str) -> int | None:
        return self._by_str.get(member)

    def decode(self, mid: int) -> str:
        return self._by_id[mid]

    def members(self) -> list[str]:
        return list(self._by_id)

    def __len__(self) -> int:
        return len(self._by_id)

    def __contains__(self, member: str) -> bool:
        return member in self._by_str


@dataclass(frozen=True)
class Hierarchy:
    name: str
    levels: tuple[str, ...]  # finest -> coarsest


@dataclass
class Dimension:
    name: str
    finest_level: str
    level_dicts: dict[str, Dictionary]
    hierarchies: dict[str, Hierarchy]
    edges: dict[tuple[str, str], np.ndarray]  # (child, parent) -> parent id per child id
    numeric: bool = False
    _path_cache: dict[tuple[str, str], np.ndarray | None] = field(
        default_factory=dict, repr=False
    )

    def has_level(self, level: str) -> bool:
        return level == ALL_LEVEL or level in self.level_dicts

    def level_size(self, level: str) -> int:
        if level == ALL_LEVEL:
            return 1
        return len(self.level_dicts[level])

    def member_name(self, level: str, mid: int) -> str:
        if level == ALL_LEVEL:
            return ALL_MEMBER
        return self.level_dicts[level].decode(mid)

    def level_map(self, from_level: str, to_level: str) -> np.ndarray | None:
        """Total map of member ids from one level to a coarser one.

        Returns None when to_level is not reachable from from_level in any
        hierarchy. from -> from is the identity; anything -> ALL is 0.
        """
        key = (from_level, to_level)
        if key in self._path_cache:
            return self._path_cache[key]
        result = self._compute_level_map(from_level, to_level)
        self._path_cache[key] = result
        return result

    def _compute_level_map(self, from_level: str, to_level: str) -> np.ndarray | None:
        if not self.has_level(from_level) or not self.has_level(to_level):
            return None
        if from_level == to_level:
            return np.arange(self.level_size(from_level), dtype=np.int32)
        if to_level == ALL_LEVEL:
            return np.zeros(self.level_size(from_level), dtype=np.int32)
        if from_level == ALL_LEVEL:
            return None
        for hname in sorted(self.hierarchies):
            levels = self.hierarchies[hname].levels
            if from_level in levels and to_level in levels:
                i, j = levels.index(from_level), levels.index(to_level)
                if i < j:
                    arr = self.edges[(levels[i], levels[i + 1])]
                    for k in range(i + 1, j):
                        arr = self.edges[(levels[k], levels[k + 1])][arr]
                    return arr.astype(np.int32, copy=False)
        return None

    def reachable_levels(self, from_level: str) -> list[str]:
        """Levels servable from from_level, coarsest-inclusive, plus ALL."""
        out = [from_level] if from_level != ALL_LEVEL else []
        for hname in sorted(self.hierarchies):
            levels = self.hierarchies[hname].levels
            if from_level in levels:
                for lv in levels[levels.index(from_level) + 1:]:
                    if lv not in out:
                        out.append(lv)
        out.append(ALL_LEVEL)
        return out

    def numeric_values(self) -> np.ndarray:
        """Integer value per finest-level member id; unknown = INT64_MIN."""
        if not self.numeric:
            raise QueryError(f"dimension {self.name!r} is not numeric")
        members = self.level_dicts[self.finest_level].members()
        vals = np.empty(len(members), dtype=np.int64)
        vals[0] = np.iinfo(np.int64).min
        for i, m in enumerate(members[1:], 1):
            vals[i] = int(m)
        return vals

    def to_json_dict(self) -> dict:
        return {
            "name": self.name,
            "finest_level": self.finest_level,
            "numeric": self.numeric,
            "levels": {lv: d.members() for lv, d in self.level_dicts.items()},
            "hierarchies": {h.name: list(h.levels) for h in self.hierarchies.values()},
            "edges": {
                f"{child}>{parent}": arr.tolist()
                for (child, parent), arr in self.edges.items()
            },
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "Dimension":
        dim = cls(
            name=obj["name"],
            finest_level=obj["finest_level"],
            level_dicts={lv: Dictionary(ms) for lv, ms in obj["levels"].items()},
            hierarchies={
                name: Hierarchy(name, tuple(levels))
                for name, levels in obj["hierarchies"].items()
            },
            edges={},
            numeric=obj.get("numeric", False),
        )
        for key, arr in obj["edges"].items():
            child, parent = key.split(">", 1)
            dim.edges[(child, parent)] = np.asarray(arr, dtype=np.int32)
        return dim


def rollup_member(
    dimension: Dimension,
    hierarchy: str,
    member_id: int,
    target_level: str,
    from_level: str | None = None,
) -> int:
    """Roll one member id to a target level by stepping adjacent maps.

    This intentionally composes the maps one edge at a time (rather than
    using the cached composed arrays) so it can serve as the slow,
    independent counterpart of the vectorized path.
    """
    h = dimension.hierarchies.get(hierarchy)
    if h is None:
        raise QueryError(f"unknown hierarchy {hierarchy!r} in dimension {dimension.name!r}")
    if target_level == ALL_LEVEL:
        return 0
    start = from_level if from_level is not None else h.levels[0]
    if start == target_level:
        return member_id
    if start not in h.levels or target_level not in h.levels:
        raise QueryError(f"level {target_level!r} not in hierarchy {hierarchy!r}")
    i, j = h.levels.index(start), h.levels.index(target_level)
    if i > j:
        raise QueryError(f"cannot roll down from {start!r} to {target_level!r}")
    mid = member_id
    for k in range(i, j):
        mid = int(dimension.edges[(h.levels[k], h.levels[k + 1])][mid])
    return mid


# ---------------------------------------------------------------------------
# era table


@dataclass(frozen=True)
class EraTable:
    rows: tuple[tuple[str, int, int], ...]  # (name, start_year, end_year)

    def era_of(self, year: int) -> str:
        for name, start, end in self.rows:
            if start <= year <= end:
                return name
        return UNKNOWN


def load_era_table(path: str | Path | None = None) -> EraTable:
    """Load the era TSV and reject overlapping intervals."""
    p = Path(path) if path is not None else textproc.default_lexicon_dir() / "eras.tsv"
    rows: list[tuple[str, int, int]] = []
    for lineno, line in enumerate(p.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise ConfigError(f"{p}:{lineno}: expected name<TAB>start<TAB>end")
        name = parts[0].strip()
        try:
            start, end = int(parts[1]), int(parts[2])
        except ValueError:
            raise ConfigError(f"{p}:{lineno}: years must be integers") from None
        if start > end:
            raise ConfigError(f"{p}:{lineno}: start year after end year")
        rows.append((name, start, end))
    for i, (name_a, s_a, e_a) in enumerate(rows):
        for name_b, s_b, e_b in rows[i + 1:]:
            if s_a <= e_b and s_b <= e_a:
                raise ConfigError(
                    f"{p}: eras {name_a!r} and {name_b!r} overlap"
                )
    return EraTable(rows=tuple(rows))


def map_year_to_era(year: int, era_table: EraTable) -> str:
    return era_table.era_of(year)


# ---------------------------------------------------------------------------
# book dimension


def _ordinal(n: int) -> str:
    if n % 100 in (11, 12, 13):
        return f"{n}th"
    return f"{n}{ {1: 'st', 2: 'nd', 3: 'rd'}.get(n % 10, 'th') }"


def century_label(year: int) -> str:
    """Century n covers years [100(n-1)+1, 100n]."""
    return _ordinal((year - 1) // 100 + 1)


def decade_label(year: int) -> str:
    return f"{(year // 10) * 10}s"


def build_book_dimension(
    documents: list[Document], era_table: EraTable
) -> Dimension:
    """Chapter-grained book dimension with provenance/time/era hierarchies.

    chapter -> book -> author -> nationality
    chapter -> book -> year -> decade -> century
    chapter -> book -> year -> era

    Nationality attaches to the author; a book with an unknown author is
    unknown at the nationality level too, whatever its manifest says.
    """
    levels = ("chapter", "book", "author", "nationality", "year", "decade", "century", "era")
    dicts = {lv: Dictionary() for lv in levels}
    parent: dict[tuple[str, str], dict[int, int]] = {
        ("chapter", "book"): {0: 0},
        ("book", "author"): {0: 0},
        ("author", "nationality"): {0: 0},
        ("book", "year"): {0: 0},
        ("year", "decade"): {0: 0},
        ("year", "century"): {0: 0},
        ("year", "era"): {0: 0},
    }

    era_overrides: dict[int, str] = {}  # year id -> overridden era name
    year_values: dict[int, int] = {}  # year id -> integer year
    book_titles: set[str] = set()

    for doc in sorted(documents, key=lambda d: d.doc_id):
        md = doc.metadata
        title = md.title
        if title in book_titles:
            title = f"{title} (doc {doc.doc_id})"
        book_titles.add(title)
        book_id = dicts["book"].add(title)

        author_id = dicts["author"].add(md.author) if md.author else 0
        parent[("book", "author")][book_id] = author_id
        if author_id != 0:
            nat_id = dicts["nationality"].add(md.nationality) if md.nationality else 0
            nat_map = parent[("author", "nationality")]
            prev = nat_map.get(author_id)
            if prev is None or (prev == 0 and nat_id != 0):
                nat_map[author_id] = nat_id
            elif nat_id not in (0, prev):
                log.warning(
                    "conflicting nationality for author %r; keeping %r",
                    md.author, dicts["nationality"].decode(prev),
                )

        if md.year is not None:
            year_id = dicts["year"].add(str(md.year))
            year_values[year_id] = md.year
            if md.era_override:
                prev_era = era_overrides.get(year_id)
                if prev_era is not None and prev_era != md.era_override:
                    raise ConfigError(
                        f"conflicting era overrides for year {md.year}: "
                        f"{prev_era!r} vs {md.era_override!r}"
                    )
                era_overrides[year_id] = md.era_override
        else:
            year_id = 0
            if md.era_override:
                log.warning(
                    "%s: era override %r ignored (no year)", doc.source_id, md.era_override
                )
        parent[("book", "year")][book_id] = year_id

        for chapter in doc.chapters:
            chap_id = dicts["chapter"].add(f"{doc.doc_id}/{chapter.label}")
            parent[("chapter", "book")][chap_id] = book_id

    for year_id, year in sorted(year_values.items()):
        parent[("year", "decade")][year_id] = dicts["decade"].add(decade_label(year))
        parent[("year", "century")][year_id] = dicts["century"].add(century_label(year))
        era_name = era_overrides.get(year_id, era_table.era_of(year))
        parent[("year", "era")][year_id] = (
            dicts["era"].add(era_name) if era_name != UNKNOWN else 0
        )

    edges = {}
    for (child, par), mapping in parent.items():
        arr = np.zeros(len(dicts[child]), dtype=np.int32)
        for cid, pid in mapping.items():
            arr[cid] = pid
        edges[(child, par)] = arr

    return Dimension(
        name="book",
        finest_level="chapter",
        level_dicts=dicts,
        hierarchies={
            "provenance": Hierarchy("provenance", ("chapter", "book", "author", "nationality")),
            "time": Hierarchy("time", ("chapter", "book", "year", "decade", "century")),
            "era": Hierarchy("era", ("chapter", "book", "year", "era")),
        },
        edges=edges,
    )


# ---------------------------------------------------------------------------
# word dimension


def build_word_dimension(
    vocabulary: Dictionary, lexicons: Lexicons, stem_dict: Dictionary | None = None
) -> Dimension:
    """Word dimension over the corpus vocabulary.

    Hierarchies: stem (word -> stem), suffix, pos, and userlist
    (word -> stem -> list name). A stem dictionary already seeded by cube
    construction may be passed in so its ids are preserved.
    """
    dicts = {
        "word": vocabulary,
        "stem": stem_dict if stem_dict is not None else Dictionary(),
        "suffix": Dictionary(),
        "pos": Dictionary(),
        "userlist": Dictionary(),
    }
    words = vocabulary.members()
    word_to_stem = np.zeros(len(words), dtype=np.int32)
    word_to_suffix = np.zeros(len(words), dtype=np.int32)
    word_to_pos = np.zeros(len(words), dtype=np.int32)
    for wid, word in enumerate(words):
        if wid == 0:
            continue
        word_to_stem[wid] = dicts["stem"].add(textproc.stem(word))
        word_to_suffix[wid] = dicts["suffix"].add(textproc.suffix_of(word, lexicons))
        word_to_pos[wid] = dicts["pos"].add(textproc.pos_of(word, lexicons))

    stems = dicts["stem"].members()
    stem_to_list = np.zeros(len(stems), dtype=np.int32)
    for sid, s in enumerate(stems):
        if sid == 0:
            continue
        stem_to_list[sid] = dicts["userlist"].add(textproc.classify_user_list(s, lexicons))

    return Dimension(
        name="word",
        finest_level="word",
        level_dicts=dicts,
        hierarchies={
            "stem": Hierarchy("stem", ("word", "stem")),
            "suffix": Hierarchy("suffix", ("word", "suffix")),
            "pos": Hierarchy("pos", ("word", "pos")),
            "userlist": Hierarchy("userlist", ("word", "stem", "userlist")),
        },
        edges={
            ("word", "stem"): word_to_stem,
            ("word", "suffix"): word_to_suffix,
            ("word", "pos"): word_to_pos,
            ("stem", "userlist"): stem_to_list,
        },
    )


# ---------------------------------------------------------------------------
# numeric count dimensions


def bin_label(value: int) -> str:
    if value == 0:
        return "0"
    if value <= 5:
        return "1-5"
    if value <= 10:
        return "6-10"
    if value <= 20:
        return "11-20"
    if value <= 40:
        return "21-40"
    return "41+"


def build_numeric_dimension(name: str, values: Dictionary) -> Dimension:
    """Bucket hierarchy over an integer-valued count dimension."""
    bins = Dictionary()
    members = values.members()
    value_to_bin = np.zeros(len(members), dtype=np.int32)
    for vid, m in enumerate(members):
        if vid == 0:
            continue
        value_to_bin[vid] = bins.add(bin_label(int(m)))
    return Dimension(
        name=name,
        finest_level="value",
        level_dicts={"value": values, "bin": bins},
        hierarchies={"bins": Hierarchy("bins", ("value", "bin"))},
        edges={("value", "bin"): value_to_bin},
        numeric=True,
    )
