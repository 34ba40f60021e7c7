"""Sentence segmentation, tokenization and word-level classification.

Everything here is a pure function over immutable inputs; the lexicons are
loaded once and shared read-only, so per-document processing can run in
parallel.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

from wow import porter
from wow.errors import ConfigError

WORD = "WORD"
PUNCT = "PUNCT"

COMMA = "COMMA"
COLON_SEMI = "COLON_SEMI"
TERMINAL = "TERMINAL"
OTHER = "OTHER"

_PUNCT_CLASS = {
    ",": COMMA,
    ";": COLON_SEMI,
    ":": COLON_SEMI,
    ".": TERMINAL,
    "!": TERMINAL,
    "?": TERMINAL,
}

NO_SUFFIX = "(none)"
NO_LIST = "(no list)"
UNKNOWN_POS = "unknown"

_POS_TAGS = {"NOUN", "VERB", "ADJ", "ADV", "FUNCTION"}
_AMBIGUOUS = "AMBIGUOUS"

# Words keep internal apostrophes (don't); hyphenated compounds split.
_TOKEN_RE = re.compile(r"[A-Za-z]+(?:['’][A-Za-z]+)*|[,;:.!?]")

_TERMINATOR_RE = re.compile(r"[.!?]")
_WORD_BEFORE_RE = re.compile(r"([A-Za-z]+)$")


@dataclass(frozen=True)
class Token:
    surface: str
    norm: str
    kind: str
    punct_class: str | None
    sentence_idx: int
    position_in_sentence: int


@dataclass(frozen=True)
class Sentence:
    tokens: tuple[Token, ...]
    word_count: int
    comma_count: int
    colon_semi_count: int
    stopword_count: int
    first_word: str | None


@dataclass
class Lexicons:
    stopwords: frozenset[str]
    pos_table: dict[str, str]
    suffix_table: tuple[str, ...]  # longest-first
    user_lists: dict[str, frozenset[str]]  # insertion order = file order
    joining_words: frozenset[str]
    abbreviations: frozenset[str] = field(default_factory=frozenset)


def _read_entries(path: Path) -> list[str]:
    entries = []
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        entries.append(line)
    return entries


def default_lexicon_dir() -> Path:
    return Path(__file__).parent / "data"


def load_lexicons(directory: str | Path | None = None) -> Lexicons:
    """Load all lexicon files from a directory (default: shipped data)."""
    d = Path(directory) if directory is not None else default_lexicon_dir()

    stopwords = frozenset(w.lower() for w in _read_entries(d / "stopwords.txt"))
    joining = frozenset(w.lower() for w in _read_entries(d / "joining.txt"))
    abbrevs = frozenset(w.lower() for w in _read_entries(d / "abbreviations.txt"))

    suffixes = [s.lower() for s in _read_entries(d / "suffixes.txt")]
    suffixes.sort(key=lambda s: (-len(s), s))

    pos_table: dict[str, str] = {}
    for entry in _read_entries(d / "pos.tsv"):
        parts = entry.split("\t")
        if len(parts) != 2:
            raise ConfigError(f"pos.tsv: expected 'word<TAB>tag', got {entry!r}")
        word, tag = parts[0].lower(), parts[1].upper()
        if tag not in _POS_TAGS and tag != _AMBIGUOUS:
            raise ConfigError(f"pos.tsv: unknown tag {tag!r} for {word!r}")
        if word in pos_table and pos_table[word] != tag:
            raise ConfigError(f"pos.tsv: conflicting tags for {word!r}")
        pos_table[word] = tag

    user_lists: dict[str, frozenset[str]] = {}
    for path in sorted(d.glob("wordlist.*.txt")):
        name = path.name[len("wordlist."):-len(".txt")]
        if not name:
            raise ConfigError(f"user list file has empty name: {path.name}")
        if name in user_lists:
            raise ConfigError(f"duplicate user list name: {name}")
        user_lists[name] = frozenset(w.lower() for w in _read_entries(path))

    return Lexicons(
        stopwords=stopwords,
        pos_table=pos_table,
        suffix_table=tuple(suffixes),
        user_lists=user_lists,
        joining_words=joining,
        abbreviations=abbrevs,
    )


def segment_sentences(text: str, abbreviations: frozenset[str] = frozenset()) -> list[tuple[int, int]]:
    """Split text into sentence spans (character offsets).

    A boundary is a `.`, `!` or `?` followed by whitespace and a capital
    letter, or by end of text. A period directly after a listed
    abbreviation never ends a sentence. Whitespace-only spans are dropped.
    """
    spans: list[tuple[int, int]] = []
    start = 0
    n = len(text)
    for m in _TERMINATOR_RE.finditer(text):
        end = m.end()
        if m.group() == ".":
            before = _WORD_BEFORE_RE.search(text, start, m.start())
            if before and before.group(1).lower() in abbreviations:
                continue
        j = end
        while j < n and text[j].isspace():
            j += 1
        if j < n and (j == end or not text[j].isupper()):
            continue
        if text[start:end].strip():
            spans.append((start, end))
        start = j
    if text[start:].strip():
        spans.append((start, n))
    return spans


def tokenize(text: str, sentence_idx: int = 0) -> list[Token]:
    """Turn one sentence span into word and punctuation tokens.

    Words are runs of letters, keeping internal apostrophes; each of
    , ; : . ! ? becomes one punctuation token; digits and every other
    symbol are dropped. Hyphenated compounds split at the hyphen.
    """
    tokens: list[Token] = []
    for pos, m in enumerate(_TOKEN_RE.finditer(text)):
        surface = m.group()
        if surface in _PUNCT_CLASS:
            tokens.append(Token(surface, surface, PUNCT, _PUNCT_CLASS[surface],
                                sentence_idx, pos))
        else:
            norm = surface.lower().replace("’", "'")
            tokens.append(Token(surface, norm, WORD, None, sentence_idx, pos))
    return tokens


def make_sentence(tokens: list[Token], stopwords: frozenset[str]) -> Sentence:
    words = [t for t in tokens if t.kind == WORD]
    return Sentence(
        tokens=tuple(tokens),
        word_count=len(words),
        comma_count=sum(1 for t in tokens if t.punct_class == COMMA),
        colon_semi_count=sum(1 for t in tokens if t.punct_class == COLON_SEMI),
        stopword_count=sum(1 for t in words if t.norm in stopwords),
        first_word=words[0].norm if words else None,
    )


def sentences_of(text: str, lexicons: Lexicons, first_idx: int = 0) -> list[Sentence]:
    """Segment and tokenize a text into Sentence records."""
    out = []
    for i, (s, e) in enumerate(segment_sentences(text, lexicons.abbreviations)):
        tokens = tokenize(text[s:e], sentence_idx=first_idx + i)
        out.append(make_sentence(tokens, lexicons.stopwords))
    return out


def stem(norm: str) -> str:
    """Stem of a normalized word (apostrophes stripped first)."""
    return porter.stem(norm.replace("'", ""))


def suffix_of(norm: str, lexicons: Lexicons) -> str:
    for sfx in lexicons.suffix_table:
        if norm.endswith(sfx):
            return sfx
    return NO_SUFFIX


def pos_of(norm: str, lexicons: Lexicons) -> str:
    tag = lexicons.pos_table.get(norm)
    if tag is None or tag == _AMBIGUOUS:
        return UNKNOWN_POS
    return tag


def classify_user_list(stem_str: str, lexicons: Lexicons) -> str:
    for name, members in lexicons.user_lists.items():
        if stem_str in members:
            return name
    return NO_LIST
