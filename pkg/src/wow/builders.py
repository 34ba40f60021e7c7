"""Cube construction: one pass over the corpus token streams.

Each document yields a partial cell map per cube; partials merge by
cell-wise sum, so merge order cannot change the result. Finest-level
dictionaries grow during the pass (in document order, hence
deterministically); hierarchy levels and edges are derived afterwards,
when the vocabulary is complete.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

from wow import textproc
from wow.cube import Axis, CubeBuilder, CubeSchema, SparseCube
from wow.dims import (
    Dictionary,
    Dimension,
    EraTable,
    build_book_dimension,
    build_numeric_dimension,
    build_word_dimension,
)
from wow.ingest import Document
from wow.textproc import WORD, Lexicons, Sentence

log = logging.getLogger(__name__)

WORD_FREQUENCY = "word_frequency"
SENTENCE_STYLE = "sentence_style"
SHORT_PHRASE = "short_phrase"
COOCCURRENCE = "cooccurrence"

CUBE_NAMES = (WORD_FREQUENCY, SENTENCE_STYLE, SHORT_PHRASE, COOCCURRENCE)

PHRASE_LEN = 4


def cube_schemas() -> dict[str, CubeSchema]:
    book = Axis("book", "book", "chapter")
    return {
        WORD_FREQUENCY: CubeSchema(
            WORD_FREQUENCY, (book, Axis("word", "word", "word"))
        ),
        SENTENCE_STYLE: CubeSchema(
            SENTENCE_STYLE,
            (
                book,
                Axis("first_word", "word", "word"),
                Axis("word_count", "word_count", "value"),
                Axis("comma_count", "comma_count", "value"),
                Axis("colon_semi_count", "colon_semi_count", "value"),
                Axis("stopword_count", "stopword_count", "value"),
            ),
        ),
        SHORT_PHRASE: CubeSchema(
            SHORT_PHRASE,
            (book,) + tuple(Axis(f"w{i+1}", "word", "word") for i in range(PHRASE_LEN)),
        ),
        COOCCURRENCE: CubeSchema(
            COOCCURRENCE,
            (
                Axis("word_a", "word", "stem"),
                Axis("join", "word", "word"),
                Axis("word_b", "word", "stem"),
                book,
            ),
        ),
    }


@dataclass
class Encoders:
    """Finest-level dictionaries grown while scanning token streams."""

    words: Dictionary
    stems: Dictionary
    word_count: Dictionary
    comma_count: Dictionary
    colon_semi_count: Dictionary
    stopword_count: Dictionary

    @classmethod
    def fresh(cls) -> "Encoders":
        return cls(*(Dictionary() for _ in range(6)))


def document_sentences(doc: Document, lexicons: Lexicons):
    """Yield (chapter_label, list of Sentence) per chapter, in order."""
    idx = 0
    for chapter in doc.chapters:
        text = doc.body[chapter.start:chapter.end]
        sentences = textproc.sentences_of(text, lexicons, first_idx=idx)
        idx += len(sentences)
        yield chapter.label, sentences


def _cooccurrence_triples(sentence: Sentence, lexicons: Lexicons):
    """(A, join, B) word norms for each joining-word occurrence.

    A is the nearest preceding non-stopword word in the sentence, B the
    nearest following one; occurrences missing either side are skipped.
    """
    words = [t.norm for t in sentence.tokens if t.kind == WORD]
    for i, w in enumerate(words):
        if w not in lexicons.joining_words:
            continue
        a = next(
            (words[j] for j in range(i - 1, -1, -1) if words[j] not in lexicons.stopwords),
            None,
        )
        b = next(
            (words[j] for j in range(i + 1, len(words)) if words[j] not in lexicons.stopwords),
            None,
        )
        if a is not None and b is not None:
            yield a, w, b


def build_document_partials(
    doc: Document,
    book_dim: Dimension,
    enc: Encoders,
    lexicons: Lexicons,
    schemas: dict[str, CubeSchema],
    which: tuple[str, ...] = CUBE_NAMES,
) -> dict[str, CubeBuilder]:
    partials = {name: CubeBuilder(schemas[name]) for name in which}
    chapters = book_dim.level_dicts["chapter"]
    stem_cache: dict[str, int] = {}

    for label, sentences in document_sentences(doc, lexicons):
        chap_id = chapters.encode(f"{doc.doc_id}/{label}")
        if chap_id is None:
            raise ValueError(f"chapter {label!r} missing from book dimension")
        for sent in sentences:
            word_ids = [
                enc.words.add(t.norm) for t in sent.tokens if t.kind == WORD
            ]
            if WORD_FREQUENCY in partials:
                wf = partials[WORD_FREQUENCY]
                for wid in word_ids:
                    wf.add((chap_id, wid))
            if SENTENCE_STYLE in partials:
                first = enc.words.add(sent.first_word) if sent.first_word else 0
                partials[SENTENCE_STYLE].add(
                    (
                        chap_id,
                        first,
                        enc.word_count.add(str(sent.word_count)),
                        enc.comma_count.add(str(sent.comma_count)),
                        enc.colon_semi_count.add(str(sent.colon_semi_count)),
                        enc.stopword_count.add(str(sent.stopword_count)),
                    )
                )
            if SHORT_PHRASE in partials:
                sp = partials[SHORT_PHRASE]
                for i in range(len(word_ids) - PHRASE_LEN + 1):
                    sp.add((chap_id, *word_ids[i:i + PHRASE_LEN]))
            if COOCCURRENCE in partials:
                co = partials[COOCCURRENCE]
                for a, join, b in _cooccurrence_triples(sent, lexicons):
                    for norm in (a, b):
                        if norm not in stem_cache:
                            stem_cache[norm] = enc.stems.add(textproc.stem(norm))
                    co.add(
                        (stem_cache[a], enc.words.add(join), stem_cache[b], chap_id)
                    )
    return partials


def build_cubes(
    documents: list[Document],
    lexicons: Lexicons,
    era_table: EraTable,
    which: tuple[str, ...] = CUBE_NAMES,
) -> tuple[dict[str, SparseCube], dict[str, Dimension]]:
    """Build the requested cubes and all dimensions for a corpus."""
    schemas = cube_schemas()
    unknown = [name for name in which if name not in schemas]
    if unknown:
        raise ValueError(f"unknown cube name(s): {', '.join(unknown)}")

    book_dim = build_book_dimension(documents, era_table)
    enc = Encoders.fresh()
    merged = {name: CubeBuilder(schemas[name]) for name in which}
    for doc in sorted(documents, key=lambda d: d.doc_id):
        partials = build_document_partials(doc, book_dim, enc, lexicons, schemas, which)
        for name, partial in partials.items():
            merged[name].merge(partial)
        log.debug("built partials for doc %d (%s)", doc.doc_id, doc.source_id)

    word_dim = build_word_dimension(enc.words, lexicons, stem_dict=enc.stems)
    dims = {
        "book": book_dim,
        "word": word_dim,
        "word_count": build_numeric_dimension("word_count", enc.word_count),
        "comma_count": build_numeric_dimension("comma_count", enc.comma_count),
        "colon_semi_count": build_numeric_dimension("colon_semi_count", enc.colon_semi_count),
        "stopword_count": build_numeric_dimension("stopword_count", enc.stopword_count),
    }
    cubes = {name: builder.build() for name, builder in merged.items()}
    return cubes, dims
