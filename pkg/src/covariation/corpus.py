"""Annotated transcript model and CoNLL-U-like reader/writer.

Input format: one document per block, blocks separated by blank lines.
Each block starts with ``# speaker_id = X`` and ``# source = Y`` comments,
followed by token lines with at least six tab-separated columns::

    ID  FORM  LEMMA  UPOS  XPOS  FEATS  [...]

FEATS is ``Key=Value`` pairs joined by ``|`` or ``_`` for none. Multiword
range lines (``1-2``) and empty nodes (``1.1``) are skipped.
"""

from __future__ import annotations

import csv
import enum
import functools
import io
import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, TextIO


class CorpusError(ValueError):
    """Raised for malformed corpus or metadata input."""


_FEATURE = re.compile(r"[^\s=]+=[^\s=]+")


@dataclass(frozen=True)
class MorphFeatures:
    """Immutable set of ``Key=Value`` morphological features."""

    entries: frozenset[str] = frozenset()

    def __post_init__(self):
        keys = set()
        for entry in self.entries:
            if not _FEATURE.fullmatch(entry):
                raise CorpusError(f"invalid morph feature {entry!r}")
            key = entry.split("=", 1)[0]
            if key in keys:
                raise CorpusError(f"duplicate morph key {key!r}")
            keys.add(key)

    @staticmethod
    @functools.lru_cache(maxsize=4096)
    def parse(text: str) -> "MorphFeatures":
        text = text.strip()
        if text in ("", "_"):
            return MorphFeatures()
        return MorphFeatures(frozenset(text.split("|")))

    def as_dict(self) -> dict[str, str]:
        return dict(e.split("=", 1) for e in self.entries)

    def issuperset(self, features: Iterable[str]) -> bool:
        return self.entries.issuperset(features)

    def __str__(self) -> str:
        if not self.entries:
            return "_"
        # UD orders features by key, case-insensitively
        return "|".join(sorted(self.entries, key=lambda e: e.lower()))

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class Token:
    index: int
    orth: str
    lemma: str
    upos: str
    morph: MorphFeatures = MorphFeatures()
    # case-folded forms used for matching
    lower: str = field(init=False, repr=False, compare=False)
    lemma_lower: str = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "lower", self.orth.lower())
        object.__setattr__(self, "lemma_lower", self.lemma.lower())

    @property
    def is_punct(self) -> bool:
        return self.upos == "PUNCT"


@dataclass(frozen=True)
class Document:
    speaker_id: str
    source_file: str
    tokens: tuple[Token, ...] = ()

    def __post_init__(self):
        if not self.speaker_id:
            raise CorpusError("document without speaker_id")
        for i, tok in enumerate(self.tokens):
            if tok.index != i:
                raise CorpusError(
                    f"{self.source_file}: token indices must be contiguous from 0 "
                    f"(position {i} has index {tok.index})")

    def __len__(self) -> int:
        return len(self.tokens)


class Displacement(str, enum.Enum):
    D1 = "D1"
    D2 = "D2"
    D3 = "D3"
    D4_BAHIA = "D4_Bahia"
    D4_ALAGOAS = "D4_Alagoas"
    D4_OTHER = "D4_Other"


class Gender(str, enum.Enum):
    F = "F"
    M = "M"
    OTHER = "O"  # other or unknown


class TimeInProgram(str, enum.Enum):
    EARLY = "early"
    LATE = "late"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class SpeakerMetadata:
    speaker_id: str
    displacement: Displacement
    gender: Gender
    age: int | None
    time_in_program: TimeInProgram

    def __post_init__(self):
        if not self.speaker_id:
            raise CorpusError("empty speaker_id")
        if self.age is not None and not 15 <= self.age <= 100:
            raise CorpusError(f"{self.speaker_id}: age {self.age} outside [15, 100]")


METADATA_COLUMNS = ("speaker_id", "displacement", "gender", "age", "time_in_program")


def _open_text(source: str | TextIO) -> TextIO:
    if isinstance(source, str):
        return io.StringIO(source)
    return source


def _iter_blocks(stream: TextIO) -> Iterator[tuple[int, list[tuple[int, str]]]]:
    block: list[tuple[int, str]] = []
    start = 0
    for lineno, raw in enumerate(stream, start=1):
        line = raw.rstrip("\r\n")
        if not line.strip():
            if block:
                yield start, block
                block = []
            continue
        if not block:
            start = lineno
        block.append((lineno, line))
    if block:
        yield start, block


def _parse_block(start: int, lines: list[tuple[int, str]]) -> Document:
    speaker_id = None
    source = None
    tokens: list[Token] = []
    for lineno, line in lines:
        if line.startswith("#"):
            key, sep, value = line[1:].partition("=")
            if not sep:
                continue
            key = key.strip()
            if key == "speaker_id":
                speaker_id = value.strip()
            elif key == "source":
                source = value.strip()
            continue
        cols = line.split("\t")
        if len(cols) < 6:
            raise CorpusError(f"line {lineno}: expected at least 6 tab-separated columns, got {len(cols)}")
        tid = cols[0].strip()
        if "-" in tid or "." in tid:
            continue
        if not tid.isdigit():
            raise CorpusError(f"line {lineno}: token id {tid!r} is not an integer")
        form, lemma, upos = cols[1], cols[2], cols[3].strip()
        if not form or not upos:
            raise CorpusError(f"line {lineno}: empty form or upos")
        try:
            morph = MorphFeatures.parse(cols[5])
        except CorpusError as exc:
            raise CorpusError(f"line {lineno}: {exc}") from None
        tokens.append(Token(len(tokens), form, lemma, upos, morph))
    if not speaker_id:
        raise CorpusError(f"document block starting at line {start} has no '# speaker_id' header")
    return Document(speaker_id, source or "", tuple(tokens))


def parse_annotated(source: str | TextIO) -> list[Document]:
    """Parse CoNLL-U-like text (a string or an open text stream) into documents."""
    stream = _open_text(source)
    return [_parse_block(start, block) for start, block in _iter_blocks(stream)]


def read_corpus(paths: Iterable[str]) -> list[Document]:
    docs: list[Document] = []
    for path in paths:
        with open(path, encoding="utf-8") as fh:
            docs.extend(parse_annotated(fh))
    return docs


def serialize_document(doc: Document) -> str:
    lines = [f"# speaker_id = {doc.speaker_id}", f"# source = {doc.source_file}"]
    for tok in doc.tokens:
        lines.append("\t".join([str(tok.index + 1), tok.orth, tok.lemma, tok.upos, "_",
                                str(tok.morph), "_", "_", "_", "_"]))
    return "\n".join(lines) + "\n"


def serialize_corpus(docs: Iterable[Document]) -> str:
    return "\n".join(serialize_document(d) for d in docs)


def _enum_value(enum_cls, raw: str, column: str, lineno: int):
    try:
        return enum_cls(raw.strip())
    except ValueError:
        allowed = ", ".join(m.value for m in enum_cls)
        raise CorpusError(f"line {lineno}: {column} {raw!r} not in allowed values {{{allowed}}}") from None


def load_metadata(source: str | TextIO) -> list[SpeakerMetadata]:
    """Read the speaker metadata CSV (header required)."""
    reader = csv.DictReader(_open_text(source))
    missing = [c for c in METADATA_COLUMNS if c not in (reader.fieldnames or [])]
    if missing:
        raise CorpusError(f"metadata header missing columns: {', '.join(missing)}")
    records = []
    seen = set()
    for lineno, row in enumerate(reader, start=2):
        sid = (row["speaker_id"] or "").strip()
        if sid in seen:
            raise CorpusError(f"line {lineno}: duplicate speaker_id {sid!r}")
        seen.add(sid)
        age_raw = (row["age"] or "").strip()
        if age_raw in ("", "NA"):
            age = None
        else:
            try:
                age = int(age_raw)
            except ValueError:
                raise CorpusError(f"line {lineno}: age {age_raw!r} is not numeric") from None
        try:
            records.append(SpeakerMetadata(
                sid,
                _enum_value(Displacement, row["displacement"] or "", "displacement", lineno),
                _enum_value(Gender, row["gender"] or "", "gender", lineno),
                age,
                _enum_value(TimeInProgram, row["time_in_program"] or "", "time_in_program", lineno),
            ))
        except CorpusError as exc:
            if str(exc).startswith("line "):
                raise
            raise CorpusError(f"line {lineno}: {exc}") from None
    return records


def dump_metadata(records: Iterable[SpeakerMetadata], sink: TextIO) -> None:
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(METADATA_COLUMNS)
    for r in records:
        writer.writerow([r.speaker_id, r.displacement.value, r.gender.value,
                         "" if r.age is None else r.age, r.time_in_program.value])
