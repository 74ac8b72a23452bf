"""Classify pattern matches into observations and export them as CSV."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, replace
from typing import Iterable, Mapping, Sequence, TextIO

from .corpus import Document, SpeakerMetadata
from .inventory import ABSENT, ARTICLE, DEFAULT_VARIANTS, Variable
from .matcher import Match, Pattern, find_all_matches

log = logging.getLogger(__name__)

CONTEXT_WIDTH = 8
OBSERVATION_COLUMNS = ("order", "file", "speaker_id", "variable", "variant",
                       "preceding_context", "match", "following_context")


class ClassificationError(ValueError):
    def __init__(self, message: str, match: Match):
        super().__init__(f"{match.source_file}:{match.start}-{match.end} ({match.pattern_id}): {message}")
        self.match = match


@dataclass(frozen=True)
class Observation:
    order: int
    source_file: str
    speaker_id: str
    variable: Variable
    variant: str
    preceding_context: tuple[str, ...]
    following_context: tuple[str, ...]
    full_context: tuple[str, ...]
    pivot_index: int | None = None


def _is_article(token) -> bool:
    return token.upos == "DET" and token.morph.issuperset(("PronType=Art",))


def classify(m: Match, d: Document,
             variants: Mapping[Variable, Sequence[str]] = DEFAULT_VARIANTS) -> Observation:
    """Build the observation for ``m``; ``order`` is left at 0 for the caller to assign."""
    if not 0 <= m.pivot < len(d.tokens):
        raise ClassificationError(f"pivot index {m.pivot} outside document", m)
    pivot = d.tokens[m.pivot]
    if m.variable is Variable.DET_POSS:
        if pivot.upos != "DET":
            raise ClassificationError(f"possessive pivot {pivot.orth!r} is not tagged DET", m)
        prev = d.tokens[m.pivot - 1] if m.pivot > 0 else None
        variant = ARTICLE if prev is not None and _is_article(prev) else ABSENT
    elif m.variable is Variable.POSS2P:
        variant = pivot.lemma_lower
    else:
        variant = pivot.lower
    allowed = variants[m.variable]
    if variant not in allowed:
        raise ClassificationError(
            f"variant {variant!r} not in the {m.variable.value} set {list(allowed)}", m)
    toks = d.tokens
    return Observation(
        order=0,
        source_file=m.source_file,
        speaker_id=m.speaker_id,
        variable=m.variable,
        variant=variant,
        preceding_context=tuple(t.orth for t in toks[max(0, m.start - CONTEXT_WIDTH):m.start]),
        following_context=tuple(t.orth for t in toks[m.end + 1:m.end + 1 + CONTEXT_WIDTH]),
        full_context=m.matched_orths,
        pivot_index=m.pivot,
    )


_VARIABLE_RANK = {v: i for i, v in enumerate(Variable)}


def extract_all(corpus: Iterable[Document], rules: Sequence[Pattern],
                metadata: Iterable[SpeakerMetadata] | None = None,
                variants: Mapping[Variable, Sequence[str]] = DEFAULT_VARIANTS,
                errors: list[ClassificationError] | None = None) -> list[Observation]:
    """Scan every document with every rule.

    At most one observation is kept per (file, variable, pivot token); when
    several rules hit the same pivot the lowest ``priority`` wins, then the
    earliest rule in ``rules``. Classification failures are appended to
    ``errors`` (and logged) instead of aborting the run.
    """
    rank = {p.id: (p.priority, i) for i, p in enumerate(rules)}
    known = None if metadata is None else {m.speaker_id for m in metadata}
    collected: list[Observation] = []
    for doc in corpus:
        if known is not None and doc.speaker_id not in known:
            log.warning("no metadata for speaker %s (%s)", doc.speaker_id, doc.source_file)
        best: dict[tuple[Variable, int], Match] = {}
        for m in find_all_matches(rules, doc):
            key = (m.variable, m.pivot)
            if key not in best or rank[m.pattern_id] < rank[best[key].pattern_id]:
                best[key] = m
        for m in best.values():
            try:
                collected.append(classify(m, doc, variants))
            except ClassificationError as exc:
                log.warning("%s", exc)
                if errors is not None:
                    errors.append(exc)
    collected.sort(key=lambda o: (o.source_file, o.pivot_index, _VARIABLE_RANK[o.variable]))
    out = []
    counters: dict[str, int] = {}
    for obs in collected:
        counters[obs.source_file] = counters.get(obs.source_file, 0) + 1
        out.append(replace(obs, order=counters[obs.source_file]))
    return out


def export_observations(observations: Iterable[Observation], sink: TextIO) -> None:
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(OBSERVATION_COLUMNS)
    for o in observations:
        writer.writerow([o.order, o.source_file, o.speaker_id, o.variable.value, o.variant,
                         " ".join(o.preceding_context), " ".join(o.full_context),
                         " ".join(o.following_context)])


def read_observations(source: TextIO) -> list[Observation]:
    reader = csv.DictReader(source)
    if tuple(reader.fieldnames or ()) != OBSERVATION_COLUMNS:
        raise ValueError(f"observation CSV must have columns {','.join(OBSERVATION_COLUMNS)}")
    split = lambda s: tuple(s.split()) if s else ()
    return [Observation(int(r["order"]), r["file"], r["speaker_id"], Variable.parse(r["variable"]),
                        r["variant"], split(r["preceding_context"]), split(r["following_context"]),
                        split(r["match"]))
            for r in reader]


def variant_counts(observations: Iterable[Observation]) -> dict[Variable, dict[str, int]]:
    counts: dict[Variable, dict[str, int]] = {v: {} for v in Variable}
    for o in observations:
        counts[o.variable][o.variant] = counts[o.variable].get(o.variant, 0) + 1
    return counts


def variant_summary(counts: Mapping[Variable, Mapping[str, int]],
                    variants: Mapping[Variable, Sequence[str]] = DEFAULT_VARIANTS) -> list[dict]:
    """Per-variant frequency rows: variable, variant, n, total, percent."""
    rows = []
    for var in Variable:
        by_variant = counts.get(var, {})
        total = sum(by_variant.values())
        names = list(variants[var]) + sorted(set(by_variant) - set(variants[var]))
        for name in names:
            n = by_variant.get(name, 0)
            rows.append({"variable": var.label, "variant": name, "n": n, "total": total,
                         "percent": round(100.0 * n / total, 1) if total else 0.0})
    return rows
