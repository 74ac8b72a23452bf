"""Synthetic annotated corpora built from the 24 pronoun/clitic/determiner/possessive templates.

Each sentence has the shape::

    <pro2P> disse que <clit2P> comprometeu com [o] <poss2P> projeto .

and carries Universal Dependencies annotations, so the extraction rules
can be checked for exact recall. Randomness comes from SplitMix64, one
stream per speaker seeded with ``seed ^ ordinal``.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field
from typing import Iterable, Sequence, TextIO

from .clustering import build_feature_matrix, cluster_composition, euclidean_distances, optimal_k
from .corpus import (Displacement, Document, Gender, MorphFeatures, SpeakerMetadata,
                     TimeInProgram, Token)
from .inventory import ABSENT, ARTICLE, Variable
from .matcher import builtin_rules
from .profiles import compute_profiles
from .variables import extract_all

RNG_ALGORITHM = "splitmix64"
_MASK = (1 << 64) - 1


class SynthError(ValueError):
    pass


class SplitMix64:
    """Steele, Lea & Flood's SplitMix64; 64-bit state, one output per step."""

    def __init__(self, seed: int):
        self.state = seed & _MASK

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def random(self) -> float:
        """Uniform double in [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def randint(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi]."""
        span = hi - lo + 1
        return lo + int(self.random() * span)


def _morph(text: str) -> MorphFeatures:
    return MorphFeatures.parse(text)


# orth -> (lemma, upos, feats)
_LEXICON = {
    "você": ("você", "PRON", "Number=Sing|Person=3|PronType=Prs"),
    "cê": ("você", "PRON", "Number=Sing|Person=3|PronType=Prs"),
    "tu": ("tu", "PRON", "Number=Sing|Person=2|PronType=Prs"),
    "disse": ("dizer", "VERB", "Mood=Ind|Number=Sing|Person=3|Tense=Past|VerbForm=Fin"),
    "que": ("que", "SCONJ", "_"),
    "te": ("tu", "PRON", "Case=Acc|Number=Sing|Person=2|PronType=Prs"),
    "lhe": ("ele", "PRON", "Case=Dat|Number=Sing|Person=3|PronType=Prs"),
    "se": ("se", "PRON", "Case=Acc|Person=3|PronType=Prs|Reflex=Yes"),
    "comprometeu": ("comprometer", "VERB", "Mood=Ind|Number=Sing|Person=3|Tense=Past|VerbForm=Fin"),
    "com": ("com", "ADP", "_"),
    "o": ("o", "DET", "Definite=Def|Gender=Masc|Number=Sing|PronType=Art"),
    "teu": ("teu", "DET", "Gender=Masc|Number=Sing|Person=2|Poss=Yes|PronType=Prs"),
    "seu": ("seu", "DET", "Gender=Masc|Number=Sing|Person=3|Poss=Yes|PronType=Prs"),
    "projeto": ("projeto", "NOUN", "Gender=Masc|Number=Sing"),
    ".": (".", "PUNCT", "_"),
    # distractor vocabulary: no second-person forms, no possessives
    "ele": ("ele", "PRON", "Case=Nom|Gender=Masc|Number=Sing|Person=3|PronType=Prs"),
    "ela": ("ela", "PRON", "Case=Nom|Gender=Fem|Number=Sing|Person=3|PronType=Prs"),
    "comprou": ("comprar", "VERB", "Mood=Ind|Number=Sing|Person=3|Tense=Past|VerbForm=Fin"),
    "livro": ("livro", "NOUN", "Gender=Masc|Number=Sing"),
    "a": ("o", "DET", "Definite=Def|Gender=Fem|Number=Sing|PronType=Art"),
    "gente": ("gente", "NOUN", "Gender=Fem|Number=Sing"),
    "foi": ("ir", "VERB", "Mood=Ind|Number=Sing|Person=3|Tense=Past|VerbForm=Fin"),
    "para": ("para", "ADP", "_"),
    "praia": ("praia", "NOUN", "Gender=Fem|Number=Sing"),
    "chegou": ("chegar", "VERB", "Mood=Ind|Number=Sing|Person=3|Tense=Past|VerbForm=Fin"),
    "cedo": ("cedo", "ADV", "_"),
}

DISTRACTORS = (
    ("Ele", "comprou", "o", "livro", "."),
    ("A", "gente", "foi", "para", "a", "praia", "."),
    ("Ela", "chegou", "cedo", "."),
)


def _annotate(words: Sequence[str], start: int) -> list[Token]:
    toks = []
    for i, w in enumerate(words):
        lemma, upos, feats = _LEXICON[w.lower()]
        toks.append(Token(start + i, w, lemma, upos, _morph(feats)))
    return toks


@dataclass(frozen=True)
class Slots:
    pronoun: str  # você / cê / tu
    clitic: str  # te / lhe
    article: bool
    possessive: str  # seu / teu

    def words(self) -> list[str]:
        det = ["o"] if self.article else []
        return ([self.pronoun.capitalize(), "disse", "que", self.clitic, "comprometeu", "com"]
                + det + [self.possessive, "projeto", "."])

    def variants(self) -> dict[Variable, str]:
        return {Variable.DET_POSS: ARTICLE if self.article else ABSENT, Variable.PRO2P: self.pronoun,
                Variable.CLIT2P: self.clitic, Variable.POSS2P: self.possessive}


def table2_slots(clitic_alt: str = "lhe") -> list[Slots]:
    """The 24 combinations in the published order.

    The second clitic is rendered as ``clitic_alt``; the published table uses
    "se", which the search rules do not cover, so the default is "lhe".
    """
    return [Slots(p, c, art, poss) for p, c, art, poss in
            itertools.product(("você", "cê", "tu"), ("te", clitic_alt), (True, False), ("teu", "seu"))]


def table2_document(speaker_id: str = "T001", source_file: str = "table2.txt",
                    clitic_alt: str = "lhe") -> Document:
    tokens: list[Token] = []
    for s in table2_slots(clitic_alt):
        tokens += _annotate(s.words(), len(tokens))
    return Document(speaker_id, source_file, tuple(tokens))


@dataclass(frozen=True)
class DialectProfile:
    name: str
    p_absent: float  # P(no determiner before possessive)
    p_voce: float
    p_te: float
    p_seu: float
    split_ce: float = 1.0  # share of non-você subjects realized as cê; the rest are tu
    split_tu: float = 0.0
    sentences_min: int = 200
    sentences_max: int = 300

    def __post_init__(self):
        for name in ("p_absent", "p_voce", "p_te", "p_seu", "split_ce", "split_tu"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise SynthError(f"profile {self.name}: {name}={v} outside [0, 1]")
        if abs(self.split_ce + self.split_tu - 1.0) > 1e-9:
            raise SynthError(f"profile {self.name}: cê/tu split must sum to 1")
        if not 1 <= self.sentences_min <= self.sentences_max:
            raise SynthError(f"profile {self.name}: invalid sentence range")

    def probabilities(self) -> dict[Variable, float]:
        return {Variable.DET_POSS: self.p_absent, Variable.PRO2P: self.p_voce,
                Variable.CLIT2P: self.p_te, Variable.POSS2P: self.p_seu}


@dataclass
class SyntheticCorpus:
    documents: list[Document]
    metadata: list[SpeakerMetadata]
    labels: dict[str, str]  # speaker_id -> profile name
    tallies: dict[str, dict[Variable, tuple[int, int]]] = field(default_factory=dict)
    rng: str = RNG_ALGORITHM


def _sample_slots(rng: SplitMix64, prof: DialectProfile, clitic_alt: str) -> Slots:
    article = not rng.random() < prof.p_absent
    if rng.random() < prof.p_voce:
        pronoun = "você"
    else:
        pronoun = "cê" if rng.random() < prof.split_ce else "tu"
    clitic = "te" if rng.random() < prof.p_te else clitic_alt
    possessive = "seu" if rng.random() < prof.p_seu else "teu"
    return Slots(pronoun, clitic, article, possessive)


def generate_corpus(profiles: Sequence[DialectProfile], speakers_per_profile: int, seed: int,
                    noise: float = 0.0, clitic_alt: str = "lhe") -> SyntheticCorpus:
    """Sample one document per speaker; deterministic given ``seed``.

    ``noise`` is the probability of inserting a distractor sentence (no
    second-person forms, no possessives) after each template sentence.
    """
    if not profiles:
        raise SynthError("need at least one profile")
    if len(profiles) > len(Displacement):
        raise SynthError(f"at most {len(Displacement)} profiles (one per displacement category)")
    if speakers_per_profile < 1:
        raise SynthError("speakers_per_profile must be positive")
    if not 0.0 <= noise <= 1.0:
        raise SynthError("noise must be in [0, 1]")
    docs, meta, labels, tallies = [], [], {}, {}
    displacements = list(Displacement)
    genders = (Gender.F, Gender.M)
    times = (TimeInProgram.EARLY, TimeInProgram.LATE)
    ordinal = 0
    for pi, prof in enumerate(profiles):
        for _ in range(speakers_per_profile):
            ordinal += 1
            sid = f"S{ordinal:03d}"
            rng = SplitMix64(seed ^ ordinal)
            tally = {v: [0, 0] for v in Variable}
            tokens: list[Token] = []
            n_sent = rng.randint(prof.sentences_min, prof.sentences_max)
            for _ in range(n_sent):
                slots = _sample_slots(rng, prof, clitic_alt)
                tokens += _annotate(slots.words(), len(tokens))
                for var, variant in slots.variants().items():
                    tally[var][1] += 1
                    tally[var][0] += variant in (ABSENT, "você", "te", "seu")
                if noise and rng.random() < noise:
                    words = DISTRACTORS[rng.randint(0, len(DISTRACTORS) - 1)]
                    tokens += _annotate(words, len(tokens))
            docs.append(Document(sid, f"{sid}.txt", tuple(tokens)))
            meta.append(SpeakerMetadata(sid, displacements[pi], genders[rng.randint(0, 1)],
                                        rng.randint(18, 30), times[rng.randint(0, 1)]))
            labels[sid] = prof.name
            tallies[sid] = {v: (a, n) for v, (a, n) in tally.items()}
    return SyntheticCorpus(docs, meta, labels, tallies)


def write_labels(corpus: SyntheticCorpus, sink: TextIO) -> None:
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(["speaker_id", "profile", "displacement"])
    for m in corpus.metadata:
        writer.writerow([m.speaker_id, corpus.labels[m.speaker_id], m.displacement.value])


@dataclass
class RecoveryReport:
    optimal_k: int
    curve: dict[int, float]
    purity: dict[str, float]
    sizes: list[int]
    has_structure: bool
    exact_recall: bool
    rng: str = RNG_ALGORITHM
    threshold: float = 0.75

    @property
    def criterion_met(self) -> bool:
        return all(p > self.threshold for p in self.purity.values())

    def to_dict(self) -> dict:
        return {
            "rng": self.rng,
            "optimal_k": self.optimal_k,
            "silhouette_curve": {str(k): v for k, v in self.curve.items()},
            "cluster_sizes": self.sizes,
            "purity": self.purity,
            "threshold": self.threshold,
            "criterion_met": self.criterion_met,
            "has_structure": self.has_structure,
            "no_cluster_structure": not self.has_structure,
            "exact_recall": self.exact_recall,
        }


def recovery_experiment(profiles: Sequence[DialectProfile], speakers_per_profile: int, seed: int,
                        k_range: Iterable[int] = range(2, 11), measure: str = "rate",
                        noise: float = 0.0) -> RecoveryReport:
    """Generate, extract, profile, cluster, and score cluster purity per profile."""
    corpus = generate_corpus(profiles, speakers_per_profile, seed, noise=noise)
    observations = extract_all(corpus.documents, builtin_rules(), corpus.metadata)
    speaker_profiles = compute_profiles(observations, metadata=corpus.metadata)
    exact = all(
        (p[v].app_count, p[v].total_count) == corpus.tallies[p.speaker_id][v]
        for p in speaker_profiles for v in Variable)
    fm = build_feature_matrix(speaker_profiles, measure=measure)
    ks = [k for k in k_range if k < fm.n]
    choice = optimal_k(euclidean_distances(fm.values), ks)
    comp = cluster_composition(choice.best, fm.speaker_ids, corpus.labels)
    return RecoveryReport(choice.k, choice.curve, comp.max_share(), choice.best.sizes(),
                          choice.has_structure, exact)
