import pytest

from covariation.corpus import Document, MorphFeatures, Token
from covariation.matcher import builtin_rules
from covariation.synth import table2_document


def make_doc(spec, speaker="S1", source="s1.txt"):
    """Build a document from (orth, lemma, upos, feats) tuples."""
    return Document(speaker, source, tuple(
        Token(i, orth, lemma, upos, MorphFeatures.parse(feats))
        for i, (orth, lemma, upos, feats) in enumerate(spec)))


@pytest.fixture
def rules():
    return builtin_rules()


@pytest.fixture
def table2():
    return table2_document()


# "você disse que te comprometeu com o teu projeto ."
SENTENCE = [
    ("você", "você", "PRON", "Number=Sing|Person=3|PronType=Prs"),
    ("disse", "dizer", "VERB", "Mood=Ind|Tense=Past|VerbForm=Fin"),
    ("que", "que", "SCONJ", "_"),
    ("te", "tu", "PRON", "Case=Acc|Person=2|PronType=Prs"),
    ("comprometeu", "comprometer", "VERB", "Mood=Ind|Tense=Past|VerbForm=Fin"),
    ("com", "com", "ADP", "_"),
    ("o", "o", "DET", "Definite=Def|PronType=Art"),
    ("teu", "teu", "DET", "Poss=Yes|PronType=Prs"),
    ("projeto", "projeto", "NOUN", "Gender=Masc|Number=Sing"),
    (".", ".", "PUNCT", "_"),
]


@pytest.fixture
def sentence_doc():
    return make_doc(SENTENCE)
