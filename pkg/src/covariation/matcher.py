"""Declarative token-sequence patterns over POS/morph annotations.

A :class:`Pattern` is a fixed-length list of :class:`TokenConstraint` slots.
Every slot must match the token at the same offset; there are no
quantifiers, so a pattern of length k matches exactly k consecutive tokens.

Rule files are JSON. Each constraint may use the field names of
:class:`TokenConstraint` or the spaCy Matcher notation used in the
published rule table (``ORTH``/``LEMMA`` with ``IN``/``NOT_IN``, ``POS``,
``MORPH`` with ``IS_SUPERSET``, ``IS_PUNCT``; ``{}`` is a wildcard)::

    {"rules": [
      {"id": "pro2P/1", "variable": "Pro2P", "priority": 0, "pivot": 0,
       "constraints": [{"orth_in": ["você", "cê", "tu"]},
                       {"pos_equals": "VERB", "morph_superset": ["VerbForm=Fin"]}]}
    ]}

``priority`` (lower wins, default 0) and ``pivot`` (slot index of the
variant-determining token, inferred from the variable when omitted) are
optional.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, TextIO

from .corpus import Document, Token
from .inventory import Variable


class RuleError(ValueError):
    """Raised when a rule definition violates the constraint schema."""


def _lowered(values) -> frozenset[str] | None:
    if values is None:
        return None
    if isinstance(values, str):
        raise RuleError(f"expected a list of strings, got the string {values!r}")
    return frozenset(str(v).lower() for v in values)


@dataclass(frozen=True)
class TokenConstraint:
    orth_in: frozenset[str] | None = None
    lemma_in: frozenset[str] | None = None
    lemma_not_in: frozenset[str] | None = None
    pos_equals: str | None = None
    morph_superset: frozenset[str] | None = None
    is_punct: bool | None = None
    wildcard: bool = False

    def __post_init__(self):
        for name in ("orth_in", "lemma_in", "lemma_not_in"):
            object.__setattr__(self, name, _lowered(getattr(self, name)))
        if self.morph_superset is not None:
            object.__setattr__(self, "morph_superset", frozenset(self.morph_superset))
        predicates = [self.orth_in, self.lemma_in, self.lemma_not_in, self.pos_equals,
                      self.morph_superset, self.is_punct]
        present = [p for p in predicates if p is not None]
        if self.wildcard and present:
            raise RuleError("a wildcard slot cannot carry other predicates")
        if not self.wildcard and not present:
            raise RuleError("a non-wildcard slot needs at least one predicate")
        for name in ("orth_in", "lemma_in"):
            if getattr(self, name) is not None and not getattr(self, name):
                raise RuleError(f"{name} must not be empty")

    def to_dict(self) -> dict:
        if self.wildcard:
            return {"wildcard": True}
        out: dict = {}
        for name in ("orth_in", "lemma_in", "lemma_not_in"):
            value = getattr(self, name)
            if value is not None:
                out[name] = sorted(value)
        if self.pos_equals is not None:
            out["pos_equals"] = self.pos_equals
        if self.morph_superset is not None:
            out["morph_superset"] = sorted(self.morph_superset)
        if self.is_punct is not None:
            out["is_punct"] = self.is_punct
        return out


WILDCARD = TokenConstraint(wildcard=True)


def match_token(c: TokenConstraint, t: Token) -> bool:
    """True iff every predicate present in ``c`` holds for ``t``."""
    if c.wildcard:
        return True
    if c.orth_in is not None and t.lower not in c.orth_in:
        return False
    if c.lemma_in is not None and t.lemma_lower not in c.lemma_in:
        return False
    if c.lemma_not_in is not None and t.lemma_lower in c.lemma_not_in:
        return False
    if c.pos_equals is not None and t.upos != c.pos_equals:
        return False
    if c.morph_superset is not None and not t.morph.issuperset(c.morph_superset):
        return False
    if c.is_punct is not None and t.is_punct != c.is_punct:
        return False
    return True


def _infer_pivot(variable: Variable, constraints: tuple[TokenConstraint, ...]) -> int:
    for i, c in enumerate(constraints):
        if variable in (Variable.PRO2P, Variable.CLIT2P) and c.orth_in is not None:
            return i
        if variable is Variable.POSS2P and c.lemma_in is not None:
            return i
        if (variable is Variable.DET_POSS and c.pos_equals == "DET"
                and c.morph_superset and "PronType=Prs" in c.morph_superset):
            return i
    raise RuleError(f"cannot infer the pivot slot for a {variable.value} rule; give 'pivot' explicitly")


@dataclass(frozen=True)
class Pattern:
    id: str
    variable: Variable
    constraints: tuple[TokenConstraint, ...]
    pivot: int = -1
    priority: int = 0

    def __post_init__(self):
        object.__setattr__(self, "constraints", tuple(self.constraints))
        if not self.constraints:
            raise RuleError(f"rule {self.id}: no constraints")
        if self.pivot < 0:
            object.__setattr__(self, "pivot", _infer_pivot(self.variable, self.constraints))
        if not 0 <= self.pivot < len(self.constraints):
            raise RuleError(f"rule {self.id}: pivot {self.pivot} outside the pattern")
        if self.constraints[self.pivot].wildcard:
            raise RuleError(f"rule {self.id}: pivot slot cannot be a wildcard")

    def __len__(self) -> int:
        return len(self.constraints)

    def to_dict(self) -> dict:
        return {"id": self.id, "variable": self.variable.value, "priority": self.priority,
                "pivot": self.pivot, "constraints": [c.to_dict() for c in self.constraints]}


@dataclass(frozen=True)
class Match:
    speaker_id: str
    source_file: str
    start: int
    end: int
    pattern_id: str
    matched_orths: tuple[str, ...]
    variable: Variable
    pivot: int  # document token index of the variant-determining token


def find_matches(p: Pattern, d: Document) -> list[Match]:
    """All windows of ``d`` matched by ``p``, ordered by start."""
    k = len(p.constraints)
    first, rest = p.constraints[0], p.constraints[1:]
    toks = d.tokens
    out = []
    for i in range(len(toks) - k + 1):
        if not match_token(first, toks[i]):
            continue
        if all(match_token(c, toks[i + j]) for j, c in enumerate(rest, start=1)):
            out.append(Match(d.speaker_id, d.source_file, i, i + k - 1, p.id,
                             tuple(t.orth for t in toks[i:i + k]), p.variable, i + p.pivot))
    return out


def find_all_matches(patterns: Iterable[Pattern], d: Document) -> list[Match]:
    matches = [m for p in patterns for m in find_matches(p, d)]
    matches.sort(key=lambda m: (m.start, m.pattern_id))
    return matches


_FINITE_VERB = TokenConstraint(pos_equals="VERB", morph_superset=frozenset({"VerbForm=Fin"}))
_VERB = TokenConstraint(pos_equals="VERB")
_NOUN = TokenConstraint(pos_equals="NOUN")
_PRO2P = TokenConstraint(orth_in=frozenset({"você", "cê", "tu"}))
_POSS2P = TokenConstraint(lemma_in=frozenset({"seu", "teu"}))


def _clitic(forms: Iterable[str]) -> TokenConstraint:
    return TokenConstraint(orth_in=frozenset(forms))


def builtin_rules(clitics: Iterable[str] = ("te", "lhe")) -> list[Pattern]:
    """The eight search rules for the four variables.

    ``clitics`` sets the clitic forms searched by the clit2P rules.
    """
    clit = _clitic(clitics)
    return [
        Pattern("det-poss/1", Variable.DET_POSS, (
            TokenConstraint(lemma_not_in=frozenset({"meu", "teu", "seu", "nosso"})),
            TokenConstraint(pos_equals="DET", morph_superset=frozenset({"PronType=Prs"})),
            _NOUN,
        ), pivot=1),
        Pattern("pro2P/1", Variable.PRO2P, (_PRO2P, _FINITE_VERB), pivot=0, priority=0),
        Pattern("pro2P/2", Variable.PRO2P, (_PRO2P, WILDCARD, _FINITE_VERB), pivot=0, priority=1),
        Pattern("clit2P/1", Variable.CLIT2P, (clit, _VERB), pivot=0, priority=1),
        Pattern("clit2P/2", Variable.CLIT2P, (_VERB, clit), pivot=1, priority=2),
        Pattern("clit2P/3", Variable.CLIT2P, (_VERB, TokenConstraint(is_punct=True), clit),
                pivot=2, priority=0),
        Pattern("poss2P/1", Variable.POSS2P, (_POSS2P, _NOUN), pivot=0, priority=0),
        Pattern("poss2P/2", Variable.POSS2P, (_NOUN, _POSS2P), pivot=1, priority=1),
    ]


_SPACY_ATTRS = {"ORTH": "orth", "LEMMA": "lemma"}


def _constraint_from_dict(raw: dict, where: str) -> TokenConstraint:
    if not isinstance(raw, dict):
        raise RuleError(f"{where}: constraint must be an object")
    if not raw:
        return WILDCARD
    kwargs: dict = {}
    for key, value in raw.items():
        if key in _SPACY_ATTRS:
            attr = _SPACY_ATTRS[key]
            if isinstance(value, str):
                kwargs[f"{attr}_in"] = [value]
            elif isinstance(value, dict) and set(value) <= {"IN", "NOT_IN"}:
                if "IN" in value:
                    kwargs[f"{attr}_in"] = value["IN"]
                if "NOT_IN" in value:
                    if attr != "lemma":
                        raise RuleError(f"{where}: NOT_IN is only supported for LEMMA")
                    kwargs["lemma_not_in"] = value["NOT_IN"]
            else:
                raise RuleError(f"{where}: field {key}: expected a string or an IN/NOT_IN object")
        elif key == "POS":
            kwargs["pos_equals"] = value
        elif key == "MORPH":
            if not isinstance(value, dict) or set(value) != {"IS_SUPERSET"}:
                raise RuleError(f"{where}: field MORPH: only IS_SUPERSET is supported")
            kwargs["morph_superset"] = value["IS_SUPERSET"]
        elif key == "IS_PUNCT":
            kwargs["is_punct"] = value
        elif key in TokenConstraint.__dataclass_fields__:
            kwargs[key] = value
        else:
            raise RuleError(f"{where}: unknown field {key!r}")
    if "is_punct" in kwargs and not isinstance(kwargs["is_punct"], bool):
        raise RuleError(f"{where}: field is_punct must be a boolean")
    if "wildcard" in kwargs and not isinstance(kwargs["wildcard"], bool):
        raise RuleError(f"{where}: field wildcard must be a boolean")
    if "pos_equals" in kwargs and not isinstance(kwargs["pos_equals"], str):
        raise RuleError(f"{where}: field pos_equals must be a string")
    try:
        return TokenConstraint(**kwargs)
    except RuleError as exc:
        raise RuleError(f"{where}: {exc}") from None


def rules_from_data(data) -> list[Pattern]:
    rules = data.get("rules") if isinstance(data, dict) else data
    if not isinstance(rules, list):
        raise RuleError("rule file must hold a list of rules (or an object with a 'rules' list)")
    patterns = []
    seen = set()
    for n, raw in enumerate(rules):
        rid = raw.get("id") if isinstance(raw, dict) else None
        if not rid:
            raise RuleError(f"rule #{n}: missing field 'id'")
        if rid in seen:
            raise RuleError(f"rule {rid}: duplicate id")
        seen.add(rid)
        try:
            variable = Variable.parse(raw.get("variable", ""))
        except ValueError as exc:
            raise RuleError(f"rule {rid}: field variable: {exc}") from None
        raw_constraints = raw.get("constraints")
        if not isinstance(raw_constraints, list) or not raw_constraints:
            raise RuleError(f"rule {rid}: field constraints must be a non-empty list")
        constraints = tuple(_constraint_from_dict(c, f"rule {rid}, field constraints[{i}]")
                            for i, c in enumerate(raw_constraints))
        try:
            patterns.append(Pattern(rid, variable, constraints,
                                    pivot=int(raw.get("pivot", -1)),
                                    priority=int(raw.get("priority", 0))))
        except RuleError as exc:
            raise RuleError(f"rule {rid}: {exc}") from None
    return patterns


def load_rules(source: str | TextIO) -> list[Pattern]:
    """Load patterns from a JSON rule file path or open stream."""
    if isinstance(source, str):
        with open(source, encoding="utf-8") as fh:
            data = json.load(fh)
    else:
        data = json.load(source)
    return rules_from_data(data)


def dump_rules(patterns: Iterable[Pattern], sink: TextIO) -> None:
    json.dump({"rules": [p.to_dict() for p in patterns]}, sink, ensure_ascii=False, indent=2)
    sink.write("\n")
