"""The four second-person variables and their closed variant sets."""

from __future__ import annotations

import enum


class Variable(str, enum.Enum):
    DET_POSS = "DetPoss"
    PRO2P = "Pro2P"
    CLIT2P = "Clit2P"
    POSS2P = "Poss2P"

    @classmethod
    def parse(cls, name: str) -> "Variable":
        key = name.strip().lower().replace("-", "").replace("_", "")
        for v in cls:
            if v.value.lower() == key:
                return v
        raise ValueError(f"unknown variable {name!r}; expected one of {[v.value for v in cls]}")

    @property
    def label(self) -> str:
        """Name used in reports ("det-poss", "pro2P", ...)."""
        return _LABELS[self]


_LABELS = {
    Variable.DET_POSS: "det-poss",
    Variable.PRO2P: "pro2P",
    Variable.CLIT2P: "clit2P",
    Variable.POSS2P: "poss2P",
}

VARIABLES = tuple(Variable)

ABSENT = "Ø"
ARTICLE = "ART"

DEFAULT_VARIANTS: dict[Variable, tuple[str, ...]] = {
    Variable.DET_POSS: (ABSENT, ARTICLE),
    Variable.PRO2P: ("você", "cê", "tu"),
    Variable.CLIT2P: ("te", "lhe"),
    Variable.POSS2P: ("seu", "teu"),
}

DEFAULT_APPLICATION: dict[Variable, str] = {
    Variable.DET_POSS: ABSENT,
    Variable.PRO2P: "você",
    Variable.CLIT2P: "te",
    Variable.POSS2P: "seu",
}
