"""Per-speaker application rates, smoothed log-odds and rate categories."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, TextIO

from .corpus import SpeakerMetadata
from .inventory import DEFAULT_APPLICATION, DEFAULT_VARIANTS, Variable
from .variables import Observation

LOW, MEDIUM, HIGH = "Low", "Medium", "High"


def application_map(overrides: Mapping[Variable, str] | None = None) -> dict[Variable, str]:
    app = dict(DEFAULT_APPLICATION)
    for var, variant in (overrides or {}).items():
        if variant not in DEFAULT_VARIANTS[var]:
            raise ValueError(f"{variant!r} is not a {var.value} variant")
        app[var] = variant
    return app


def empirical_log_odds(app_count: int, total_count: int) -> float:
    """ln((a + 0.5) / (n - a + 0.5)); 0 when there is no data."""
    if total_count < 0 or not 0 <= app_count <= total_count:
        raise ValueError(f"invalid counts {app_count}/{total_count}")
    if total_count == 0:
        return 0.0
    return math.log((app_count + 0.5) / (total_count - app_count + 0.5))


def categorize_ternary(rate: float) -> str:
    if rate < 0.40:
        return LOW
    if rate <= 0.60:
        return MEDIUM
    return HIGH


def categorize_binary(rate: float) -> str:
    return HIGH if rate >= 0.5 else LOW


@dataclass(frozen=True)
class VariableStats:
    app_count: int = 0
    total_count: int = 0

    def __post_init__(self):
        if not 0 <= self.app_count <= self.total_count:
            raise ValueError(f"invalid counts {self.app_count}/{self.total_count}")

    @property
    def has_data(self) -> bool:
        return self.total_count > 0

    @property
    def rate(self) -> float:
        return self.app_count / self.total_count if self.total_count else 0.0

    @property
    def log_odds(self) -> float:
        return empirical_log_odds(self.app_count, self.total_count)


@dataclass(frozen=True)
class SpeakerProfile:
    speaker_id: str
    stats: Mapping[Variable, VariableStats] = field(default_factory=dict)

    def __getitem__(self, var: Variable) -> VariableStats:
        return self.stats.get(var, VariableStats())

    def value(self, var: Variable, measure: str = "rate") -> float:
        s = self[var]
        if measure == "rate":
            return s.rate
        if measure == "log_odds":
            return s.log_odds
        raise ValueError(f"unknown measure {measure!r}")

    @property
    def has_all_data(self) -> bool:
        return all(self[v].has_data for v in Variable)


def compute_profiles(observations: Iterable[Observation],
                     app_map: Mapping[Variable, str] | None = None,
                     metadata: Iterable[SpeakerMetadata] = ()) -> list[SpeakerProfile]:
    """One profile per speaker seen in ``observations`` or ``metadata``, sorted by id."""
    app = application_map(app_map)
    counts: dict[str, dict[Variable, list[int]]] = {}
    for m in metadata:
        counts.setdefault(m.speaker_id, {})
    for o in observations:
        cell = counts.setdefault(o.speaker_id, {}).setdefault(o.variable, [0, 0])
        cell[1] += 1
        if o.variant == app[o.variable]:
            cell[0] += 1
    return [SpeakerProfile(sid, {v: VariableStats(*c) for v, c in by_var.items()})
            for sid, by_var in sorted(counts.items())]


def pooled_rates(counts: Mapping[Variable, Mapping[str, int]]) -> dict[Variable, dict[str, float]]:
    """Corpus-level share of each variant within its variable, as a fraction."""
    out = {}
    for var, by_variant in counts.items():
        total = sum(by_variant.values())
        out[var] = {name: (n / total if total else 0.0) for name, n in by_variant.items()}
    return out


def profile_columns() -> list[str]:
    cols = ["speaker_id"]
    for v in Variable:
        for suffix in ("app_count", "total_count", "rate", "log_odds", "ternary", "binary"):
            cols.append(f"{v.value}_{suffix}")
    return cols


def export_profiles(profiles: Iterable[SpeakerProfile], sink: TextIO) -> None:
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(profile_columns())
    for p in profiles:
        row: list = [p.speaker_id]
        for v in Variable:
            s = p[v]
            row += [s.app_count, s.total_count, repr(s.rate), repr(s.log_odds),
                    categorize_ternary(s.rate), categorize_binary(s.rate)]
        writer.writerow(row)


def read_profiles(source: TextIO) -> list[SpeakerProfile]:
    """Read a profile table written by :func:`export_profiles`.

    Only the ``*_app_count``/``*_total_count`` columns are used; rates and
    log-odds are recomputed from them.
    """
    reader = csv.DictReader(source)
    missing = [c for v in Variable for c in (f"{v.value}_app_count", f"{v.value}_total_count")
               if c not in (reader.fieldnames or [])]
    if "speaker_id" not in (reader.fieldnames or []) or missing:
        raise ValueError(f"profile table is missing columns: {', '.join(['speaker_id'] + missing)}")
    profiles = []
    for row in reader:
        stats = {v: VariableStats(int(row[f"{v.value}_app_count"]), int(row[f"{v.value}_total_count"]))
                 for v in Variable}
        profiles.append(SpeakerProfile(row["speaker_id"], stats))
    return profiles
