"""Stage runners shared by the CLI commands and the consolidated report."""

from __future__ import annotations

import glob
import io
import logging
import os
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import clustering, multivariate, stats
from .corpus import CorpusError, Document, SpeakerMetadata, load_metadata, read_corpus
from .inventory import DEFAULT_VARIANTS, Variable
from .matcher import Pattern, builtin_rules, load_rules
from .profiles import SpeakerProfile, compute_profiles, read_profiles
from .variables import ClassificationError, Observation, extract_all, variant_counts, variant_summary

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1


class InputError(ValueError):
    """Bad user input: exit status 2."""


@dataclass
class RunConfig:
    corpus: list[str] = field(default_factory=list)
    metadata: str | None = None
    rules: str | None = None
    profile_table: str | None = None
    measure: str = "rate"
    imputation: str = "zero"
    k_min: int = 2
    k_max: int = 10
    seed: int = 0
    out: str = "out"
    alpha: float = 0.05
    holm: bool = False
    exclude_variables: list[str] = field(default_factory=list)
    # synth only
    speakers: int = 30
    noise: float = 0.0
    dialect_profiles: list[dict] = field(default_factory=list)

    def validate(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise InputError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.measure not in ("rate", "log_odds"):
            raise InputError(f"measure must be rate or log_odds, got {self.measure!r}")
        if self.imputation not in clustering.IMPUTATIONS:
            raise InputError(f"imputation must be zero or exclude, got {self.imputation!r}")
        if not 2 <= self.k_min <= self.k_max:
            raise InputError(f"need 2 <= k-min <= k-max, got {self.k_min}..{self.k_max}")

    @property
    def variables(self) -> tuple[Variable, ...]:
        try:
            excluded = {Variable.parse(v) for v in self.exclude_variables}
        except ValueError as exc:
            raise InputError(str(exc)) from None
        return tuple(v for v in Variable if v not in excluded)


@dataclass
class Inputs:
    documents: list[Document]
    metadata: list[SpeakerMetadata]
    rules: list[Pattern]
    observations: list[Observation]
    profiles: list[SpeakerProfile]
    errors: list[ClassificationError]


def expand_corpus(patterns: Sequence[str]) -> list[str]:
    paths: list[str] = []
    for pat in patterns:
        hits = sorted(glob.glob(pat, recursive=True))
        if not hits:
            raise InputError(f"corpus pattern {pat!r} matched no files")
        paths += [h for h in hits if os.path.isfile(h)]
    return paths


def load_inputs(cfg: RunConfig) -> Inputs:
    try:
        metadata = []
        if cfg.metadata:
            with open(cfg.metadata, encoding="utf-8", newline="") as fh:
                metadata = load_metadata(fh)
        rules = load_rules(cfg.rules) if cfg.rules else builtin_rules()
        if cfg.profile_table:
            with open(cfg.profile_table, encoding="utf-8", newline="") as fh:
                profiles = read_profiles(fh)
            return Inputs([], metadata, rules, [], profiles, [])
        if not cfg.corpus:
            raise InputError("no input: give --corpus or --profile-table")
        documents = read_corpus(expand_corpus(cfg.corpus))
    except OSError as exc:
        raise InputError(str(exc)) from None
    except (CorpusError, ValueError) as exc:
        if isinstance(exc, InputError):
            raise
        raise InputError(str(exc)) from None
    errors: list[ClassificationError] = []
    observations = extract_all(documents, rules, metadata if cfg.metadata else None,
                               errors=errors)
    profiles = compute_profiles(observations, metadata=metadata)
    return Inputs(documents, metadata, rules, observations, profiles, errors)


def extract_section(inp: Inputs) -> dict:
    counts = variant_counts(inp.observations)
    application = {}
    for v in Variable:
        app = sum(p[v].app_count for p in inp.profiles)
        total = sum(p[v].total_count for p in inp.profiles)
        application[v.label] = {"app_count": app, "total_count": total,
                                "percent": round(100.0 * app / total, 1) if total else 0.0}
    return {
        "documents": len(inp.documents),
        "tokens": sum(len(d) for d in inp.documents),
        "speakers": len(inp.profiles),
        "observations": len(inp.observations),
        "classification_errors": [str(e) for e in inp.errors],
        "summary": variant_summary(counts, DEFAULT_VARIANTS),
        "application": application,
    }


def correlate_section(inp: Inputs, cfg: RunConfig) -> tuple[dict, stats.CorrelationMatrix]:
    profiles = inp.profiles
    if cfg.imputation == "exclude":
        profiles = [p for p in profiles if p.has_all_data]
    try:
        cm = stats.correlation_matrix(profiles, cfg.measure, holm=cfg.holm)
    except stats.StatsError as exc:
        raise InputError(str(exc)) from None
    out = cm.to_dict(cfg.alpha)
    out["alpha"] = cfg.alpha
    out["holm"] = cfg.holm
    return out, cm


@dataclass
class ClusterOutcome:
    section: dict
    matrix: clustering.FeatureMatrix
    choice: clustering.OptimalK


def cluster_section(inp: Inputs, cfg: RunConfig) -> ClusterOutcome:
    try:
        fm = clustering.build_feature_matrix(inp.profiles, cfg.measure, cfg.imputation, cfg.variables)
    except clustering.ClusteringError as exc:
        raise InputError(str(exc)) from None
    k_max = min(cfg.k_max, fm.n - 1)
    if k_max < cfg.k_min:
        raise InputError(f"too few speakers ({fm.n}) for k >= {cfg.k_min}")
    dist = clustering.euclidean_distances(fm.values)
    choice = clustering.optimal_k(dist, range(cfg.k_min, k_max + 1))
    best = choice.best
    categories = {m.speaker_id: m.displacement.value for m in inp.metadata}
    comp = clustering.cluster_composition(best, fm.speaker_ids, categories)
    means = clustering.cluster_means(best, fm.raw)
    section = {
        "measure": cfg.measure,
        "imputation": cfg.imputation,
        "n": fm.n,
        "variables": [v.label for v in fm.variables],
        "k_curve": {str(k): v for k, v in choice.curve.items()},
        "optimal_k": choice.k,
        "has_structure": choice.has_structure,
        "medoids": [fm.speaker_ids[i] for i in best.medoids],
        "total_deviation": best.total_deviation,
        "avg_silhouette": best.avg_silhouette,
        "sizes": best.sizes(),
        "assignments": {sid: int(c) + 1 for sid, c in zip(fm.speaker_ids, best.labels)},
        "composition": comp.to_dict(),
        "cluster_means": {str(c + 1): {v.label: float(means[c, j]) for j, v in enumerate(fm.variables)}
                          for c in range(best.k)},
    }
    return ClusterOutcome(section, fm, choice)


def pca_section(outcome: ClusterOutcome) -> tuple[dict, list]:
    try:
        res = multivariate.pca(outcome.matrix)
    except multivariate.PcaError as exc:
        raise InputError(str(exc)) from None
    rows = multivariate.project_2d(res, outcome.choice.best.labels)
    section = res.to_dict()
    section["variables"] = [v.label for v in outcome.matrix.variables]
    section["dim1_dim2_percent"] = float(100.0 * res.variance_proportion[:2].sum())
    return section, rows


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    return obj


REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["schema_version", "extract", "correlate", "cluster", "pca"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "extract": {
            "type": "object",
            "required": ["speakers", "observations", "summary"],
            "properties": {
                "summary": {"type": "array", "items": {
                    "type": "object",
                    "required": ["variable", "variant", "n", "total", "percent"],
                }},
            },
        },
        "correlate": {
            "type": "object",
            "required": ["measure", "n", "variables", "cells", "normality"],
            "properties": {"cells": {"type": "array", "minItems": 1, "items": {
                "type": "object", "required": ["a", "b", "rho", "p_value", "significant"],
                "properties": {"rho": {"type": "number", "minimum": -1, "maximum": 1},
                               "p_value": {"type": "number", "minimum": 0, "maximum": 1}}}}},
        },
        "cluster": {
            "type": "object",
            "required": ["k_curve", "optimal_k", "assignments", "composition", "cluster_means", "sizes"],
            "properties": {"optimal_k": {"type": "integer", "minimum": 2}},
        },
        "pca": {
            "type": "object",
            "required": ["eigenvalues", "variance_proportion", "loadings"],
        },
    },
}
