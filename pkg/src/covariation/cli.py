"""Command-line entry point: ``covariation <command> [options]``.

Settings come from flags, then an optional JSON ``--config`` file, then
defaults, in that order of precedence. Exit status: 0 success, 1 internal
error, 2 bad usage or input.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import os
import sys

import jsonschema

from . import pipeline
from .corpus import dump_metadata, serialize_corpus
from .inventory import Variable
from .multivariate import write_projection
from .pipeline import InputError, RunConfig
from .profiles import export_profiles
from .synth import DialectProfile, SynthError, generate_corpus, write_labels
from .variables import export_observations

log = logging.getLogger("covariation")

DEFAULT_DIALECT_PROFILES = [
    {"name": "A", "p_absent": 0.9, "p_voce": 0.9, "p_te": 0.1, "p_seu": 0.5},
    {"name": "B", "p_absent": 0.5, "p_voce": 0.1, "p_te": 0.9, "p_seu": 0.9},
    {"name": "C", "p_absent": 0.1, "p_voce": 0.5, "p_te": 0.5, "p_seu": 0.1},
]


def _write_json(path: str, data: dict) -> None:
    payload = {"schema_version": pipeline.SCHEMA_VERSION, **pipeline.to_jsonable(data)}
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, ensure_ascii=False, indent=2, allow_nan=False)
        fh.write("\n")


def _open_out(cfg: RunConfig, name: str):
    os.makedirs(cfg.out, exist_ok=True)
    return open(os.path.join(cfg.out, name), "w", encoding="utf-8", newline="")


def cmd_extract(cfg: RunConfig) -> int:
    inp = pipeline.load_inputs(cfg)
    if not inp.documents and not inp.profiles:
        log.warning("corpus is empty")
    with _open_out(cfg, "observations.csv") as fh:
        export_observations(inp.observations, fh)
    with _open_out(cfg, "profiles.csv") as fh:
        export_profiles(inp.profiles, fh)
    section = pipeline.extract_section(inp)
    with _open_out(cfg, "summary.csv") as fh:
        writer = csv.DictWriter(fh, ["variable", "variant", "n", "total", "percent"], lineterminator="\n")
        writer.writeheader()
        writer.writerows(section["summary"])
    _write_json(os.path.join(cfg.out, "extract.json"), section)
    for row in section["summary"]:
        print(f"{row['variable']:9} {row['variant']:5} {row['n']}/{row['total']} {row['percent']:.1f}%")
    return 0


def cmd_correlate(cfg: RunConfig) -> int:
    inp = pipeline.load_inputs(cfg)
    section, cm = pipeline.correlate_section(inp, cfg)
    _write_json(os.path.join(cfg.out, "correlation.json"), section)
    with _open_out(cfg, "correlation.csv") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["a", "b", "rho", "p_value", "significant"])
        for c in section["cells"]:
            writer.writerow([c["a"], c["b"], repr(c["rho"]), repr(c["p_value"]), c["significant"]])
    for c in section["cells"]:
        mark = "*" if c["significant"] else ""
        print(f"{c['a']:>8} x {c['b']:<8} rho={c['rho']:+.3f} p={c['p_value']:.4f}{mark}")
    return 0


def _write_cluster(cfg: RunConfig, outcome) -> None:
    _write_json(os.path.join(cfg.out, "cluster.json"), outcome.section)
    with _open_out(cfg, "assignments.csv") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["speaker_id", "cluster"])
        for sid, cl in outcome.section["assignments"].items():
            writer.writerow([sid, cl])


def cmd_cluster(cfg: RunConfig) -> int:
    inp = pipeline.load_inputs(cfg)
    outcome = pipeline.cluster_section(inp, cfg)
    _write_cluster(cfg, outcome)
    s = outcome.section
    print(f"optimal k = {s['optimal_k']} (avg silhouette {s['avg_silhouette']:.3f}); sizes {s['sizes']}")
    return 0


def cmd_pca(cfg: RunConfig) -> int:
    inp = pipeline.load_inputs(cfg)
    outcome = pipeline.cluster_section(inp, cfg)
    section, rows = pipeline.pca_section(outcome)
    _write_json(os.path.join(cfg.out, "pca.json"), section)
    with _open_out(cfg, "projection.csv") as fh:
        write_projection(rows, fh)
    props = section["variance_proportion"]
    print(f"Dim1 {100 * props[0]:.1f}%  Dim2 {100 * props[1]:.1f}%  total {section['dim1_dim2_percent']:.1f}%")
    return 0


def cmd_synth(cfg: RunConfig) -> int:
    specs = cfg.dialect_profiles or DEFAULT_DIALECT_PROFILES
    try:
        profiles = [DialectProfile(**spec) for spec in specs]
        corpus = generate_corpus(profiles, cfg.speakers, cfg.seed, noise=cfg.noise)
    except (SynthError, TypeError) as exc:
        raise InputError(f"invalid dialect profile: {exc}") from None
    with _open_out(cfg, "corpus.conllu") as fh:
        fh.write(serialize_corpus(corpus.documents))
    with _open_out(cfg, "metadata.csv") as fh:
        dump_metadata(corpus.metadata, fh)
    with _open_out(cfg, "labels.csv") as fh:
        write_labels(corpus, fh)
    tallies = {sid: {v.label: list(t[v]) for v in Variable} for sid, t in corpus.tallies.items()}
    _write_json(os.path.join(cfg.out, "synth.json"), {
        "rng": corpus.rng, "seed": cfg.seed, "speakers_per_profile": cfg.speakers, "noise": cfg.noise,
        "profiles": [dataclasses.asdict(p) for p in profiles], "tallies": tallies,
    })
    print(f"wrote {len(corpus.documents)} speakers to {cfg.out}")
    return 0


def cmd_report(cfg: RunConfig) -> int:
    inp = pipeline.load_inputs(cfg)
    extract = pipeline.extract_section(inp)
    correlate, _ = pipeline.correlate_section(inp, cfg)
    outcome = pipeline.cluster_section(inp, cfg)
    pca, rows = pipeline.pca_section(outcome)
    report = {"schema_version": pipeline.SCHEMA_VERSION, "extract": extract, "correlate": correlate,
              "cluster": outcome.section, "pca": pca}
    report = pipeline.to_jsonable(report)
    jsonschema.validate(report, pipeline.REPORT_SCHEMA)
    _write_json(os.path.join(cfg.out, "report.json"), report)
    print(f"report written to {os.path.join(cfg.out, 'report.json')}")
    return 0


COMMANDS = {
    "extract": cmd_extract,
    "correlate": cmd_correlate,
    "cluster": cmd_cluster,
    "pca": cmd_pca,
    "synth": cmd_synth,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="JSON file with settings (flags take precedence)")
    common.add_argument("--corpus", action="append", help="corpus file or glob; repeatable")
    common.add_argument("--metadata", help="speaker metadata CSV")
    common.add_argument("--rules", help="JSON rule file replacing the built-in rules")
    common.add_argument("--profile-table", help="per-speaker profile CSV instead of a corpus")
    common.add_argument("--measure", choices=["rate", "log_odds"])
    common.add_argument("--imputation", choices=["zero", "exclude"])
    common.add_argument("--k-min", type=int)
    common.add_argument("--k-max", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output directory")
    common.add_argument("--alpha", type=float)
    common.add_argument("--holm", action="store_true", help="Holm-correct correlation p-values")
    common.add_argument("--exclude-variable", dest="exclude_variables", action="append",
                        help="drop a variable from clustering/PCA; repeatable")
    common.add_argument("--speakers", type=int, help="synth: speakers per profile")
    common.add_argument("--noise", type=float, help="synth: distractor sentence probability")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="covariation", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=fn.__name__.replace("cmd_", ""))
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    values = {}
    config_path = getattr(args, "config", None)
    if config_path:
        try:
            with open(config_path, encoding="utf-8") as fh:
                values.update(json.load(fh))
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read config {config_path}: {exc}") from None
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config", "verbose")}
    values.update(flags)
    known = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise InputError(f"unknown config keys: {', '.join(unknown)}")
    if isinstance(values.get("corpus"), str):
        values["corpus"] = [values["corpus"]]
    cfg = RunConfig(**values)
    cfg.validate()
    return cfg


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        log.exception("internal error: %s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
