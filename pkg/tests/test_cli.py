import json
import subprocess
import sys

import jsonschema
import pytest

from covariation.cli import main
from covariation.corpus import serialize_corpus
from covariation.pipeline import REPORT_SCHEMA

from conftest import SENTENCE, make_doc

SMALL_PROFILES = [
    {"name": "A", "p_absent": 0.9, "p_voce": 0.9, "p_te": 0.1, "p_seu": 0.5,
     "sentences_min": 40, "sentences_max": 60},
    {"name": "B", "p_absent": 0.5, "p_voce": 0.1, "p_te": 0.9, "p_seu": 0.9,
     "sentences_min": 40, "sentences_max": 60},
    {"name": "C", "p_absent": 0.1, "p_voce": 0.5, "p_te": 0.5, "p_seu": 0.1,
     "sentences_min": 40, "sentences_max": 60},
]


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    cfg = out / "cfg.json"
    cfg.write_text(json.dumps({"dialect_profiles": SMALL_PROFILES}), encoding="utf-8")
    assert main(["synth", "--config", str(cfg), "--speakers", "8", "--seed", "3", "--out", str(out)]) == 0
    return out


def _args(d, *extra):
    return ["--corpus", str(d / "corpus.conllu"), "--metadata", str(d / "metadata.csv"), *extra]


def test_synth_outputs(synth_dir):
    for name in ("corpus.conllu", "metadata.csv", "labels.csv", "synth.json"):
        assert (synth_dir / name).exists()
    info = json.loads((synth_dir / "synth.json").read_text(encoding="utf-8"))
    assert info["rng"] == "splitmix64" and info["schema_version"] == 1


def test_extract(synth_dir, tmp_path, capsys):
    assert main(["extract", *_args(synth_dir, "--out", str(tmp_path))]) == 0
    header = (tmp_path / "observations.csv").read_text(encoding="utf-8").splitlines()[0]
    assert header == "order,file,speaker_id,variable,variant,preceding_context,match,following_context"
    data = json.loads((tmp_path / "extract.json").read_text(encoding="utf-8"))
    assert data["speakers"] == 24
    assert "pro2P" in capsys.readouterr().out


def test_report_is_byte_identical_and_valid(synth_dir, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert main(["report", *_args(synth_dir, "--out", str(out), "--k-max", "6")]) == 0
    ra, rb = (a / "report.json").read_bytes(), (b / "report.json").read_bytes()
    assert ra == rb
    report = json.loads(ra)
    jsonschema.validate(report, REPORT_SCHEMA)
    assert report["cluster"]["optimal_k"] == 3
    assert sorted(report["cluster"]["sizes"]) == [8, 8, 8]
    assert set(report) >= {"extract", "correlate", "cluster", "pca"}


def test_cluster_and_pca_outputs(synth_dir, tmp_path):
    assert main(["cluster", *_args(synth_dir, "--out", str(tmp_path), "--k-max", "5")]) == 0
    assert main(["pca", *_args(synth_dir, "--out", str(tmp_path), "--k-max", "5")]) == 0
    assert main(["correlate", *_args(synth_dir, "--out", str(tmp_path), "--holm")]) == 0
    assert (tmp_path / "assignments.csv").read_text().startswith("speaker_id,cluster\n")
    assert (tmp_path / "projection.csv").read_text().startswith("speaker_id,dim1,dim2,cluster\n")
    corr = json.loads((tmp_path / "correlation.json").read_text(encoding="utf-8"))
    assert corr["holm"] is True and len(corr["cells"]) == 6


def test_profile_table_input(synth_dir, tmp_path):
    assert main(["extract", *_args(synth_dir, "--out", str(tmp_path))]) == 0
    assert main(["cluster", "--profile-table", str(tmp_path / "profiles.csv"),
                 "--metadata", str(synth_dir / "metadata.csv"), "--out", str(tmp_path / "c"),
                 "--k-max", "5"]) == 0


def test_flags_override_config(synth_dir, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"k_max": 2, "measure": "log_odds", "out": str(tmp_path / "cfg_out")}))
    assert main(["cluster", "--config", str(cfg), *_args(synth_dir, "--k-max", "4")]) == 0
    data = json.loads((tmp_path / "cfg_out" / "cluster.json").read_text(encoding="utf-8"))
    assert data["measure"] == "log_odds"
    assert set(data["k_curve"]) == {"2", "3", "4"}


def test_empty_corpus_extract(tmp_path):
    empty = tmp_path / "empty.conllu"
    empty.write_text("", encoding="utf-8")
    assert main(["extract", "--corpus", str(empty), "--out", str(tmp_path / "o")]) == 0
    assert (tmp_path / "o" / "observations.csv").read_text().count("\n") == 1


def test_too_few_speakers_exits_2(tmp_path, capsys):
    docs = [make_doc(SENTENCE, f"S{i}", f"s{i}.txt") for i in range(2)]
    path = tmp_path / "c.conllu"
    path.write_text(serialize_corpus(docs), encoding="utf-8")
    assert main(["cluster", "--corpus", str(path), "--out", str(tmp_path)]) == 2
    assert "error:" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [
    ["extract", "--corpus", "/nonexistent/*.conllu"],
    ["extract"],
    ["cluster", "--corpus", "x", "--alpha", "2"],
    ["cluster", "--corpus", "x", "--k-min", "5", "--k-max", "3"],
    ["extract", "--config", "/nonexistent.json"],
    ["bogus"],
    ["extract", "--measure", "odds"],
])
def test_bad_input_exits_2(argv, tmp_path):
    assert main(argv + ["--out", str(tmp_path)] if argv[0] != "bogus" else argv) == 2


def test_unknown_config_key(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"colour": "red"}))
    assert main(["extract", "--config", str(cfg)]) == 2


def test_malformed_corpus_exits_2(tmp_path):
    bad = tmp_path / "bad.conllu"
    bad.write_text("# speaker_id = S1\n1\tvocê\tvocê\n", encoding="utf-8")
    assert main(["extract", "--corpus", str(bad), "--out", str(tmp_path)]) == 2


def test_help_exits_0(capsys):
    assert main(["--help"]) == 0
    assert "extract" in capsys.readouterr().out


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "covariation", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "synth" in proc.stdout
