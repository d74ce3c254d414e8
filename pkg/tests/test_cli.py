"""Corpus plumbing, report writing, and the command-line entry point."""
from __future__ import annotations

import json
import math
import os

import pytest

from currentkit.cli import (
    CORPUS_SHAPES, Row, RunConfig, UPWARD,
    _ineq_row, corpus_by_graph, default_corpus, emit_corpus, load_corpus, main,
)


def test_default_corpus_layout():
    corpus = default_corpus()
    assert len(corpus) == 22
    ids = [iid for iid, _ in corpus]
    assert len(set(ids)) == 22
    assert "triangle@b1" in ids
    assert "k4@b1" not in ids          # capped shape stops at 0.5
    picked = corpus_by_graph()
    assert len(picked) == len(CORPUS_SHAPES) == 8
    assert [iid.split("@")[0] for iid, _ in picked] == [s[0] for s in CORPUS_SHAPES]
    for iid, _ in picked:
        name = iid.split("@")[0]
        betas = [float(i.split("@b")[1]) for i, _ in corpus
                 if i.startswith(name + "@")]
        assert float(iid.split("@b")[1]) == max(betas)


def test_corpus_roundtrip(tmp_path):
    written = emit_corpus(str(tmp_path))
    assert len(written) == 22
    assert all(os.path.exists(p) for p in written)
    cfg = RunConfig(corpus_dir=os.path.join(str(tmp_path), "corpus"))
    loaded = dict(load_corpus(cfg))
    assert len(loaded) == 22
    for iid, g in default_corpus():
        lg = loaded[iid.replace("@", "_")]
        assert lg.labels == g.labels
        assert lg.bonds == g.bonds
        assert lg.beta == g.beta


def test_load_corpus_rejects_empty_dir(tmp_path):
    from currentkit import GraphError
    with pytest.raises(GraphError):
        load_corpus(RunConfig(corpus_dir=str(tmp_path)))


def test_config_validation(tmp_path):
    with pytest.raises(ValueError):
        RunConfig(rtol=0.0)
    with pytest.raises(ValueError):
        RunConfig(threads=0)
    with pytest.raises(ValueError):
        RunConfig(cap=0)
    with pytest.raises(ValueError):
        RunConfig(torus_side=2)
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({"rtol": 1e-8, "bogus": 3}))
    with pytest.raises(ValueError, match="bogus"):
        RunConfig.from_file(str(p))
    p.write_text(json.dumps({"depicted_L": [2.0, 4.0], "seed": 1}))
    cfg = RunConfig.from_file(str(p))
    assert cfg.depicted_L == (2.0, 4.0)
    assert cfg.seed == 1


def test_row_failed_states():
    mk = lambda st: Row("s", "i", "c", 0.0, 0.0, 0.0, st)
    assert mk("fail").failed and mk("error").failed
    assert not mk("pass").failed
    assert not mk("trivial").failed
    assert not mk("report").failed


def test_ineq_row_boundaries():
    assert _ineq_row("s", "i", "c", 1.0, math.inf).status == "trivial"
    assert _ineq_row("s", "i", "c", 0.5, 1.0).status == "pass"
    assert _ineq_row("s", "i", "c", 1.0 + 2.0 ** -47, 1.0).status == "pass"
    assert _ineq_row("s", "i", "c", 1.0 + 2.0 ** -40, 1.0).status == "fail"
    assert UPWARD - 1.0 == 2.0 ** -46


def test_main_corpus_command(tmp_path, capsys):
    assert main(["corpus", "--out", str(tmp_path)]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 22
    assert all(os.path.exists(ln) for ln in lines)


def _report_body(out_dir):
    with open(os.path.join(out_dir, "report.csv")) as fh:
        lines = fh.read().splitlines()
    assert lines[0].startswith("# generated ")
    return lines[1:]


def test_main_run_is_deterministic(tmp_path, capsys):
    d1, d2 = str(tmp_path / "a"), str(tmp_path / "b")
    assert main(["run", "identities", "--out", d1]) == 0
    assert main(["run", "identities", "--out", d2]) == 0
    capsys.readouterr()
    b1, b2 = _report_body(d1), _report_body(d2)
    assert b1 == b2
    assert b1[0].split(",")[:3] == ["suite", "instance", "check"]
    assert len(b1) > 200


def test_main_reports_honest_failures(tmp_path, capsys):
    cfg = tmp_path / "strict.json"
    cfg.write_text(json.dumps({"rtol": 1e-30, "out": str(tmp_path / "r")}))
    assert main(["run", "identities", "--config", str(cfg)]) == 1
    out = capsys.readouterr().out
    assert "failed: 0" not in out


def test_main_config_errors(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"nonsense": True}))
    assert main(["run", "identities", "--config", str(bad)]) == 2
    assert main(["run", "identities", "--config", str(tmp_path / "nope.json")]) == 2
    assert main(["run", "identities", "--cap", "0",
                 "--out", str(tmp_path / "x")]) == 2
    err = capsys.readouterr().err
    assert err.count("config error") == 3


def test_summary_counts_match_report(tmp_path, capsys):
    out = str(tmp_path / "r")
    assert main(["run", "lace", "--out", out]) == 0
    capsys.readouterr()
    body = _report_body(out)
    with open(os.path.join(out, "summary.txt")) as fh:
        head = fh.readline()
    assert head == f"checks: {len(body) - 1}  failed: 0\n"
