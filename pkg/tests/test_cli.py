import json
import subprocess
import sys

import pytest

import bandjost.spectrum
from bandjost.bi_infinite import BiBandedOperator
from bandjost.cli import main
from bandjost.errors import NumericalError
from bandjost.model import BandedOperator

from conftest import random_operator, single_site


def write(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


@pytest.fixture
def op_file(tmp_path):
    return write(tmp_path / "op.json", random_operator(2, 5, 0.5, 4).to_json())


def test_analyze_success(tmp_path, op_file):
    out = tmp_path / "r.json"
    assert main(["analyze", "--input", op_file, "--out", str(out), "--oracle", "200,400"]) == 0
    rep = json.loads(out.read_text())
    assert rep["version"] and rep["command"] == "analyze"
    assert "threads" not in rep["config"]
    assert rep["oracle"]["unmatched"] == []


def test_analyze_single_site_value(tmp_path):
    f = write(tmp_path / "s.json", single_site(2.0).to_json())
    out = tmp_path / "r.json"
    assert main(["analyze", "--input", f, "--out", str(out)]) == 0
    ev = json.loads(out.read_text())["report"]["eigenvalues"]
    assert len(ev) == 1 and ev[0]["lambda"]["re"] == pytest.approx(2.5)


def test_threads_byte_identical(tmp_path, op_file):
    outs = []
    for t in (1, 3, 8):
        o = tmp_path / f"r{t}.json"
        assert main(["analyze", "--input", op_file, "--out", str(o), "--threads", str(t),
                     "--oracle", "100,200"]) == 0
        outs.append(o.read_bytes())
    assert outs[0] == outs[1] == outs[2]


def test_csv_outputs(tmp_path, op_file):
    g, e = tmp_path / "g.csv", tmp_path / "e.csv"
    assert main(["analyze", "--input", op_file, "--out", str(tmp_path / "r.json"), "--oracle",
                 "50,100", "--oracle-csv", str(e), "--gamma-csv", str(g), "--gamma-grid", "11"]) == 0
    assert g.read_text().splitlines()[0] == "re_z,im_z,abs_gamma"
    assert len(e.read_text().splitlines()) == 151


def test_input_errors(tmp_path):
    assert main(["analyze", "--input", str(tmp_path / "missing.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["analyze", "--input", str(bad)]) == 2
    assert main(["analyze", "--input", write(tmp_path / "x.json", {"p": 0, "band": []})]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["analyze"])
    assert exc.value.code == 2


def test_unsupported_exit_3(tmp_path):
    f = write(tmp_path / "s.json", single_site(1.5).to_json())
    assert main(["analyze", "--input", f, "--out", str(tmp_path / "r.json")]) == 0
    assert main(["analyze", "--input", f, "--require-enclosure"]) == 3
    bg = {"p": 2, "a": [1, 2], "b": [0, 0], "c": [1, 1]}
    assert main(["periodic", "--input", write(tmp_path / "bg.json", bg)]) == 3


def test_numerical_failure_exit_1(tmp_path, op_file, monkeypatch):
    def boom(*a, **k):
        raise NumericalError("forced")
    monkeypatch.setattr(bandjost.spectrum, "analyze", boom)
    assert main(["analyze", "--input", op_file]) == 1


def test_periodic_background(tmp_path):
    out = tmp_path / "p.json"
    bg = {"p": 2, "a": [1, 1], "b": [0, 0], "c": [1, 1]}
    assert main(["periodic", "--input", write(tmp_path / "bg.json", bg), "--out", str(out),
                 "--arcs", "64"]) == 0
    P = json.loads(out.read_text())["report"]["polynomial"]["P"]
    assert [x["re"] for x in P] == [-2.0, 0.0, 1.0]


def test_periodic_asymptotic(tmp_path):
    obj = {"background": {"p": 1, "a": [1], "b": [0], "c": [1]}, "perturbation": {"b": {"0": 3}}}
    out = tmp_path / "p.json"
    assert main(["periodic", "--input", write(tmp_path / "j.json", obj), "--out", str(out)]) == 0
    ev = json.loads(out.read_text())["report"]["eigenvalues"]
    assert ev[0]["lambda"]["re"] == pytest.approx(13**0.5, abs=1e-9)


def test_generate_and_double(tmp_path):
    out = tmp_path / "g.json"
    assert main(["generate", "--family", "class", "--p", "2", "--seed", "3", "--out", str(out)]) == 0
    op = BandedOperator.from_json(json.loads(out.read_text()))
    assert op.p == 2 and op.tail.kind == "exp_beta"
    c1 = write(tmp_path / "c1.json", single_site(2.0).to_json())
    assert main(["generate", "--family", "interleave", "--components", c1, c1,
                 "--out", str(out)]) == 0
    assert json.loads(out.read_text())["p"] == 2
    assert main(["generate", "--family", "interleave"]) == 2
    bi = BiBandedOperator.from_entries(1, {0: {0: 3.0}}).to_json()
    f = write(tmp_path / "bi.json", bi)
    assert main(["double", "--input", write(tmp_path / "typo.json", {**bi, "band": []})]) == 2
    assert main(["double", "--input", f, "--out", str(out)]) == 0
    assert json.loads(out.read_text())["p"] == 2
    r = tmp_path / "r.json"
    assert main(["analyze", "--input", f, "--out", str(r)]) == 0
    ev = json.loads(r.read_text())["report"]["eigenvalues"]
    assert ev[0]["lambda"]["re"] == pytest.approx(13**0.5, abs=1e-9)


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "bandjost", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.strip()
