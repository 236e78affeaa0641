import csv
import io
import json
from pathlib import Path

import numpy as np
import pytest

from bosoncert import ModeUnitary, SampleBatch, make_fourier
from bosoncert.certify import CSV_COLUMNS
from bosoncert.cli import main

DATA = Path(__file__).parent / "data"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def parse_csv(text):
    meta = {}
    body = []
    for line in text.splitlines():
        if line.startswith("# "):
            k, _, v = line[2:].partition("=")
            meta[k] = v
        else:
            body.append(line)
    return meta, list(csv.DictReader(io.StringIO("\n".join(body))))


# -- sample ------------------------------------------------------------------


def test_sample_boson_fourier_clean(tmp_path, capsys):
    out = tmp_path / "b.jsonl"
    code, stdout, _ = run(capsys, "sample", "--model", "boson", "--fourier", "--n", 3, "--p", 2,
                          "--shots", 1000, "--seed", 7, "--out", out)
    assert code == 0
    summary = json.loads(stdout)
    assert summary["shots"] == 1000 and summary["forbidden"] == 0
    assert len(out.read_text().splitlines()) == 1000


def test_sample_uniform_stdout(capsys):
    code, stdout, _ = run(capsys, "sample", "--model", "uniform", "--n", 2, "--m", 2, "--shots", 3, "--seed", 1)
    assert code == 0
    rows = [json.loads(l)["k"] for l in stdout.splitlines()]
    assert len(rows) == 3
    assert all(r in ([1, 1], [1, 2], [2, 2]) for r in rows)


def test_sample_rerun_byte_identical(tmp_path, capsys):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    for path in (a, b):
        run(capsys, "sample", "--model", "meanfield", "--fourier", "--n", 3, "--shots", 500, "--seed", 3, "--out", path)
    assert a.read_bytes() == b.read_bytes()
    assert Path(str(a) + ".header.json").read_bytes() == Path(str(b) + ".header.json").read_bytes()


def test_sample_header_records_seed(tmp_path, capsys):
    out = tmp_path / "b.jsonl"
    run(capsys, "sample", "--model", "classical", "--fourier", "--n", 2, "--shots", 10, "--out", out)
    header = json.loads(Path(str(out) + ".header.json").read_text())
    assert isinstance(header["seed"], int)
    assert header["matrix_ref"] == "fourier:m=4"
    assert len(header["config_hash"]) == 16


def test_sample_cap_exit(capsys):
    code, _, err = run(capsys, "sample", "--model", "boson", "--fourier", "--n", 3, "--shots", 5, "--seed", 1,
                       "--cap", 10)
    assert code == 3 and "cap" in err


def test_sample_precondition_exit(capsys):
    code, _, _ = run(capsys, "sample", "--model", "boson", "--fourier", "--n", 3, "--m", 10, "--shots", 5)
    assert code == 0  # --fourier forces m = n**p
    code, _, err = run(capsys, "sample", "--model", "boson", "--n", 3, "--m", 10, "--shots", 5)
    assert code == 2 and "cyclic" in err
    code, _, _ = run(capsys, "sample", "--model", "uniform", "--n", 2, "--m", 2, "--shots", 0)
    assert code == 2


def test_sample_bad_output_dir(tmp_path, capsys):
    code, _, _ = run(capsys, "sample", "--model", "uniform", "--n", 2, "--m", 2, "--shots", 3,
                     "--out", tmp_path / "missing" / "x.jsonl")
    assert code == 4


# -- certify -----------------------------------------------------------------


def test_certify_clean_false_accept(tmp_path, capsys):
    # six allowed events of ten particles
    path = tmp_path / "clean.jsonl"
    row = list(range(1, 11))  # sum 55 is forbidden for n=10
    row[-1] = 15  # sum 60 is allowed
    path.write_text("".join(json.dumps({"k": sorted(row)}) + "\n" for _ in range(6)))
    code, out, _ = run(capsys, "certify", path)
    rep = json.loads(out)
    assert code == 0
    assert (rep["n_forbidden"], rep["n_runs"]) == (0, 6)
    assert rep["false_accept_prob"] == pytest.approx(1e-6, rel=1e-12)


def test_certify_classical_batch(tmp_path, capsys):
    path = tmp_path / "c.jsonl"
    run(capsys, "sample", "--model", "classical", "--fourier", "--n", 3, "--shots", 100000, "--seed", 5,
        "--out", path)
    code, out, _ = run(capsys, "certify", path)
    rep = json.loads(out)
    sigma = np.sqrt(2 / 9 / 100000)
    assert code == 0 and abs(rep["violation"] - 2 / 3) <= 4 * sigma
    assert rep["false_accept_prob"] is None


def test_certify_empty(tmp_path, capsys):
    path = tmp_path / "empty.jsonl"
    path.write_text("")
    code, _, err = run(capsys, "certify", path)
    assert code == 2 and "empty" in err


def test_certify_malformed_line(tmp_path, capsys):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"k": [1, 2]}\n{"k": [1, \n')
    code, _, err = run(capsys, "certify", path)
    assert code == 2 and "line 2" in err


def test_certify_missing(tmp_path, capsys):
    code, _, _ = run(capsys, "certify", tmp_path / "nope.jsonl")
    assert code == 4


# -- matrix, witness, estimate -----------------------------------------------


def test_matrix_fourier_roundtrip(tmp_path, capsys):
    path = tmp_path / "f.json"
    assert run(capsys, "matrix", "--kind", "fourier", "--m", 9, "--out", path)[0] == 0
    u = ModeUnitary.load(path)
    np.testing.assert_allclose(u.entries, make_fourier(9).entries, atol=1e-15)


def test_matrix_perturbed(tmp_path, capsys):
    path = tmp_path / "w.json"
    code, _, _ = run(capsys, "matrix", "--kind", "perturbed", "--m", 9, "--avg-dev", 0.01, "--seed", 2, "--out", path)
    assert code == 0
    w = ModeUnitary.load(path)
    assert w.label == "perturbed"
    assert np.abs(w.entries - make_fourier(9).entries).mean() == pytest.approx(0.01 / 3)


def test_matrix_file_feeds_sampler(tmp_path, capsys):
    path = tmp_path / "h.json"
    run(capsys, "matrix", "--kind", "haar", "--m", 4, "--seed", 3, "--out", path)
    code, out, _ = run(capsys, "witness", "--matrix", path, "--n", 2, "--model", "classical", "--seed", 0)
    assert code == 0
    assert sum(json.loads(out)["mean_occupations"]) == pytest.approx(2.0)


def test_witness_beam_splitter_like(capsys):
    code, out, _ = run(capsys, "witness", "--fourier", "--n", 3, "--model", "classical", "--seed", 1)
    d = json.loads(out)
    assert code == 0
    np.testing.assert_allclose(d["mean_occupations"], 1 / 3, atol=1e-12)
    assert d["C"] is None


def test_witness_from_batch(tmp_path, capsys):
    path = tmp_path / "b.jsonl"
    run(capsys, "sample", "--model", "boson", "--walk", "--n", 3, "--shots", 200, "--seed", 2, "--out", path)
    code, out, _ = run(capsys, "witness", "--batch", path)
    assert code == 0 and json.loads(out)["C"] is not None


def test_estimate(capsys):
    code, out, _ = run(capsys, "estimate", "--n", 10, "--alpha", 1e-6, "--avg-dev", "0.02")
    d = json.loads(out)
    assert code == 0
    assert d["required_runs"] == 6
    assert d["deviation"][0]["v_dev_closed_form"] == pytest.approx(np.sqrt(np.e) * 9 * 4e-4)
    assert "warnings" not in d


def test_estimate_warns_and_overlap(tmp_path, capsys):
    ov = tmp_path / "ov.json"
    ov.write_text(json.dumps([[1, 0.8], [0.8, 1]]))
    code, out, _ = run(capsys, "estimate", "--n", 2, "--avg-dev", "0.6", "--overlap", ov)
    d = json.loads(out)
    assert code == 0 and d["warnings"]
    assert d["v_partial_bound"] == pytest.approx(0.5 * (1 - 0.64))


# -- figures and config ------------------------------------------------------


def test_figure_golden_schema(capsys):
    golden_meta, golden = parse_csv((DATA / "fig3_small.csv").read_text())
    code, out, _ = run(capsys, "figure", "fig3", "--n", "2,3", "--draws", 200, "--seed", 0)
    meta, rows = parse_csv(out)
    assert code == 0
    assert out.splitlines()[4] == ",".join(CSV_COLUMNS)
    assert list(meta) == ["version", "seed", "config_hash", "config"]
    assert meta["config_hash"] == golden_meta["config_hash"]
    assert len(rows) == len(golden)
    for new, old in zip(rows, golden):
        assert [new[k] for k in CSV_COLUMNS[:5]] == [old[k] for k in CSV_COLUMNS[:5]]
        assert float(new["value"]) == pytest.approx(float(old["value"]), abs=1e-12)


@pytest.mark.parametrize("which, extra", [
    ("fig2a", ["--n", "3", "--ensemble", "3", "--draws", "50"]),
    ("fig2b", ["--n", "3", "--draws", "50"]),
    ("fig4", ["--avg-dev", "0.01,0.02", "--draws", "5", "--sample-size", "20"]),
])
def test_figure_deterministic(which, extra, capsys):
    first = run(capsys, "figure", which, "--seed", 11, *extra)[1]
    second = run(capsys, "figure", which, "--seed", 11, *extra)[1]
    assert first == second
    meta, rows = parse_csv(first)
    assert rows and set(rows[0]) == set(CSV_COLUMNS)


def test_figure_fig4_columns(capsys):
    _, out, _ = run(capsys, "figure", "fig4", "--avg-dev", "0.01", "--draws", "4", "--sample-size", "20", "--seed", 0)
    _, rows = parse_csv(out)
    assert {r["quantity"] for r in rows} == {"V_numeric", "V_numeric_spread", "V_estimate", "V_estimate_general"}
    assert all(r["param"] == "0.01" for r in rows)


def test_figure_cap(capsys):
    code, _, _ = run(capsys, "figure", "fig2a", "--n", "3", "--ensemble", "1", "--draws", "5", "--cap", "10")
    assert code == 3


def test_config_precedence(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"shots": 7, "seed": 4, "model": "uniform", "n": 2, "m": 3}))
    _, out, _ = run(capsys, "sample", "--config", cfg)
    assert len(out.splitlines()) == 7
    _, out2, _ = run(capsys, "sample", "--config", cfg, "--shots", 2)
    assert out2.splitlines() == out.splitlines()[:2] or len(out2.splitlines()) == 2


def test_config_errors(tmp_path, capsys):
    bad = tmp_path / "c.json"
    bad.write_text("{not json")
    assert run(capsys, "sample", "--config", bad)[0] == 2
    assert run(capsys, "sample", "--config", tmp_path / "missing.json")[0] == 4


def test_module_entry_point():
    import subprocess
    import sys
    r = subprocess.run([sys.executable, "-m", "bosoncert", "estimate", "--n", "3", "--alpha", "0.1"],
                       capture_output=True, text=True, check=True)
    assert json.loads(r.stdout)["required_runs"] == 3
