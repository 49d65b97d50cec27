import csv
import json
import xml.etree.ElementTree as ET

import pytest

from postln_lens.cli import main
from postln_lens.weights_io import load_weights

from test_model import same_weights


def run(*args):
    return main([str(a) for a in args])


@pytest.fixture(scope="module")
def work(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert run("model", "init", "--seed", 1, "--out", d / "m.json") == 0
    assert run("positions", "--count", 20, "--seed", 1, "--out", d / "pos.jsonl") == 0
    return d


def manifest(path):
    p = path / "manifest.json" if path.is_dir() else path.with_name(path.name + ".manifest.json")
    return json.loads(p.read_text())


def test_model_init_roundtrip_and_determinism(work, tmp_path):
    assert run("model", "init", "--seed", 1, "--out", tmp_path / "again.json") == 0
    assert (tmp_path / "again.json").read_bytes() == (work / "m.json").read_bytes()
    w = load_weights(work / "m.json")
    from postln_lens.model import ModelConfig, init_model
    assert same_weights(w, init_model(ModelConfig(seed=1)))
    m = manifest(work / "m.json")
    assert m["command"] == "model init" and m["seed"] == 1 and "wall_clock_seconds" in m


def test_model_init_bad_config(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"d_model": 30, "heads": 4}))
    assert run("model", "init", "--config", cfg, "--out", tmp_path / "m.json") == 2
    cfg.write_text("{oops")
    assert run("model", "init", "--config", cfg, "--out", tmp_path / "m.json") == 2
    cfg.write_text(json.dumps({"layers": 2, "d_model": 16, "heads": 2, "ffn_dim": 8}))
    assert run("model", "init", "--config", cfg, "--seed", 4, "--out", tmp_path / "m.json") == 0
    assert load_weights(tmp_path / "m.json").config.layers == 2


def test_corrupted_tag_exit_3(work, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text((work / "m.json").read_text().replace("LENSW1", "LENSW9"))
    assert run("lens", "sweep", "--weights", bad, "--positions", work / "pos.jsonl", "--out", tmp_path / "r") == 3


def test_lens_sweep(work, tmp_path):
    pos = tmp_path / "three.jsonl"
    pos.write_text("".join((work / "pos.jsonl").read_text().splitlines(keepends=True)[:3]))
    out1, out2 = tmp_path / "r1.jsonl", tmp_path / "r2.jsonl"
    assert run("lens", "sweep", "--weights", work / "m.json", "--positions", pos, "--out", out1) == 0
    assert run("lens", "sweep", "--weights", work / "m.json", "--positions", pos, "--out", out2) == 0
    assert len(out1.read_text().splitlines()) == 3 * 5
    assert out1.read_bytes() == out2.read_bytes()
    assert manifest(out1)["mode"] == "default"
    out3 = tmp_path / "r3.jsonl"
    assert run("lens", "sweep", "--weights", work / "m.json", "--positions", pos, "--mode", "keep-beta",
               "--out", out3) == 0
    assert manifest(out3)["mode"] == "keep_beta"
    assert out3.read_bytes() != out1.read_bytes()
    assert run("lens", "sweep", "--weights", work / "missing.json", "--positions", pos, "--out", out3) == 2
    assert run("lens", "sweep", "--weights", work / "m.json", "--positions", tmp_path / "nope", "--out", out3) == 2


def test_bad_positions(work, tmp_path):
    pos = tmp_path / "bad.jsonl"
    pos.write_text('{"board": "xx"}\n')
    assert run("lens", "sweep", "--weights", work / "m.json", "--positions", pos, "--out", tmp_path / "r") in (2, 3)
    pos.write_text("not json\n")
    assert run("lens", "sweep", "--weights", work / "m.json", "--positions", pos, "--out", tmp_path / "r") == 3


def test_decomp_verify(work, tmp_path):
    out = tmp_path / "d.csv"
    assert run("decomp", "verify", "--weights", work / "m.json", "--positions", work / "pos.jsonl",
               "--tol", 1e-9, "--out", out) == 0
    rows = list(csv.reader(out.open()))
    assert rows[0] == ["position_id", "stage", "max_abs_err", "max_rel_err", "norm_i", "norm_z_mha",
                       "norm_z_ffn", "norm_b", "norm_m"]
    assert len(rows) == 1 + 20 * 5
    assert run("decomp", "verify", "--weights", work / "m.json", "--positions", work / "pos.jsonl",
               "--tol", 1e-15, "--out", tmp_path / "d2.csv") == 1
    empty = tmp_path / "empty.jsonl"
    empty.write_text("")
    assert run("decomp", "verify", "--weights", work / "m.json", "--positions", empty, "--out", out) == 2


def test_metrics_and_chart(work, tmp_path):
    pos = tmp_path / "one.jsonl"
    pos.write_text((work / "pos.jsonl").read_text().splitlines(keepends=True)[0])
    rep = tmp_path / "rep.jsonl"
    assert run("lens", "sweep", "--weights", work / "m.json", "--positions", pos, "--out", rep) == 0
    met = tmp_path / "met"
    assert run("metrics", "compute", "--report", rep, "--out", met) == 0
    assert (met / "manifest.json").exists()
    for f in met.glob("*.csv"):
        rows = list(csv.reader(f.open()))
        assert rows[0] == ["stage", "p5", "p25", "p50", "p75", "p95", "n"]
        for r in rows[1:]:
            if r[-1] != "0":
                assert len(set(r[1:6])) == 1
    charts = tmp_path / "charts"
    assert run("chart", "--metrics", met, "--out", charts) == 0
    svg = ET.parse(charts / "jsd.svg").getroot()
    ns = "{http://www.w3.org/2000/svg}"
    assert len(svg.findall(f"{ns}polygon")) == 2 and len(svg.findall(f"{ns}polyline")) == 1
    assert (charts / "manifest.json").exists()
    assert run("chart", "--metrics", tmp_path / "void", "--out", charts) == 2
    (tmp_path / "bad").mkdir()
    (tmp_path / "bad" / "x.csv").write_text("a,b\n")
    assert run("chart", "--metrics", tmp_path / "bad", "--out", charts) == 3


def test_tournament_and_elo(work, tmp_path):
    res = tmp_path / "res.csv"
    assert run("tournament", "--weights", work / "m.json", "--stages", "input,L1,full", "--games", 2,
               "--opening-plies", 4, "--seed", 3, "--out", res) == 0
    assert len(res.read_text().splitlines()) == 1 + 6
    res2 = tmp_path / "res2.csv"
    run("tournament", "--weights", work / "m.json", "--stages", "input,L1,full", "--games", 2,
        "--opening-plies", 4, "--seed", 3, "--out", res2)
    assert res.read_bytes() == res2.read_bytes()
    assert run("tournament", "--weights", work / "m.json", "--stages", "0,9", "--out", res2) == 2

    sym = tmp_path / "sym.csv"
    sym.write_text("white_id,black_id,outcome\nA,B,1-0\nB,A,1-0\nA,B,1/2\nB,A,1/2\n")
    elo = tmp_path / "elo.csv"
    assert run("elo", "--results", sym, "--out", elo) == 0
    rows = list(csv.DictReader(elo.open()))
    assert {r["Model"]: r["Elo"] for r in rows} == {"A": "0", "B": "0"}
    assert manifest(elo)["anchor"] == ["A", 0.0]
    bad = tmp_path / "bad.csv"
    bad.write_text("who,what\n")
    assert run("elo", "--results", bad, "--out", elo) == 3


def test_puzzles_cli(work, tmp_path):
    pz = tmp_path / "pz.jsonl"
    assert run("puzzles", "generate", "--count", 5, "--seed", 2, "--out", pz) == 0
    out = tmp_path / "pe"
    assert run("puzzles", "eval", "--weights", work / "m.json", "--puzzles", pz, "--stages", "all", "--out", out) == 0
    rows = list(csv.reader((out / "solve_matrix.csv").open()))
    assert rows[0] == ["puzzle", "input", "L0", "L1", "L2", "full"] and len(rows) == 6
    dyn = list(csv.DictReader((out / "solve_dynamics.csv").open()))
    assert [d["label"] for d in dyn] == ["input", "L0", "L1", "L2", "full"]
    assert (out / "manifest.json").exists()


def test_usage_errors():
    assert run() == 2
    assert run("lens") == 2
    assert run("model", "init") == 2
