import json
from pathlib import Path

from frogsim.cli import main
from frogsim.reports import dump_csv, dump_json, fmt12, normalize, round12


def test_round12_and_fmt12():
    assert round12(1.0 / 3.0) == 0.333333333333
    assert fmt12(1.0 / 3.0) == "0.333333333333"
    assert fmt12(2) == "2"
    assert fmt12(float("nan")) == "nan"
    assert round12(0.1) == 0.1


def test_normalize_handles_structures():
    import numpy as np

    obj = {"a": [1, 2.5, (3, 4)], "b": np.float64(0.25), "c": float("nan"), "d": float("inf")}
    out = normalize(obj)
    assert out == {"a": [1, 2.5, [3, 4]], "b": 0.25, "c": "nan", "d": "inf"}


def test_dump_json_and_csv_stable(tmp_path: Path):
    p1 = tmp_path / "a.json"
    p2 = tmp_path / "b.json"
    payload = {"x": 1 / 7, "rows": [{"v": 2 / 3}]}
    dump_json(payload, p1)
    dump_json(payload, p2)
    assert p1.read_bytes() == p2.read_bytes()
    c = tmp_path / "t.csv"
    dump_csv(c, ["a", "b"], [[1, 1 / 3], [2, 0.5]])
    assert c.read_text() == "a,b\n1,0.333333333333\n2,0.5\n"


def run_cli(*argv):
    return main(list(argv))


def test_cli_requires_seed(capsys, tmp_path):
    code = run_cli("mu", "--law", "poisson:1.0", "--k", "4", "--replicas", "5", "--out", str(tmp_path))
    assert code == 2


def test_cli_bad_epsilon(tmp_path):
    code = run_cli(
        "tails", "--law", "poisson:1.0", "--k", "4,8", "--replicas", "5",
        "--epsilon", "-0.5", "--seed", "1", "--mu-hat", "2.0", "--out", str(tmp_path / "t"),
    )
    assert code == 2


def test_cli_bad_law(tmp_path):
    code = run_cli(
        "mu", "--law", "zipf:2", "--k", "4,8", "--replicas", "5", "--seed", "1",
        "--out", str(tmp_path / "m"),
    )
    assert code == 2


def test_cli_censoring_exit_code(tmp_path):
    # mu_hint far below the real time constant forces a tiny horizon
    code = run_cli(
        "concentration", "--law", "constant:1", "--k", "40", "--replicas", "8",
        "--mu-hint", "0.05", "--seed", "3", "--out", str(tmp_path / "c"),
    )
    assert code == 3


def test_cli_sample_env_and_passage(tmp_path):
    out = tmp_path / "env"
    assert run_cli(
        "sample-env", "--law", "bernoulli:0.7", "--radius", "5", "--seed", "9",
        "--condition", "--out", str(out),
    ) == 0
    doc = json.loads((out / "environment.json").read_text())
    assert doc["conditioned_origin"] is True
    assert doc["box_radius"] == 5

    out2 = tmp_path / "passage"
    assert run_cli(
        "passage", "--law", "bernoulli:0.7", "--radius", "8", "--x", "3,0",
        "--horizon", "40", "--seed", "9", "--check-oracle", "--out", str(out2),
    ) == 0
    rep = json.loads((out2 / "report.json").read_text())
    assert rep["oracle_matches"] is True
    assert rep["value"] >= 3


def test_cli_replay_byte_identical(tmp_path):
    out1 = tmp_path / "run1"
    assert run_cli(
        "mu", "--law", "poisson:1.0", "--k", "4,8", "--replicas", "12",
        "--seed", "21", "--out", str(out1),
    ) == 0
    out2 = tmp_path / "run2"
    assert run_cli("replay", str(out1 / "plan.json"), "--out", str(out2)) == 0
    for name in ("plan.json", "report.json", "per_k.csv"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()


def test_cli_reports_thread_invariant(tmp_path):
    outs = []
    for threads in ("1", "3"):
        out = tmp_path / f"thr{threads}"
        assert run_cli(
            "mu", "--law", "poisson:1.0", "--k", "4,8", "--replicas", "12",
            "--seed", "21", "--threads", threads, "--out", str(out),
        ) == 0
        outs.append(out)
    # threads is an execution hint: plans and reports are byte-identical
    for name in ("plan.json", "report.json", "per_k.csv"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


def test_cli_replay_missing_plan(tmp_path):
    assert run_cli("replay", str(tmp_path / "nope.json")) == 2


def test_cli_audit_and_percolation(tmp_path):
    out = tmp_path / "audit"
    assert run_cli(
        "audit", "--law", "bernoulli:0.8", "--triples", "6", "--seed", "2",
        "--horizon", "40", "--out", str(out),
    ) == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["violations"] == 0

    out2 = tmp_path / "perc"
    assert run_cli(
        "percolation", "--p", "0.8", "--radius", "30", "--replicas", "25",
        "--targets", "10,0;0,10", "--seed", "2", "--out", str(out2),
    ) == 0
    assert (out2 / "hole_tail.csv").exists()
    assert (out2 / "chemical_ratio.csv").exists()
