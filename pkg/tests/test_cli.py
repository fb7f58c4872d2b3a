import json

import pytest

from app.cli.main import main
from app.spidercert.data_access import load_graph


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, out


def result(out):
    return json.loads(out)


def test_spider_check(capsys):
    code, out = run(capsys, "spider-check", "--k", "9", "--ell", "2", "--no-meta")
    assert code == 0
    rep = result(out)
    assert rep["passed"]
    assert rep["inner"][0] == pytest.approx(1.875)


def test_spider_check_dump(capsys, tmp_path):
    code, _ = run(capsys, "spider-check", "--k", "3", "--ell", "1", "--dump", str(tmp_path / "s"))
    assert code == 0
    assert (tmp_path / "s.json").exists()
    assert (tmp_path / "s.npy").exists()


def test_output_is_deterministic(capsys, data_dir):
    argv = ["certify", "--input", str(data_dir / "triangle.json"), "--k", "3", "--ell", "1", "--no-meta"]
    first = run(capsys, *argv)
    second = run(capsys, *argv)
    assert first == second
    assert first[0] == 0


def test_metadata_block(capsys):
    code, out = run(capsys, "spider-check", "--k", "3", "--ell", "1")
    body = result(out)
    assert code == 0
    assert set(body) == {"result", "meta"}
    assert body["meta"]["argv"] == ["spider-check", "--k", "3", "--ell", "1"]


def test_certify_k256(capsys, data_dir):
    code, out = run(capsys, "certify", "--input", str(data_dir / "k256.json"), "--epsilon", "0.04", "--no-meta")
    assert code == 0
    cert = result(out)
    assert cert["R"] == 781251
    assert cert["bound_obj"] <= 0.55
    assert cert["bound_obj_sharp"] <= 0.531
    assert cert["parameters"]["k"] == 390625


def test_certify_with_verification(capsys, data_dir):
    code, out = run(capsys, "certify", "--input", str(data_dir / "triangle.json"), "--k", "3", "--ell", "1",
                    "--kind", "2xor", "--verify", "exhaustive", "--no-meta")
    assert code == 0
    assert result(out)["verification"]["passed"]


def test_certify_premise_failure_is_usage_error(capsys, data_dir):
    code = main(["certify", "--input", str(data_dir / "triangle.json"), "--kind", "2xor", "--epsilon", "0.5"])
    assert code == 2
    assert "spectral premise" in capsys.readouterr().err


@pytest.mark.parametrize(
    "argv",
    [
        ["certify", "--k", "3", "--ell", "1"],
        ["certify", "--input", "data/edge.json", "--model", "complete", "--n", "4", "--k", "3", "--ell", "1"],
        ["certify", "--input", "missing.json", "--k", "3", "--ell", "1"],
        ["bench"],
        ["bench", "--config", "data/experiment.json", "--sweep", "4"],
        ["refute-csp", "--model", "csp", "--n", "5", "--predicate", "0110"],
        ["no-such-command"],
    ],
)
def test_usage_errors(capsys, argv):
    assert main(argv) == 2
    capsys.readouterr()


def test_verify_cert_round_trip(capsys, data_dir, tmp_path):
    cert_path = tmp_path / "cert.json"
    triangle = str(data_dir / "triangle.json")
    assert main(["certify", "--input", triangle, "--k", "3", "--ell", "1", "--output", str(cert_path)]) == 0
    code, out = run(capsys, "verify-cert", "--input", triangle, "--certificate", str(cert_path), "--no-meta")
    assert code == 0
    names = {c["name"]: c["status"] for c in result(out)["checks"]}
    assert names["stored_beta_closed"] == "pass"
    assert names["stored_beta_sharp"] == "pass"
    assert names["aggregation"] == "pass"


def test_verify_cert_detects_tampering(capsys, data_dir, tmp_path):
    cert_path = tmp_path / "cert.json"
    triangle = str(data_dir / "triangle.json")
    assert main(["certify", "--input", triangle, "--k", "3", "--ell", "1", "--no-meta",
                 "--output", str(cert_path)]) == 0
    body = json.loads(cert_path.read_text())
    body["beta_sharp"] *= 0.5
    cert_path.write_text(json.dumps(body))
    code, out = run(capsys, "verify-cert", "--input", triangle, "--certificate", str(cert_path), "--no-meta")
    assert code == 1
    assert not result(out)["passed"]


def test_gen_writes_loadable_graph(capsys, tmp_path):
    path = tmp_path / "g.json"
    assert main(["gen", "--model", "gnp", "--n", "12", "--degree", "3", "--seed", "4", "--output", str(path)]) == 0
    G = load_graph(path)
    assert G.n <= 12


def test_lowerbound(capsys, data_dir):
    code, out = run(capsys, "lowerbound", "--input", str(data_dir / "edge.json"), "--rounds", "1", "--no-meta")
    assert code == 0
    rep = result(out)
    assert rep["meets_guarantee"]
    assert rep["value"] == pytest.approx(0.5641, abs=1e-4)


def test_lowerbound_failure_exit_code(capsys, tmp_path):
    star = tmp_path / "star.json"
    star.write_text(json.dumps({"n": 8, "edges": [[0, i, 1, -1] for i in range(1, 8)]}))
    code, out = run(capsys, "lowerbound", "--input", str(star), "--subset-size", "8", "--no-meta")
    assert code == 1
    assert result(out)["embeddability"]["dominance"] == "fail"


def test_refute_xor_generated(capsys):
    code, out = run(capsys, "refute-xor", "--model", "xor", "--n", "6", "--arity", "4", "--p", "0.5",
                    "--k", "3", "--ell", "1", "--no-meta")
    assert code == 0
    rep = result(out)
    assert rep["reduction"] == "flatten"
    assert rep["n_flat"] == 36


def test_refute_csp_generated(capsys):
    code, out = run(capsys, "refute-csp", "--model", "csp", "--n", "6", "--arity", "3", "--predicate", "10000000",
                    "--m", "60", "--epsilon", "0.5", "--k", "3", "--ell", "1", "--no-meta")
    assert code == 0
    rep = result(out)
    assert rep["mean_P"] == "1/8"
    assert 0 < rep["bound"] <= 1


def test_bench_config_csv(capsys, data_dir):
    code, out = run(capsys, "bench", "--config", str(data_dir / "experiment.json"), "--format", "csv")
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0].startswith("name,generator,n,seed,kind")
    assert len(lines) == 4


def test_bench_sweep(capsys):
    code, out = run(capsys, "bench", "--sweep", "8", "--no-meta")
    assert code == 0
    assert result(out)["count"] == 8


def test_selftest(capsys):
    code, out = run(capsys, "selftest", "--no-meta")
    assert code == 0
    rep = result(out)
    assert rep["passed"]
    assert {r["suite"] for r in rep["results"]} == {"spider", "aggregation", "f", "lower-bound", "brute"}
