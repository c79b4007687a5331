import json
import os
import subprocess
import sys

import pytest

from tensorbounds.cli import EXIT_BUDGET, EXIT_DOMAIN, EXIT_OK, EXIT_USAGE, run


def _run(*argv):
    return run([str(a) for a in argv])


def test_tensor_build(tmp_path):
    out = tmp_path / "m2.json"
    assert _run("tensor", "build", "--family", "matmul", "--params", "2,2,2", "-o", out) == EXIT_OK
    obj = json.loads(out.read_text())
    assert obj["dims"] == [4, 4, 4]
    assert len(obj["entries"]) == 8 and {e[3] for e in obj["entries"]} == {"1"}


def test_koszul_from_file_and_verify(tmp_path, capsys):
    m3 = tmp_path / "m3.json"
    cert = tmp_path / "cert.json"
    assert _run("tensor", "build", "--family", "matmul", "--params", "3,3,3", "-o", m3) == EXIT_OK
    assert _run("bounds", "koszul", "--tensor", m3, "--p", 2, "--strategy", "coordinate", "-o", cert) == EXIT_OK
    assert json.loads(cert.read_text())["certificate"]["bound"] == 15
    capsys.readouterr()
    assert _run("bounds", "verify", "--cert", cert, "--json") == EXIT_OK
    assert json.loads(capsys.readouterr().out)["valid"] is True


@pytest.mark.parametrize("method,extra", [
    ("flattening", []),
    ("commutator", []),
    ("koszul", ["--p", "1"]),
    ("best", []),
])
@pytest.mark.parametrize("family,params", [("matmul", "2,2,2"), ("cw", "3"), ("unit", "3")])
def test_every_certificate_round_trips(tmp_path, method, extra, family, params):
    cert = tmp_path / "c.json"
    code = _run("bounds", method, "--family", family, "--params", params, *extra, "-o", cert)
    assert code == EXIT_OK
    assert _run("bounds", "verify", "--cert", cert) == EXIT_OK


def test_tampered_certificate_fails(tmp_path):
    cert = tmp_path / "c.json"
    _run("bounds", "flattening", "--family", "unit", "--params", "3", "-o", cert)
    obj = json.loads(cert.read_text())
    obj["certificate"]["bound"] = 4
    cert.write_text(json.dumps(obj))
    assert _run("bounds", "verify", "--cert", cert) == EXIT_DOMAIN


def test_usage_errors(capsys):
    assert _run("nonsense") == EXIT_USAGE
    assert _run("bounds", "koszul", "--family", "unit", "--params", "3") == EXIT_USAGE
    assert _run("tensor", "build") == EXIT_USAGE
    assert _run() == EXIT_USAGE
    err = capsys.readouterr().err.strip().splitlines()[-1]
    assert json.loads(err)["error"] == "usage"


def test_domain_error_json(capsys):
    assert _run("symmetry", "dim", "--family", "matmul", "--params", "0,1,1") == EXIT_DOMAIN
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "ValueError"
    assert _run("symmetry", "report", "--family", "matmul", "--params", "2,2,2") == EXIT_DOMAIN


def test_budget_exit_code():
    code = _run("apolarity", "test", "--family", "matmul", "--params", "2,2,2", "-r", 6,
                "--borel", "symmetry", "--budget", 0.5)
    assert code == EXIT_BUDGET


def test_budget_env_var(tmp_path):
    env = dict(os.environ, TENSORBOUNDS_BUDGET="0.5")
    proc = subprocess.run(
        [sys.executable, "-m", "tensorbounds.cli", "apolarity", "test", "--family", "matmul",
         "--params", "2,2,2", "-r", "6", "--borel", "symmetry"],
        env=env, capture_output=True, text=True, cwd=tmp_path,
    )
    assert proc.returncode == EXIT_BUDGET


def test_mm_run_json(capsys):
    assert _run("mm", "run", "--alg", "strassen", "--size", 64, "--cutoff", 1, "--json") == EXIT_OK
    obj = json.loads(capsys.readouterr().out)
    assert obj["mults"] == str(7 ** 6)
    assert obj["correct"] is True
    assert abs(obj["exponent_fit"] - 2.807354922) < 1e-6


def test_mm_user_algorithm(tmp_path, capsys):
    from tensorbounds.decomposition import classical_decomposition

    path = tmp_path / "D.json"
    path.write_text(json.dumps(classical_decomposition(2, 3, 2).to_json_obj()))
    assert _run("mm", "run", "--alg", f"file:{path}", "--size", 12, "--json") == EXIT_OK
    assert json.loads(capsys.readouterr().out)["correct"] is True


def test_symmetry_and_decompose(tmp_path, capsys):
    basis = tmp_path / "basis.json"
    assert _run("symmetry", "dim", "--family", "cw", "--params", 3, "--basis", basis) == EXIT_OK
    obj = json.loads(basis.read_text())
    assert obj["dim_g"] == 4 and len(obj["triples"]) == obj["dim_tilde"]
    trace = tmp_path / "trace.json"
    assert _run("decompose", "als", "--family", "unit", "--params", 2, "-r", 2, "--seed", 1,
                "--restarts", 2, "--json", trace) == EXIT_OK
    tr = json.loads(trace.read_text())
    assert tr["outcome"] == "converged"
    dec = tmp_path / "dec.json"
    dec.write_text(json.dumps(tr["decomposition"]))
    assert _run("decompose", "verify", "--family", "unit", "--params", 2, "--decomposition", dec) == EXIT_OK


def _manifest(tmp_path):
    jobs = [
        {"name": "flat", "argv": ["bounds", "flattening", "--family", "matmul", "--params", "2,2,2"], "expect": 4},
        {"name": "als", "argv": ["decompose", "als", "--family", "unit", "--params", "3", "-r", "3",
                                 "--max-iters", "200", "--restarts", "2", "--histories"]},
        {"name": "mm", "argv": ["mm", "run", "--size", "16"], "expect": str(7 ** 4)},
        {"name": "apol", "argv": ["apolarity", "test", "--family", "unit", "--params", "2", "-r", "2"],
         "expect": "feasible"},
    ]
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps({"seed": 11, "workers": 2, "jobs": jobs}))
    return path


def test_batch_replay_is_byte_identical(tmp_path):
    path = _manifest(tmp_path)
    assert _run("batch", "--manifest", path, "--out", tmp_path / "one") == EXIT_OK
    assert _run("batch", "--manifest", path, "--out", tmp_path / "two", "--workers", 1) == EXIT_OK
    names = sorted(p.name for p in (tmp_path / "one").iterdir())
    assert names == ["als.json", "apol.json", "flat.json", "mm.json", "summary.json"]
    for name in names:
        assert (tmp_path / "one" / name).read_bytes() == (tmp_path / "two" / name).read_bytes()
    summary = json.loads((tmp_path / "one" / "summary.json").read_text())
    assert all(row.get("pass", True) for row in summary["jobs"])
    assert summary["seed"] == 11


def test_artifacts_carry_provenance(tmp_path):
    out = tmp_path / "a.json"
    _run("bounds", "flattening", "--family", "unit", "--params", 2, "-o", out)
    prov = json.loads(out.read_text())["provenance"]
    assert prov["version"] and prov["inputs"]["tensor"].startswith("sha256:")
    assert "time" not in json.dumps(prov)


def test_reference_manifest_jobs_parse():
    from pathlib import Path

    from tensorbounds.cli import build_parser

    path = Path(__file__).resolve().parent.parent / "manifests" / "reference_numbers.json"
    manifest = json.loads(path.read_text())
    parser = build_parser()
    for job in manifest["jobs"]:
        args = parser.parse_args(job["argv"] + ["--seed", "0"])
        assert hasattr(args, "func"), job["name"]
