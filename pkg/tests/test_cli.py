import json

import numpy as np
import pytest

from irtmpt import ModelDims, param_count, write_params
from irtmpt.cli import main
from irtmpt.fileio import load_json
from irtmpt.params import from_canonical_coords

from conftest import random_canonical_params


@pytest.fixture()
def params_file(tmp_path):
    params = random_canonical_params(np.random.default_rng(51), 2, 3)
    path = str(tmp_path / "params.json")
    write_params(path, params)
    return path


@pytest.fixture()
def bundle_file(tmp_path):
    path = str(tmp_path / "pair.json")
    code = main(["generate", "--T", "2", "--K", "3", "--case", "theta6-zero",
                 "--seed", "1", "-o", path])
    assert code == 0
    return path


def test_generate_writes_verified_bundle(bundle_file, capsys):
    obj = load_json(bundle_file)
    assert obj["verification"]["max_dist_distribution"] <= 1e-12
    assert obj["verification"]["max_dist_params"] >= 1e-3
    assert obj["case"] == "theta6-zero"
    assert set(obj) >= {"omega", "omega_prime_table", "eta", "xi"}


def test_generate_is_byte_deterministic(tmp_path):
    out1, out2 = str(tmp_path / "a.json"), str(tmp_path / "b.json")
    assert main(["generate", "--T", "3", "--K", "3", "--case", "both-zero",
                 "--seed", "4", "-o", out1]) == 0
    assert main(["generate", "--T", "3", "--K", "3", "--case", "both-zero",
                 "--seed", "4", "-o", out2]) == 0
    assert open(out1, "rb").read() == open(out2, "rb").read()


def test_generate_rejects_neither(tmp_path):
    with pytest.raises(SystemExit) as err:
        main(["generate", "--T", "2", "--K", "3", "--case", "neither",
              "--seed", "1", "-o", str(tmp_path / "x.json")])
    assert err.value.code == 64


def test_generate_requires_seed(tmp_path):
    with pytest.raises(SystemExit) as err:
        main(["generate", "--T", "2", "--K", "3", "--case", "both-zero",
              "-o", str(tmp_path / "x.json")])
    assert err.value.code == 64


def test_distribution_csv_output(tmp_path, capsys):
    dims = ModelDims(2, 3)
    params = from_canonical_coords(np.zeros(param_count(dims)), dims)
    path = str(tmp_path / "half.json")
    write_params(path, params)
    out = str(tmp_path / "dist.csv")
    assert main(["distribution", path, "-o", out]) == 0
    lines = open(out).read().strip().split("\n")
    assert len(lines) == 1 + 6
    row = [float(v) for v in lines[1].split(",")[2:]]
    np.testing.assert_allclose(
        row, [0.015625, 0.0625, 0.0625, 0.015625, 0.21875, 0.03125, 0.09375, 0.5],
        atol=1e-16,
    )


def test_distribution_malformed_json(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["distribution", str(bad)]) == 65
    assert "line" in capsys.readouterr().err


def test_verify_accepts_generated_bundle(bundle_file, capsys):
    assert main(["verify", bundle_file]) == 0
    assert "equivalent" in capsys.readouterr().out


def test_verify_flags_perturbed_psi5(bundle_file, tmp_path, capsys):
    obj = json.loads(open(bundle_file).read())
    obj["omega_prime_table"]["psi5"][0][0] += 0.01
    tampered = tmp_path / "tampered.json"
    tampered.write_text(json.dumps(obj))
    assert main(["verify", str(tampered)]) == 1
    out = capsys.readouterr().out
    assert "psi5_odds" in out and "FAIL" in out
    for name in ("psi1", "psi4_psi6", "psi2_psi3", "psi3_ratio",
                 "psi6_psi8", "psi7_psi8_ratio"):
        assert f"relation {name}: max discrepancy" in out
        line = [ln for ln in out.splitlines() if ln.startswith(f"relation {name}:")][0]
        assert "[ok]" in line


def test_verify_zero_tolerance_fails_on_noise(bundle_file):
    assert main(["verify", bundle_file, "--tol", "0"]) == 1


def test_rank_generic_and_deficient(params_file, bundle_file, tmp_path, capsys):
    assert main(["rank", params_file]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["deficiency"] == 0
    assert report["rank"] == report["param_count"] == 26

    both = str(tmp_path / "both.json")
    assert main(["generate", "--T", "3", "--K", "4", "--case", "both-zero",
                 "--seed", "2", "-o", both]) == 0
    capsys.readouterr()
    omega = json.loads(open(both).read())["omega"]
    omega_path = tmp_path / "omega.json"
    omega_path.write_text(json.dumps(omega))
    assert main(["rank", str(omega_path)]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["deficiency"] >= 1


def test_rank_cutoff_sensitivity(params_file, capsys):
    assert main(["rank", params_file, "--cutoff", "0.5"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["rank"] < report["param_count"]


def test_simulate_loglik_pipeline(bundle_file, tmp_path, capsys):
    obj = json.loads(open(bundle_file).read())
    omega_path = tmp_path / "omega.json"
    omega_path.write_text(json.dumps(obj["omega"]))
    counts = str(tmp_path / "counts.csv")
    assert main(["simulate", str(omega_path), "--n", "1000", "--seed", "6",
                 "-o", counts]) == 0
    capsys.readouterr()

    assert main(["loglik", str(omega_path), counts]) == 0
    ll_omega = float(capsys.readouterr().out.strip())
    assert main(["loglik", bundle_file, counts, "--member", "omega-prime"]) == 0
    ll_prime = float(capsys.readouterr().out.strip())
    assert abs(ll_omega - ll_prime) <= 1e-9

    # bundle without --member is a data error
    assert main(["loglik", bundle_file, counts]) == 65


def test_simulate_deterministic_bytes(params_file, tmp_path):
    a, b, c = (str(tmp_path / n) for n in ("a.csv", "b.csv", "c.csv"))
    for out, workers in ((a, "1"), (b, "1"), (c, "4")):
        assert main(["simulate", params_file, "--n", "20", "--seed", "3",
                     "-o", out, "--workers", workers]) == 0
    assert open(a, "rb").read() == open(b, "rb").read() == open(c, "rb").read()


def test_simulate_single_draw_rows(params_file, tmp_path):
    out = str(tmp_path / "one.csv")
    assert main(["simulate", params_file, "--n", "1", "--seed", "5", "-o", out]) == 0
    for line in open(out).read().strip().split("\n")[1:]:
        counts = [int(v) for v in line.split(",")[2:]]
        assert sum(counts) == 1


def test_loglik_dimension_mismatch(params_file, tmp_path, capsys):
    other = random_canonical_params(np.random.default_rng(52), 3, 3)
    other_path = str(tmp_path / "other.json")
    write_params(other_path, other)
    counts = str(tmp_path / "counts.csv")
    assert main(["simulate", params_file, "--n", "5", "--seed", "1", "-o", counts]) == 0
    assert main(["loglik", other_path, counts]) == 65


def test_classify_and_report(params_file, bundle_file, tmp_path, capsys):
    assert main(["classify", params_file]) == 0
    assert capsys.readouterr().out.strip() == "neither"

    obj = json.loads(open(bundle_file).read())
    omega_path = tmp_path / "omega.json"
    omega_path.write_text(json.dumps(obj["omega"]))
    report_path = str(tmp_path / "report.json")
    assert main(["classify", str(omega_path), "--report", report_path]) == 0
    out = capsys.readouterr().out
    assert out.splitlines()[0] == "theta6-zero"
    report = load_json(report_path)
    assert report["case"] == "theta6-zero"
    assert report["partner"]["found"]


def test_distribution_reemit_identical(tmp_path, params_file):
    out1 = str(tmp_path / "d1.csv")
    out2 = str(tmp_path / "d2.csv")
    assert main(["distribution", params_file, "-o", out1]) == 0
    assert main(["distribution", params_file, "-o", out2]) == 0
    assert open(out1, "rb").read() == open(out2, "rb").read()
