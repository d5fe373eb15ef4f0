import json

import numpy as np
import pytest

from dpsir.bench.models import ModelSpec, generate_model
from dpsir.cli import main


@pytest.fixture(scope="module")
def csv_file(tmp_path_factory):
    data, _ = generate_model(ModelSpec("M1", 3000, 6, seed=1), np.random.default_rng(0))
    path = tmp_path_factory.mktemp("cli") / "d.csv"
    lines = ["x1,x2,x3,x4,x5,x6,y"] + [",".join(str(float(v)) for v in list(r) + [y]) for r, y in zip(data.X, data.y)]
    path.write_text("\n".join(lines) + "\n")
    return path


def run_json(capsys, argv):
    assert main(argv) == 0
    return json.loads(capsys.readouterr().out)


@pytest.mark.filterwarnings("ignore")
@pytest.mark.parametrize("method", ["sir", "dp-ini", "dp-sir", "dp-sini", "dp-ssir", "dp-spca"])
def test_fit_methods(capsys, csv_file, method):
    argv = ["fit", str(csv_file), "--response", "y", "--method", method, "--noise-multiplier", "0.03", "--s-prime", "3"]
    if method == "sir":
        argv += ["--k", "1"]
    out = run_json(capsys, argv)
    assert out["method"] == method and len(out["B_hat"]) == 6
    assert out["names"][0] == "x1"


@pytest.mark.filterwarnings("ignore")
def test_fit_sir_needs_k(capsys, csv_file):
    assert main(["fit", str(csv_file), "--response", "y", "--method", "sir"]) == 2
    assert "explicit --k" in capsys.readouterr().err


@pytest.mark.filterwarnings("ignore")
def test_slices_and_tune(capsys, csv_file, tmp_path):
    out = run_json(capsys, ["slices", str(csv_file), "--response", "y", "--H", "5"])
    assert out["kind"] == "continuous" and len(out["cutoffs"]) == out["H"] + 1
    assert "histogram" in out
    path = tmp_path / "t.json"
    assert main(["tune", str(csv_file), "--response", "y", "--candidates", "2,4", "--out", str(path)]) == 0
    res = json.loads(path.read_text())
    assert res["s_prime"] in (2, 4) and res["ledger"]["epsilon"] == pytest.approx(2.1)


def test_simulate_and_report(capsys, tmp_path, monkeypatch):
    cfg = {"models": [{"model": "M1", "n": 2000, "p": 5, "seed": 1}], "replications": 2, "seed": 3,
           "noise_multiplier": 0.03}
    cpath = tmp_path / "c.json"
    cpath.write_text(json.dumps(cfg))
    monkeypatch.setenv("DPSIR_WORKERS", "1")
    raw = tmp_path / "raw.json"
    out_csv = tmp_path / "r.csv"
    assert main(["simulate", str(cpath), "--json", str(raw), "--csv", str(out_csv)]) == 0
    assert out_csv.read_text().startswith("model,n,p,method")
    capsys.readouterr()
    assert main(["report", str(raw)]) == 0
    assert "DP-SIR" in capsys.readouterr().out


def test_missing_file_exit_code(capsys):
    assert main(["fit", "/nonexistent.csv", "--response", "y"]) == 2
    assert "error" in capsys.readouterr().err


def test_bad_k_argument():
    with pytest.raises(SystemExit):
        main(["fit", "x.csv", "--response", "y", "--k", "zero"])
