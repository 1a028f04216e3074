import json
import math
import subprocess
import sys

import pytest

from hyperdense import __version__
from hyperdense.cli import main, parse_complex, parse_complex_list

CIRCLE_B = '{"kind":"circle","params":{"center":[0,0],"radius":1}}'
CIRCLE_C = '{"kind":"circle","params":{"center":[2,0],"radius":1}}'
POINT_A = '{"kind":"point","params":{"z":[0.5,0]}}'


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, (json.loads(out) if out.strip() else None), err


def test_parse_complex():
    assert parse_complex("i") == 1j
    assert parse_complex("2-i") == 2 - 1j
    assert parse_complex("-1.5") == -1.5
    assert parse_complex("0.3+0.9j") == 0.3 + 0.9j
    assert parse_complex("(1,2)") == 1 + 2j
    assert parse_complex_list("0,1,-1") == [0, 1, -1]
    assert parse_complex_list("(0,1);2") == [1j, 2]


def test_density_disc(capsys):
    code, out, _ = run(capsys, "density", "--disc", "r=1", "--z", "0")
    assert code == 0
    assert out["density"] == 1.0 and out["method"] == "closed-form" and out["error"] == 0.0
    assert out["version"] == __version__ and out["seed"] == 0 and out["config"]["disc"] == "r=1"


def test_density_triple(capsys):
    code, out, _ = run(capsys, "density", "--triple", "0,1,-1", "--z", "i", "--rel-tol", "1e-4")
    assert code == 0 and out["method"] == "quadrature"
    assert out["density"] == pytest.approx(1 / 7.054852427224328, rel=1e-2)


def test_density_pair_and_three_point(capsys):
    code, out, _ = run(capsys, "density", "--pair", "0,1", "--z", "-1", "--rel-tol", "1e-9")
    assert code == 0 and out["density"] == pytest.approx(0.11423664526111599, rel=1e-8)
    code, out, _ = run(capsys, "density", "--disc", "r=1", "--three-point", "--z", "0")
    assert code == 0 and out["density"] <= 1 and out["info"]["lower_bound"]


def test_density_outside(capsys):
    code, out, err = run(capsys, "density", "--disc", "r=1", "--z", "2")
    assert code == 2 and out is None and "point outside domain" in err


def test_density_bad_spec(capsys):
    code, _, err = run(capsys, "density", "--disc", "radius=1", "--z", "0")
    assert code == 2 and "unknown disc keys" in err
    code, _, _ = run(capsys, "density", "--triple", "0,1", "--z", "i")
    assert code == 2
    with pytest.raises(SystemExit) as exc:
        main(["density", "--disc", "r=1"])
    assert exc.value.code == 2


def test_density_budget_exit(capsys):
    code, out, err = run(capsys, "density", "--triple", "0,1,-1", "--z", "i", "--budget", "1000")
    assert code == 3 and out["info"]["converged"] is False and "budget" in err


@pytest.mark.parametrize(
    "a,b,H,d",
    [(POINT_A, CIRCLE_B, 1.5, 0.5), (POINT_A, CIRCLE_C, 2.5, 0.5), (CIRCLE_B, CIRCLE_C, 2.0, 0.0), (CIRCLE_B, CIRCLE_B, 0.0, 0.0)],
)
def test_hausdorff_fixtures(capsys, a, b, H, d):
    code, out, _ = run(capsys, "hausdorff", "--a", a, "--b", b)
    assert code == 0
    assert out["H"] == pytest.approx(H, abs=1e-12) and out["d"] == pytest.approx(d, abs=1e-12)


def test_hausdorff_mixed_cloud(capsys):
    pts = [[math.cos(2 * math.pi * k / 32), math.sin(2 * math.pi * k / 32)] for k in range(32)]
    cloud = json.dumps({"kind": "cloud", "params": {"points": pts}})
    code, out, _ = run(capsys, "hausdorff", "--a", cloud, "--b", CIRCLE_B)
    assert code == 0
    assert out["H"] == pytest.approx(2 * math.sin(math.pi / 64), abs=1e-6)
    assert out["H"] <= out["tolerance"]


def test_converge_default_schedule(capsys, tmp_path):
    csv_path = tmp_path / "s.csv"
    code, out, _ = run(capsys, "converge", "--family", "scaled-disc", "--csv", str(csv_path))
    assert code == 0
    rows = csv_path.read_text().splitlines()
    assert [float(r.split(",")[0]) for r in rows[1:]] == [2.0**-k for k in range(3, 10)]
    assert out["best_model"] == "eps"


def test_converge_moving_puncture_fixture(capsys):
    code, out, _ = run(capsys, "converge", "--family", "moving-puncture")
    assert code == 0
    gaps = [r["gap"] for r in out["table"]["rows"]]
    baseline = [0.0024771910001509953, 0.001281234323171558, 0.00065181958382351221, 0.00032878241049905908,
                0.00016511864111652982, 8.2742357786796015e-5, 4.141708663575399e-5]
    for g, b in zip(gaps, baseline):
        assert g == pytest.approx(b, rel=1e-2)


def test_converge_empty_schedule(capsys):
    code, _, err = run(capsys, "converge", "--family", "scaled-disc", "--schedule", "")
    assert code != 0 and "empty" in err


def test_converge_partial_rows(capsys):
    code, out, _ = run(capsys, "converge", "--family", "scaled-disc", "--schedule", "0.9,0.1,0.05,0.02,0.01")
    assert code == 3 and out["table"]["complete"] is False


def test_teich(capsys, tmp_path):
    code, out, _ = run(capsys, "teich", "--disc", "r=1", "--h", "0.125", "--field-out", str(tmp_path / "f.bin"),
                       "--field-csv", str(tmp_path / "f.csv"))
    assert code == 0 and out["half_rho"] == 0.5
    assert 0.5 * 0.85 <= out["value"] <= 0.5 * 1.15
    assert (tmp_path / "f.bin").stat().st_size > 0
    code, out2, _ = run(capsys, "teich", "--disc", "r=2", "--h", "0.25")
    assert out2["value"] == pytest.approx(out["value"] / 2, rel=1e-3)
    code, _, err = run(capsys, "teich", "--disc", "r=1", "--h", "0")
    assert code == 2


def test_cutoff(capsys, tmp_path):
    code, out, _ = run(capsys, "cutoff", "--eps", "0.01", "--x", "0.01,0.36787944117144233,1")
    assert code == 0 and out["j"] == [0.0, 1.0, 1.0]
    p = tmp_path / "chi.csv"
    code, out, _ = run(capsys, "cutoff", "--eps", "0.01", "--disc", "r=1", "--z", "0,0.995", "--csv", str(p))
    assert out["chi"] == [1.0, 0.0]
    assert p.read_text().splitlines()[0] == "x,y,chi"
    code, _, _ = run(capsys, "cutoff", "--eps", "0.5", "--x", "0.1")
    assert code == 2


def test_threads_env(capsys, monkeypatch):
    monkeypatch.setenv("HYPERDENSE_THREADS", "zero")
    code, _, err = run(capsys, "density", "--disc", "r=1", "--z", "0")
    assert code == 2 and "HYPERDENSE_THREADS" in err
    monkeypatch.setenv("HYPERDENSE_THREADS", "4")
    _, a, _ = run(capsys, "density", "--disc", "r=1", "--z", "0.5")
    monkeypatch.setenv("HYPERDENSE_THREADS", "1")
    _, b, _ = run(capsys, "density", "--disc", "r=1", "--z", "0.5")
    assert a == b


def test_module_entry_point():
    out = subprocess.run(
        [sys.executable, "-m", "hyperdense.cli", "density", "--disc", "r=2", "--z", "0"],
        capture_output=True, text=True, check=True,
    )
    doc = json.loads(out.stdout)
    assert doc["density"] == 0.5
    # compact when stdout is not a terminal
    assert "\n" not in out.stdout.strip()
