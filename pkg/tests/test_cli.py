import csv
import json
import math
from pathlib import Path

import numpy as np
import pytest

from effham.cli import heff_from_json, main, parse_grid
from effham.effective import evaluate, compact_effective, secular_filter
from effham.modelfile import load_model

MODELS = Path(__file__).resolve().parent.parent / "models"


def write_model(path: Path, **changes) -> Path:
    doc = json.loads((MODELS / "ac_stark.json").read_text())
    doc.update(changes)
    path.write_text(json.dumps(doc))
    return path


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float).reshape(-1, len(rows[0]))


def test_derive_ac_stark(tmp_path):
    assert main(["derive", str(MODELS / "ac_stark.json"), "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "heff.json").read_text())
    assert [t["freq"] for t in doc["terms"]] == [0.0]
    m = np.array(doc["terms"][0]["matrix"])
    shift = 0.05**2 / 4
    np.testing.assert_allclose(m[:, :, 0], np.diag([shift, -shift]), atol=1e-18)
    np.testing.assert_array_equal(m[:, :, 1], 0)
    assert (tmp_path / "summary.txt").read_text().startswith("model: ac_stark")
    assert doc["kernel"]["ok"] and doc["kernel"]["kernel_route_rel_diff"] < 0.05


def test_derive_empty_terms(tmp_path, capsys):
    model = write_model(tmp_path / "m.json", terms=[])
    assert main(["derive", str(model), "--out", str(tmp_path / "o")]) == 3
    assert "no harmonic terms" in capsys.readouterr().err


def test_derive_raman_beat_groups(tmp_path):
    doc = json.loads((MODELS / "raman.json").read_text())
    doc["parameters"]["Delta2"] = 1.2
    (tmp_path / "r.json").write_text(json.dumps(doc))
    assert main(["derive", str(tmp_path / "r.json"), "--out", str(tmp_path / "o")]) == 0
    freqs = [t["freq"] for t in json.loads((tmp_path / "o" / "heff.json").read_text())["terms"]]
    assert freqs == pytest.approx([-0.2, 0.0, 0.2])


@pytest.mark.parametrize(
    "text, where",
    [
        ('{"name": "x", ', "line 1"),
        ('{"name": "x", "space": [{"kind": "qudit", "dim": 2}], "terms": [{"op": "nosuch", "omega": 1}]}', "terms[0]"),
        ('{"name": "x", "space": [{"kind": "spin", "dim": 2}], "terms": []}', "space"),
    ],
)
def test_parse_errors(tmp_path, capsys, text, where):
    (tmp_path / "bad.json").write_text(text)
    assert main(["derive", str(tmp_path / "bad.json"), "--out", str(tmp_path / "o")]) == 2
    assert where in capsys.readouterr().err


def test_missing_file_and_bad_flags(tmp_path):
    assert main(["derive", str(tmp_path / "missing.json")]) == 2
    assert main(["nosuchcommand"]) == 2


def test_heff_round_trip(tmp_path):
    model = load_model(MODELS / "quantum_ac_stark.json")
    main(["derive", str(MODELS / "quantum_ac_stark.json"), "--out", str(tmp_path), "--secular-cutoff", "off"])
    E = heff_from_json(json.loads((tmp_path / "heff.json").read_text()))
    ref = compact_effective(model.interaction)
    for t in (0.0, 3.3, 101.0):
        assert np.max(np.abs(evaluate(E, t).matrix - evaluate(ref, t).matrix)) <= 1e-15


def test_simulate_zero_hamiltonian(tmp_path):
    model = write_model(tmp_path / "m.json", parameters={"Omega": 0.0, "Delta": 1.0})
    assert main(["simulate", str(model), "--out", str(tmp_path / "o"), "--t1", "20"]) == 0
    header, data = read_csv(tmp_path / "o" / "populations.csv")
    assert header == ["t", "p_0", "p_1"]
    np.testing.assert_array_equal(data[:, 1:], np.tile([1.0, 0.0], (len(data), 1)))


def test_simulate_raman_period(tmp_path):
    out = tmp_path / "o"
    assert main(["simulate", str(MODELS / "raman.json"), "--out", str(out), "--which", "exact", "--t1", "11000"]) == 0
    _, data = read_csv(out / "populations.csv")
    t, p2 = data[:, 0], data[:, 2]
    assert p2.max() > 0.98
    peaks = [k for k in range(1, len(p2) - 1) if p2[k] >= p2[k - 1] and p2[k] > p2[k + 1] and p2[k] > 0.9]
    assert len(peaks) == 2

    def vertex(k):
        # parabola through the three samples around the maximum
        y0, y1, y2 = p2[k - 1 : k + 2]
        return t[k] + 0.5 * (t[1] - t[0]) * (y0 - y2) / (y0 - 2 * y1 + y2)

    period = vertex(peaks[1]) - vertex(peaks[0])
    want = 2 * math.pi / (0.05**2 / 2.0)
    assert period == pytest.approx(want, rel=0.01)


def test_simulate_both_ac_stark(tmp_path):
    out = tmp_path / "o"
    assert main(["simulate", str(MODELS / "ac_stark.json"), "--out", str(out)]) == 0
    header, data = read_csv(out / "fidelity.csv")
    assert header == ["t", "fidelity"]
    assert data[-1, 1] >= 0.999
    # in between, the fast micromotion of amplitude Omega/2Delta costs up to (Omega/Delta)^2 / 2
    assert data[:, 1].min() >= 1 - 0.55 * 0.05**2
    assert (out / "populations_effective.csv").exists()


def test_simulate_step_guard(tmp_path, capsys):
    assert main(["simulate", str(MODELS / "ac_stark.json"), "--out", str(tmp_path), "--dt", "0.5"]) == 4
    assert "need dt <=" in capsys.readouterr().err


def test_catalog_unknown(tmp_path, capsys):
    assert main(["catalog", "nope", "--out", str(tmp_path)]) == 2
    assert "ac_stark, bloch_siegert, raman, quantum_ac_stark, ms_gate" in capsys.readouterr().err


def test_catalog_ac_stark(tmp_path, capsys):
    assert main(["catalog", "ac_stark", "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "ac_stark" / "report.json").read_text())
    assert report["pass"]
    assert {c["check"] for c in report["checks"]} >= {"engine_matches_expected", "differential_phase"}
    assert capsys.readouterr().out.rstrip().endswith("PASS")


def test_catalog_ms_gate(tmp_path, capsys):
    assert main(["catalog", "ms_gate", "--out", str(tmp_path)]) == 0
    assert "PASS entangled_state_fidelity" in capsys.readouterr().out


def test_catalog_override(tmp_path):
    assert main(["catalog", "ac_stark", "--out", str(tmp_path), "--set", "Delta=-1"]) == 0
    report = json.loads((tmp_path / "ac_stark" / "report.json").read_text())
    assert report["params"]["Delta"] == -1.0
    assert main(["catalog", "ac_stark", "--out", str(tmp_path), "--set", "Delta"]) == 2


def test_parse_grid():
    assert parse_grid("Omega=0.1,0.2") == ("Omega", [0.1, 0.2])
    assert parse_grid("x=0:1:3") == ("x", [0.0, 0.5, 1.0])
    assert parse_grid("x=") == ("x", [])


def test_sweep_empty_grid(tmp_path):
    assert main(["sweep", str(MODELS / "ac_stark.json"), "--out", str(tmp_path), "--param", "Omega="]) == 0
    assert (tmp_path / "sweep.csv").read_text() == "Omega,fidelity,max_leakage\n"


def test_sweep_grid_rows_and_order(tmp_path):
    args = ["sweep", str(MODELS / "ac_stark.json"), "--t1", "50", "--param", "Omega=0.01,0.1,0.3", "--param", "Delta=1,2"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    header, data = read_csv(tmp_path / "a" / "sweep.csv")
    assert header == ["Omega", "Delta", "fidelity", "max_leakage"]
    assert data.shape == (6, 4)
    np.testing.assert_array_equal(data[:, 0], [0.01, 0.01, 0.1, 0.1, 0.3, 0.3])
    # stronger drive, worse agreement
    assert data[0, 2] > data[4, 2]
    assert main(args + ["--out", str(tmp_path / "b"), "--jobs", "2", "--seed", "7"]) == 0
    assert (tmp_path / "a" / "sweep.csv").read_bytes() == (tmp_path / "b" / "sweep.csv").read_bytes()


def test_outputs_are_deterministic(tmp_path):
    for sub in ("a", "b"):
        assert main(["simulate", str(MODELS / "ac_stark.json"), "--out", str(tmp_path / sub), "--t1", "40"]) == 0
        assert main(["derive", str(MODELS / "ac_stark.json"), "--out", str(tmp_path / sub)]) == 0
    for name in ("heff.json", "populations.csv", "fidelity.csv", "populations_effective.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    text = (tmp_path / "a" / "fidelity.csv").read_text()
    assert "\r" not in text and "E" not in text


def test_secular_cutoff_flag(tmp_path):
    main(["derive", str(MODELS / "quantum_ac_stark.json"), "--out", str(tmp_path / "a")])
    main(["derive", str(MODELS / "quantum_ac_stark.json"), "--out", str(tmp_path / "b"), "--secular-cutoff", "off"])
    na = len(json.loads((tmp_path / "a" / "heff.json").read_text())["terms"])
    nb = len(json.loads((tmp_path / "b" / "heff.json").read_text())["terms"])
    assert na == 1 and nb == 5
    model = load_model(MODELS / "quantum_ac_stark.json")
    assert len(secular_filter(compact_effective(model.interaction), model.secular_cutoff).terms) == 1
