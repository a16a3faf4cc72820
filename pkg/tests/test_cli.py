"""Command-line interface: exit codes, formats, and determinism."""

import json

import numpy as np
import pytest

from twosheet.cli import main

FLAT = """{
  "dimension": 2,
  "metric": {"kind": "minkowski"},
  "mass": {"kind": "constant", "re": 1.0, "im": 0.0},
  "domain": {"box": [[-5.0, 5.0], [-5.0, 5.0]]}
}"""


@pytest.fixture
def flat_model(tmp_path):
    path = tmp_path / "flat.json"
    path.write_text(FLAT)
    return str(path)


def run(capsys, *argv):
    code = main(list(argv))
    cap = capsys.readouterr()
    return code, cap.out, cap.err


# ---------------------------------------------------------------------------
# decide


def test_decide_reports_twelve_digit_slack(flat_model, capsys):
    code, out, err = run(capsys, "decide", "--model", flat_model,
                         "--p", "0,0", "--xi", "0", "--q", "2,0", "--phi", "1")
    assert code == 0 and err == ""
    doc = json.loads(out)
    assert doc["related"] is True
    assert doc["base_related"] is True
    assert doc["method"] == "closed"
    assert doc["slack"] == pytest.approx(2 - np.pi / 2, abs=1e-12)
    assert format(doc["slack"], ".12g") in out  # printed at 12 significant digits
    assert doc["marginal"] is False


def test_decide_accepts_equals_form_for_negative_points(flat_model, capsys):
    code, out, _ = run(capsys, "decide", "--model", flat_model,
                       "--p=-1,0", "--xi", "0.2", "--q=-0.5,0.2", "--phi", "0.2")
    assert code == 0
    assert json.loads(out)["related"] is True


def test_decide_not_related_still_exits_zero(flat_model, capsys):
    code, out, _ = run(capsys, "decide", "--model", flat_model,
                       "--p", "0,0", "--xi", "0", "--q", "1,0", "--phi", "1")
    assert code == 0
    doc = json.loads(out)
    assert doc["related"] is False and doc["slack"] < 0


def test_decide_band_override(flat_model, capsys):
    code, out, _ = run(capsys, "decide", "--model", flat_model, "--band", "0.5",
                       "--p", "0,0", "--xi", "0", "--q", "2,0", "--phi", "1")
    assert code == 0
    doc = json.loads(out)
    assert doc["marginal"] is True and doc["band"] == 0.5


def test_decide_outside_domain_exits_one(flat_model, capsys):
    code, out, err = run(capsys, "decide", "--model", flat_model,
                         "--p", "0,0", "--xi", "0", "--q", "9,0", "--phi", "1")
    assert code == 1
    assert out == "" and err != ""


def test_decide_is_byte_deterministic(flat_model, capsys):
    args = ("decide", "--model", flat_model,
            "--p", "0.1,0.2", "--xi", "0.3", "--q", "1.7,-0.4", "--phi", "0.9")
    _, first, _ = run(capsys, *args)
    _, second, _ = run(capsys, *args)
    assert first == second


# ---------------------------------------------------------------------------
# distance / dump-model


def test_distance_prints_bare_number(flat_model, capsys):
    code, out, _ = run(capsys, "distance", "--model", flat_model,
                       "--p", "0,0", "--q", "2,0")
    assert code == 0
    assert out.strip() == "2"


def test_distance_not_related_exits_one(flat_model, capsys):
    code, _, err = run(capsys, "distance", "--model", flat_model,
                       "--p", "0,0", "--q", "0,2")
    assert code == 1 and err != ""


def test_dump_model_round_trips(flat_model, capsys, tmp_path):
    code, out, _ = run(capsys, "decide", "--model", flat_model, "--dump-model",
                       "--p", "0,0", "--xi", "0", "--q", "2,0", "--phi", "1")
    assert code == 0
    second = tmp_path / "canon.json"
    second.write_text(out)
    code, out2, _ = run(capsys, "decide", "--model", str(second), "--dump-model",
                        "--p", "0,0", "--xi", "0", "--q", "2,0", "--phi", "1")
    assert code == 0
    assert out2 == out


def test_bad_model_file_exits_one(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(FLAT.replace("minkowski", "euclidean"))
    code, out, err = run(capsys, "decide", "--model", str(bad),
                         "--p", "0,0", "--xi", "0", "--q", "1,0", "--phi", "0")
    assert code == 1
    assert "metric.kind" in err


def test_missing_argument_exits_one(flat_model, capsys):
    code, _, err = run(capsys, "decide", "--model", flat_model,
                       "--p", "0,0", "--xi", "0", "--q", "1,0")
    assert code == 1 and "usage" in err.lower()


# ---------------------------------------------------------------------------
# cone


def test_cone_csv_structure(tmp_path, capsys):
    model = tmp_path / "cone.json"
    model.write_text(FLAT.replace("[[-5.0, 5.0], [-5.0, 5.0]]",
                                  "[[0.0, 2.0], [-2.0, 2.0]]"))
    out_file = tmp_path / "surface.csv"
    code, out, _ = run(capsys, "cone", "--model", str(model), "--p", "0,0",
                       "--xi", "0", "--grid", "21x21", "--out", str(out_file))
    assert code == 0
    lines = out_file.read_text().splitlines()
    assert lines[0] == "t,x,phi_max,reachable"
    assert len(lines) == 1 + 21 * 21
    rows = [ln.split(",") for ln in lines[1:]]
    by_point = {(float(r[0]), float(r[1])): r for r in rows}
    on_axis = by_point[(2.0, 0.0)]
    assert float(on_axis[2]) == pytest.approx(1.0)  # beyond the half-pi budget
    assert on_axis[3] == "1"
    outside = by_point[(0.0, 2.0)]
    assert outside[2] == "nan" and outside[3] == "0"
    null_edge = by_point[(2.0, 2.0)]
    assert float(null_edge[2]) == pytest.approx(0.0, abs=1e-12)  # xi carried along


def test_cone_rejects_bad_grid(flat_model, capsys):
    code, _, err = run(capsys, "cone", "--model", flat_model, "--p", "0,0",
                       "--xi", "0", "--grid", "5by5")
    assert code == 1 and err != ""


# ---------------------------------------------------------------------------
# witness


def curve_csv(tmp_path):
    ts = np.linspace(0.0, 1.0, 33)
    path = tmp_path / "curve.csv"
    rows = ["t,x0,x1"] + [f"{t},{t},{0.1 * t}" for t in ts]
    path.write_text("\n".join(rows) + "\n")
    return str(path)


def test_witness_certifies_and_writes_artifacts(flat_model, tmp_path, capsys):
    curve = curve_csv(tmp_path)
    samples = tmp_path / "samples.csv"
    report_file = tmp_path / "report.json"
    code, out, _ = run(capsys, "witness", "--model", flat_model, "--curve", curve,
                       "--xi", "0", "--phi", "1", "--radius", "0.1",
                       "--out", str(samples), "--report", str(report_file))
    assert code == 0
    report = json.loads(report_file.read_text())
    assert report["certified"] is True
    assert report["separation"] < 0
    assert report["tube_min_eigenvalue"] >= -1e-9
    header = samples.read_text().splitlines()[0]
    assert header == "t,x0,x1,a,b,theta"
    assert len(samples.read_text().splitlines()) == 1 + 33


def test_witness_rejects_equal_states(flat_model, tmp_path, capsys):
    curve = curve_csv(tmp_path)
    code, _, err = run(capsys, "witness", "--model", flat_model, "--curve", curve,
                       "--xi", "0.5", "--phi", "0.5")
    assert code == 1 and err != ""


def test_witness_rejects_malformed_curve(flat_model, tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n0,0\n1,0\n")
    code, _, err = run(capsys, "witness", "--model", flat_model, "--curve", str(bad),
                       "--xi", "0", "--phi", "1")
    assert code == 1 and "header" in err


# ---------------------------------------------------------------------------
# oracle / selftest


def test_oracle_summary_is_deterministic(flat_model, capsys):
    args = ("oracle", "--model", flat_model, "--pairs", "6", "--elements", "8",
            "--seed", "3")
    code1, first, _ = run(capsys, *args)
    code2, second, _ = run(capsys, *args)
    assert code1 == code2 == 0
    assert first == second
    doc = json.loads(first)
    assert doc["pairs"] == 6
    assert doc["consistent"] is True
    assert doc["kinds"]["contradiction"] == 0
    assert sum(doc["kinds"].values()) == 6


def test_selftest_passes(capsys):
    code, out, _ = run(capsys, "selftest", "--draws", "50")
    assert code == 0
    lines = [ln for ln in out.splitlines() if ln]
    assert all(ln.startswith("ok") for ln in lines)
    assert len(lines) >= 6


def test_unknown_subcommand_exits_one(capsys):
    code, _, err = run(capsys, "frobnicate")
    assert code == 1 and err != ""
