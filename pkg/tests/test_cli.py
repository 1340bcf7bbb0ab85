import json

import pytest

from plavoid.cli import DEMOS, EXIT_CERTIFICATION, EXIT_PASS, EXIT_PRECONDITION, certify, demo_config, fixture_path, main, run
from plavoid.io import dumps, load_json

SEGMENT = {"vertices": [["0"], ["1"]], "simplices": [[0, 1]]}
CROSSING = {"complex": SEGMENT, "values": [["-1", "0"], ["1", "0"]]}


@pytest.mark.parametrize("name,code", [("torus", EXIT_PASS), ("mobius", EXIT_PASS), ("circle", EXIT_PASS),
                                       ("square", EXIT_PASS), ("interval", EXIT_PRECONDITION)])
def test_demo_exit_codes(name, code):
    report, _, got = run(demo_config(name))
    assert got == code == report["exit_code"]
    if code == EXIT_PRECONDITION:
        assert report["diagnostics"]["error"] == "DimensionMismatch"
    else:
        assert report["status"] == "pass"


def test_torus_matches_golden_report():
    report, _, _ = run(demo_config("torus"))
    assert dumps(report) == fixture_path("torus_report.golden.json").read_text(encoding="utf-8")


def test_reports_are_byte_identical_across_runs():
    a = dumps(run(demo_config("mobius"))[0])
    b = dumps(run(demo_config("mobius"))[0])
    assert a == b
    assert "/root" not in a and "time" not in a


def test_rational_rerun_gives_same_verdicts():
    from dataclasses import replace
    for name in ("circle", "mobius", "square"):
        cfg = demo_config(name)
        fl = run(replace(cfg, arith="float"))[0]
        ra = run(replace(cfg, arith="rational"))[0]
        assert fl["status"] == ra["status"] == "pass"


def test_report_embeds_readings():
    report = run(demo_config("circle"))[0]
    assert {"budget_index", "eta_naming", "matrix_norm"} <= set(report["readings"])


def test_certify_passes_on_genuine_output():
    _, arts, _ = run(demo_config("circle"))
    doc = load_json(fixture_path(DEMOS["circle"]))
    f = {"complex": doc["complex"], "values": doc["f"]}
    out, code = certify(f, arts["g.json"], doc["eps"], doc["target"])
    assert code == EXIT_PASS, out


def test_certify_flags_map_meeting_target():
    out, code = certify(CROSSING, CROSSING, "1/10", {"kind": "origin"})
    assert code == EXIT_CERTIFICATION
    fail = out["certificates"]["clearance"]["first_failures"][0]
    assert fail["simplex"] == [0, 1] and fail["witness"]["barycentric"] == ["1/2", "1/2"]


def test_certify_names_tampered_vertex():
    g = {"values": [["-1", "0.01"], ["1", "5"]]}
    out, code = certify(CROSSING, g, "1/10", {"kind": "point", "z": [0, 0]})
    assert code == EXIT_CERTIFICATION
    assert out["certificates"]["bound"]["first_failures"][0]["witness"]["vertex"] == 1


def test_certify_carrier_mismatch():
    g = {"complex": {"vertices": [["0"], ["2"]], "simplices": [[0, 1]]}, "values": [["0", "1"], ["0", "1"]]}
    out, code = certify(CROSSING, g, "1/10", {"kind": "origin"})
    assert code == EXIT_PRECONDITION
    assert out["diagnostics"]["error"] == "CarrierMismatch"


def test_main_writes_out_dir(tmp_path, capsys):
    code = main(["demo", "mobius", "--out-dir", str(tmp_path), "--seed", "3"])
    assert code == EXIT_PASS
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["config"]["seed"] == 3
    for name in report["outputs"]:
        assert (tmp_path / name).exists()
    assert "pass" in capsys.readouterr().out


def test_main_run_and_certify_round_trip(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    doc = load_json(fixture_path(DEMOS["circle"]))
    cfg.write_text(json.dumps(doc))
    assert main(["run", str(cfg), "--out-dir", str(tmp_path / "out")]) == EXIT_PASS
    (tmp_path / "f.json").write_text(json.dumps({"complex": doc["complex"], "values": doc["f"]}))
    (tmp_path / "eps.json").write_text(json.dumps(doc["eps"]))
    (tmp_path / "t.json").write_text(json.dumps(doc["target"]))
    code = main(["certify", "--f", str(tmp_path / "f.json"), "--g", str(tmp_path / "out" / "g.json"),
                 "--eps", str(tmp_path / "eps.json"), "--target", str(tmp_path / "t.json")])
    assert code == EXIT_PASS


def test_main_missing_config():
    assert main(["run", "/nonexistent/cfg.json"]) == EXIT_PRECONDITION


def test_invalid_mode_is_rejected(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"mode": "teleport"}))
    assert main(["run", str(cfg), "--out-dir", str(tmp_path / "o")]) == EXIT_PRECONDITION
