import csv
import json
import shutil
import subprocess
import sys

import pytest
import yaml

from energydensity.cli import data_path, main
from energydensity.reports import reports_from_json


def run(tmp_path, *args, name="out"):
    out = tmp_path / name
    code = main([*args, "--out", str(out)])
    return code, out


def csv_rows(path):
    return list(csv.DictReader(path.open()))


def write_config(tmp_path, data, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(data))
    return str(p)


def test_vitali_bundled_example(tmp_path):
    code, out = run(tmp_path, "vitali")
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    assert report["selected"] == [1, 3]
    assert report["ok"] and report["violations"] == []
    assert [r["selected"] for r in csv_rows(out / "table.csv")] == ["1", "0", "1"]


def test_vitali_input_flag(tmp_path):
    src = tmp_path / "fam.csv"
    src.write_text("index,x1,r\n1,0,1\n2,5,1\n")
    code, out = run(tmp_path, "vitali", "--input", str(src))
    assert code == 0
    assert json.loads((out / "report.json").read_text())["selected"] == [1, 2]


def test_density_constant_half(tmp_path):
    code, out = run(tmp_path, "density", "--config", str(data_path("constant_half.yaml")))
    assert code == 0
    rows = csv_rows(out / "table.csv")
    assert {r["functional"] for r in rows} == {"rho", "rho_tilde", "rho_family"}
    assert all(abs(float(r["estimate"]) - 0.5) <= 1e-6 for r in rows)


def test_density_json_roundtrip(tmp_path):
    code, out = run(tmp_path, "density", "--config", str(data_path("constant_half.yaml")))
    reports = reports_from_json((out / "report.json").read_text())
    again = reports_from_json(json.dumps([r.to_dict() for r in reports]))
    assert reports == again
    assert [r.functional for r in reports] == ["rho", "rho_tilde", "rho_family"]


def test_density_deterministic(tmp_path):
    cfg = str(data_path("constant_half.yaml"))
    _, a = run(tmp_path, "density", "--config", cfg, name="a")
    _, b = run(tmp_path, "density", "--config", cfg, "--workers", "2", name="b")
    assert (a / "table.csv").read_bytes() == (b / "table.csv").read_bytes()


def test_missing_config_exit_2(tmp_path):
    code, _ = run(tmp_path, "density", "--config", str(tmp_path / "nope.yaml"))
    assert code == 2


def test_bad_field_kind_exit_2(tmp_path):
    cfg = write_config(tmp_path, {"field": {"kind": "fractal"}})
    code, _ = run(tmp_path, "density", "--config", cfg)
    assert code == 2


def test_bad_schedule_exit_2(tmp_path):
    cfg = write_config(tmp_path, {"field": {"kind": "constant", "value": 0.5}, "R_sched": [4.0, 2.0], "functionals": ["rho"]})
    code, _ = run(tmp_path, "density", "--config", cfg)
    assert code == 2


def test_bad_argument_exit_2(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["density", "--workers", "0"])
    assert exc.value.code == 2


def test_nonconvergence_exit_3(tmp_path):
    cfg = write_config(
        tmp_path,
        {"field": {"kind": "disk-lattice"}, "functionals": ["rho"], "R_sched": [3.0], "quadrature": {"max_levels": 1}},
    )
    code, _ = run(tmp_path, "density", "--config", cfg, "--tolerance", "1e-14")
    assert code == 3


def test_nsa_identity(tmp_path):
    code, out = run(tmp_path, "nsa")
    assert code == 0
    reports = reports_from_json((out / "report.json").read_text())
    assert [r.functional for r in reports] == ["rho_nsa_upper", "rho_nsa_lower"]
    assert reports[1].value < 0.01


def test_nsa_rational_from_json(tmp_path):
    shutil.copy(data_path("half_square.json"), tmp_path / "hs.json")
    cfg = write_config(tmp_path, {"curve": {"kind": "rational", "path": "hs.json"}, "r_sched": [1.0, 2.0, 4.0]})
    code, out = run(tmp_path, "nsa", "--config", cfg)
    assert code == 0
    assert len(csv_rows(out / "table.csv")) == 6


def test_ow_constant(tmp_path):
    cfg = write_config(tmp_path, {"field": {"kind": "constant", "value": 0.25}, "sizes": [2.0, 4.0], "search": {"h": 0.5}})
    code, out = run(tmp_path, "ow", "--config", cfg)
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    assert report["difference"] == pytest.approx(0.0, abs=1e-9)
    assert report["folner"]["balls"]["consistent"] and report["folner"]["squares"]["consistent"]


def test_brody_example_small(tmp_path):
    cfg = write_config(tmp_path, {"cluster": {"n_max": 3}})
    code, out = run(tmp_path, "brody-example", "--config", cfg)
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    assert 0 < report["calibration"]["c"] < 1
    assert report["floor"] > 0
    assert len(report["cluster_infima"]) == 2


def test_verify_quick(tmp_path):
    code, out = run(tmp_path, "verify", "--config", str(data_path("verify_quick.yaml")))
    summary = json.loads((out / "summary.json").read_text())
    assert [c["id"] for c in summary["criteria"]] == [1, 2, 4, 5]
    assert code == (0 if summary["passed"] else 1)
    assert all("margin" in c and "measured" in c for c in summary["criteria"])
    assert (out / "table.csv").exists()


def test_console_script_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "energydensity.cli", "vitali", "--out", str(tmp_path / "o")],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert "selected [1, 3]" in proc.stdout
