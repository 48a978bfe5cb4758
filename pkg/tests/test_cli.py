import json
import math
import subprocess
import sys

import numpy as np
import pytest

from conftest import I2, X, Z, pair
from steerjm import __version__
from steerjm.assemblage import BipartitePureState, MeasurementAssemblage, StateAssemblage, assemblage_from_state
from steerjm.cli import main
from steerjm.jsonio import dumps

STEERABLE = StateAssemblage([[(I2 + 0.8 * Z) / 4, (I2 - 0.8 * Z) / 4],
                             [(I2 + 0.8 * X) / 4, (I2 - 0.8 * X) / 4]])


def write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(obj if isinstance(obj, str) else dumps(obj, indent=2))
    return str(p)


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_se_map_two_povms(tmp_path, capsys):
    code, out, _ = run(["se-map", "--input", write(tmp_path, "a.json", STEERABLE)], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["rank"] == 2 and doc["dim"] == 2
    obs = doc["observables"]
    assert obs["kind"] == "measurement" and len(obs["settings"]) == 2
    assert doc["provenance"]["version"] == __version__
    assert "note" not in doc


def test_se_map_product_state(tmp_path, capsys):
    state = BipartitePureState.from_coefficients([1.0], 2, 2)
    a = assemblage_from_state(state, pair(0.9))
    code, out, _ = run(["se-map", "--input", write(tmp_path, "p.json", a)], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["rank"] == 1 and doc["note"] == "trivially JM"


def test_se_map_non_psd_names_element(tmp_path, capsys):
    bad = StateAssemblage([[np.diag([0.6, -0.1]), np.diag([0.0, 0.5])], [I2 / 4, I2 / 4]])
    code, _, err = run(["se-map", "--input", write(tmp_path, "bad.json", bad)], capsys)
    assert code == 3
    assert "(0, 0)" in err


def test_parse_error_exit_code(tmp_path, capsys):
    code, _, err = run(["check", "--input", write(tmp_path, "x.json", '{"dim": 2,\n "settings": [}')], capsys)
    assert code == 2 and "line 2" in err
    code, _, _ = run(["check", "--input", str(tmp_path / "missing.json")], capsys)
    assert code == 2
    with pytest.raises(SystemExit) as err:
        main(["check", "--bogus"])
    assert err.value.code == 2


def test_check_measurements(tmp_path, capsys):
    code, out, _ = run(["check", "--input", write(tmp_path, "m.json", pair(0.8))], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["jm"]["verdict"] == "not JM"
    assert doc["jm"]["witness"]["value"] == pytest.approx(doc["jm"]["robustness"], abs=1e-6)
    code, out, _ = run(["check", "--input", write(tmp_path, "b.json", pair(1 / math.sqrt(2)))], capsys)
    doc = json.loads(out)
    assert doc["jm"]["verdict"] == "boundary" and abs(doc["jm"]["margin"]) < 1e-6


def test_check_states(tmp_path, capsys):
    code, out, _ = run(["check", "--input", write(tmp_path, "s.json", STEERABLE)], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["agree"]
    assert doc["unsteerable"]["verdict"] == "steerable" and doc["se_jm"]["verdict"] == "not JM"
    state = BipartitePureState.from_coefficients([1.0], 2, 2)
    a = assemblage_from_state(state, pair(0.9))
    code, out, _ = run(["check", "--input", write(tmp_path, "p.json", a)], capsys)
    doc = json.loads(out)
    assert doc["unsteerable"]["verdict"] == "unsteerable" and doc["se_jm"]["verdict"] == "JM"


def test_check_disagreement_exit_4(tmp_path, capsys, monkeypatch):
    import steerjm.cli as cli

    real = cli.jm_feasible

    def flipped(m, tol=None):
        res = real(m, tol=tol)
        res.feasible = not res.feasible
        res.margin = -res.margin
        return res

    monkeypatch.setattr(cli, "jm_feasible", flipped)
    code, _, err = run(["check", "--input", write(tmp_path, "s.json", STEERABLE)], capsys)
    assert code == 4 and "disagree" in err


def test_solver_failure_exit_5(tmp_path, capsys, monkeypatch):
    import steerjm.cli as cli
    from steerjm.solver import SolverError

    def boom(*a, **k):
        raise SolverError("status max_iter")

    monkeypatch.setattr(cli, "incompatibility_robustness", boom)
    code, _, err = run(["robustness", "--input", write(tmp_path, "m.json", pair(1.0))], capsys)
    assert code == 5 and "solver failure" in err


def test_robustness_kinds(tmp_path, capsys):
    path = write(tmp_path, "m.json", pair(1.0))
    _, out, _ = run(["robustness", "--input", path], capsys)
    assert json.loads(out)["mixing_weight"] == pytest.approx((2 - math.sqrt(2)) / 4, abs=1e-7)
    _, out, _ = run(["robustness", "--input", path, "--kind", "white"], capsys)
    assert json.loads(out)["value"] == pytest.approx(1 - 1 / math.sqrt(2), abs=1e-7)
    _, out, _ = run(["robustness", "--input", path, "--kind", "white", "--bias", "1"], capsys)
    assert json.loads(out)["value"] == pytest.approx(math.sqrt(2) - 1, abs=1e-6)
    _, out, _ = run(["robustness", "--input", path, "--kind", "weight"], capsys)
    assert json.loads(out)["value"] == pytest.approx(1.0, abs=1e-7)
    code, _, _ = run(["robustness", "--input", path, "--kind", "white", "--bias", "2"], capsys)
    assert code == 3


def test_robustness_rejects_state_input(tmp_path, capsys):
    # the document declares a state assemblage, which is a schema error here
    code, _, err = run(["robustness", "--input", write(tmp_path, "s.json", STEERABLE)], capsys)
    assert code == 2 and "$.kind" in err


def test_scan_fig1_csv_is_deterministic(tmp_path, capsys):
    args = ["scan-fig1", "--lambda", "0:1:4", "--r", "0:0.45:3", "--theta", "0:3.14159:3"]
    out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(args + ["--output", str(out1)]) == 0
    assert main(args + ["--output", str(out2), "--threads", "2"]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    lines = out1.read_text().splitlines()
    assert lines[0] == f"# steerjm {__version__}"
    assert lines[1] == "# experiment: fig1"
    spec = json.loads(lines[2][len("# spec: "):])
    assert spec["grid"]["lambda"] == {"min": 0.0, "max": 1.0, "steps": 4}
    assert spec["fixed"] == {"t2": 0.45}
    assert lines[3] == "lambda,r,theta,busch_value,yu_oh_margin,steerable_inner,steerable_outer,valid"
    assert len(lines) == 4 + 4 * 3 * 3


def test_scan_rejects_bad_grid(capsys):
    code, _, _ = run(["scan-fig1", "--lambda", "1:0:4"], capsys)
    assert code == 3
    code, _, _ = run(["scan-fig2", "--theta", "0:1:3"], capsys)
    assert code == 3
    with pytest.raises(SystemExit):
        main(["scan-fig2", "--theta", "0:1"])


def test_scan_fig2_small(tmp_path, capsys):
    code, out, _ = run(["scan-fig2", "--theta", f"{math.pi / 4}:{math.pi / 2}:2"], capsys)
    assert code == 0
    rows = [l.split(",") for l in out.splitlines() if not l.startswith("#")]
    assert rows[0] == ["theta", "lambda_g", "lambda_w_b0", "lambda_w_b05", "lambda_w_b08", "lambda_w_b1", "status"]
    last = rows[-1]
    assert float(last[1]) == pytest.approx(0.146447, abs=1e-5)
    assert float(last[2]) == pytest.approx(0.292893, abs=1e-5)
    assert last[-1] == "ok"


def test_console_script_entry_point(tmp_path):
    p = write(tmp_path, "m.json", pair(0.8))
    res = subprocess.run([sys.executable, "-m", "steerjm.cli", "check", "--input", p],
                         capture_output=True, text=True)
    assert res.returncode == 0 and json.loads(res.stdout)["jm"]["verdict"] == "not JM"
