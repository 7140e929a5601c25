import json
import os
import subprocess
from pathlib import Path

import numpy as np
import pytest

import qlan

ROOT = Path(__file__).resolve().parents[2]
CONFIG = ROOT / "configs" / "alloc2.json"
SCHEMAS = ROOT / "schemas"
CLI = Path(os.environ.get("QLAN_CLI", ROOT / "build" / "tools" / "qlan"))


def schema(name):
    jsonschema = pytest.importorskip("jsonschema")
    with open(SCHEMAS / f"{name}.schema.json") as f:
        s = json.load(f)
    return lambda doc: jsonschema.validate(doc, s)


def cli(*args):
    if not CLI.exists():
        pytest.skip("qlan CLI not built")
    return subprocess.run([str(CLI), *map(str, args)], capture_output=True, text=True)


def bell_counts(n):
    # Psi+ in the label frame: HV/VH and DD/AA, RL/LR... only HV and DA bases used
    rows = []
    for a in "HV":
        for b in "HV":
            rows.append((a, b, n if a != b else 0))
    for a in "DA":
        for b in "DA":
            rows.append((a, b, n if a == b else 0))
    return rows


def test_version():
    assert qlan.__version__ == "0.1.0"


def test_werner_and_log_negativity():
    assert qlan.log_negativity(qlan.werner(1.0)) == pytest.approx(1.0, abs=1e-9)
    assert qlan.log_negativity(qlan.werner(1 / 3)) == pytest.approx(0.0, abs=1e-9)
    assert qlan.log_negativity(np.eye(4) / 4) == pytest.approx(0.0, abs=1e-12)
    assert qlan.bell_fidelity(qlan.werner(0.6)) == pytest.approx(0.25 + 0.75 * 0.6)


def test_partial_trace_of_bell_is_mixed():
    red = qlan.partial_trace(qlan.werner(1.0), "first")
    assert np.allclose(red, np.eye(2) / 2)
    with pytest.raises(qlan.QlanError):
        qlan.partial_trace(qlan.werner(1.0), "third")


def test_settings_and_analyzer():
    assert qlan.setting_for("H") == (0.0, 0.0)
    assert qlan.setting_for("A", 10.0) == (45.0, 55.0)
    chi = qlan.analyzer_state(0.0, 45.0)
    assert abs(chi[1]) == pytest.approx(1.0)
    with pytest.raises(qlan.QlanError):
        qlan.setting_for("X")


def test_rsp_predict():
    state, p = qlan.rsp_predict(qlan.werner(1.0), "H", "first")
    assert p == pytest.approx(0.5)
    assert state[1, 1].real == pytest.approx(1.0)
    with pytest.raises(qlan.QlanError):
        rho = np.zeros((4, 4), dtype=complex)
        rho[0, 0] = 1.0
        qlan.rsp_predict(rho, "V", "first")


def test_compensation_identity_for_psi_plus():
    x = qlan.solve_compensation_x(qlan.werner(1.0))
    assert min(x, 180 - x) < 0.05 or abs(x - 90) < 0.05


def test_channel_frequencies():
    f = qlan.channel_frequencies(1)
    assert f["signal_thz"] > f["idler_thz"]
    assert f["signal_thz"] + f["idler_thz"] == pytest.approx(2 * 192.3125)


def test_config_roundtrip_and_errors():
    cfg = qlan.load_config(CONFIG)
    schema("config")(cfg)
    again = qlan.parse_config(json.dumps(cfg))
    assert again == cfg
    bad = dict(cfg)
    bad["links"] = ["A-B", "A-Dave"]
    with pytest.raises(qlan.QlanError, match="Dave"):
        qlan.parse_config(json.dumps(bad))


def test_jsi_car():
    m, car = qlan.jsi(str(CONFIG))
    assert m.shape == (8, 8)
    assert 9.9 < car < 12.9


def test_allocate():
    r = qlan.allocate(str(CONFIG))
    assert len(r["assignment"]) == 8
    assert {l["link"] for l in r["links"]} == {"A-B", "B-C", "C-A"}
    assert r["score"] > 0


def test_tomography_bell():
    rep = qlan.tomography(bell_counts(10000), integration_s=60.0, samples=256, seed=3, link="A-B")
    schema("link_report")(rep)
    assert rep["fidelity"]["mean"] > 0.97


def test_cli_missing_node_exits_2(tmp_path):
    cfg = json.loads(CONFIG.read_text())
    cfg["links"] = ["A-B", "B-Dave"]
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(cfg))
    r = cli("allocate", "-c", p)
    assert r.returncode == 2
    err = json.loads(r.stderr)
    assert "Dave" in err["message"]


def test_cli_allocate_and_jsi_schemas():
    r = cli("allocate", "-c", CONFIG, "--json")
    assert r.returncode == 0, r.stderr
    schema("allocate")(json.loads(r.stdout))
    r = cli("jsi", "-c", CONFIG)
    assert r.returncode == 0, r.stderr
    schema("jsi")(json.loads(r.stdout))


def test_cli_simulate_correlate(tmp_path):
    r = cli("simulate", "-c", CONFIG, "-o", tmp_path, "--integration-s", 0.5)
    assert r.returncode == 0, r.stderr
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    schema("manifest")(manifest)
    a = sorted(tmp_path.glob("C-A_DD_C.qltt"))[0]
    b = sorted(tmp_path.glob("C-A_DD_A.qltt"))[0]
    node, res, bins = qlan.read_stream(str(a))
    assert node == "C" and res == 5000 and bins == sorted(bins)
    rep = qlan.correlate(a, b)
    schema("coincidence")(rep)
    assert rep["raw"] > 0
    r = cli("correlate", a, b)
    assert r.returncode == 0, r.stderr
    assert json.loads(r.stdout) == rep
