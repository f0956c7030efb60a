import json
from pathlib import Path

import numpy as np
import pytest

from gyrokin.cli import EXIT_ABORT, EXIT_FAIL, EXIT_INPUT, EXIT_OK, main
from gyrokin.diagnostics import CSV_COLUMNS, load_snapshot, read_diagnostics
from gyrokin.parallel import max_workers

CONFIGS = Path(__file__).parent.parent / "configs"


def _verify(capsys, *args):
    code = main(["verify", *args])
    return code, json.loads(capsys.readouterr().out)


def test_verify_all_passes(capsys, tmp_path):
    code, report = _verify(capsys, "--suite", "all", "--report", str(tmp_path / "r.json"))
    assert code == EXIT_OK and report["passed"]
    assert {c["suite"] for c in report["checks"]} == {"geometry", "kernels", "boltzmann", "fp", "landau"}
    assert json.loads((tmp_path / "r.json").read_text()) == report


def test_verify_kernels_contents(capsys):
    code, report = _verify(capsys, "--suite", "kernels")
    names = " ".join(c["name"] for c in report["checks"])
    assert code == EXIT_OK
    for key in ("chi_normalization", "a_plus_null_vectors", "a_plus_psd"):
        assert key in names


def test_verify_same_seed_is_reproducible(capsys):
    _, a = _verify(capsys, "--suite", "geometry", "--seed", "7")
    _, b = _verify(capsys, "--suite", "geometry", "--seed", "7")
    _, c = _verify(capsys, "--suite", "geometry", "--seed", "8")
    assert a == b
    assert [x["value"] for x in a["checks"]] != [x["value"] for x in c["checks"]]


def test_verify_fault_injection_reports_inverse_pi_squared(capsys):
    code, report = _verify(capsys, "--suite", "kernels", "--fault", "chi_pi2")
    assert code == EXIT_FAIL and not report["passed"]
    chi = [c for c in report["checks"] if "chi" in c["name"]]
    assert chi and not chi[0]["passed"]
    assert chi[0]["value"] == pytest.approx(1 / np.pi**2, rel=1e-10)


def _small_config(tmp_path, **solver):
    doc = json.loads((CONFIGS / "relaxation.json").read_text())
    doc["solver"].update({"T": 0.2, "dt": 0.05, "cadence": 2, **solver})
    doc["output"]["directory"] = str(tmp_path / "out")
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(doc))
    return path


def test_simulate_writes_csv_and_snapshots(tmp_path, capsys):
    code = main(["simulate", "--config", str(_small_config(tmp_path))])
    assert code == EXIT_OK
    out = tmp_path / "out"
    data = read_diagnostics(out / "diagnostics.csv")
    assert tuple(data) == CSV_COLUMNS
    assert np.allclose(data["time"], [0.0, 0.1, 0.2])
    for k in range(3):
        g, meta = load_snapshot(out / f"snapshot_{k:04d}")
        assert meta["time"] == pytest.approx(data["time"][k])
        assert g.mass() == pytest.approx(data["mass"][k], rel=1e-14)


def test_simulate_output_override(tmp_path, capsys):
    code = main(["simulate", "--config", str(_small_config(tmp_path)), "--output", str(tmp_path / "elsewhere")])
    assert code == EXIT_OK
    assert (tmp_path / "elsewhere" / "diagnostics.csv").exists()


def test_bundled_relaxation_example(tmp_path, capsys):
    code = main(["simulate", "--config", str(CONFIGS / "relaxation.json"), "--output", str(tmp_path)])
    assert code == EXIT_OK
    d = read_diagnostics(tmp_path / "diagnostics.csv")
    assert np.ptp(d["mass"]) < 1e-8 * d["mass"][0]
    assert np.all(np.diff(d["entropy"]) <= 1e-12 * np.abs(d["entropy"][0]))
    assert np.all(np.diff(d["l2m"]) < 0)


def test_collisionless_example_entropy_within_scheme_bound(tmp_path, capsys):
    code = main(["simulate", "--config", str(CONFIGS / "collisionless.json"), "--output", str(tmp_path)])
    assert code == EXIT_OK
    d = read_diagnostics(tmp_path / "diagnostics.csv")
    assert np.ptp(d["mass"]) < 1e-12 * d["mass"][0]
    # upwind diffusion only removes entropy, by an amount of the scheme order
    assert np.all(np.diff(d["entropy"]) <= 1e-12 * abs(d["entropy"][0]))
    assert abs(d["entropy"][-1] - d["entropy"][0]) < 0.05 * abs(d["entropy"][0])


def test_simulate_abort_flushes_last_good(tmp_path, capsys):
    doc = json.loads(_small_config(tmp_path).read_text())
    doc["initial"]["amplitude"] = 3.0  # negative initial density makes the first collision step fail
    path = tmp_path / "neg.json"
    path.write_text(json.dumps(doc))
    code = main(["simulate", "--config", str(path)])
    assert code == EXIT_ABORT
    assert "aborted" in capsys.readouterr().err
    g, meta = load_snapshot(tmp_path / "out" / "snapshot_0001")
    assert "aborted" in meta and meta["time"] == 0.0


@pytest.mark.parametrize("mutate", [
    lambda d: d["grid"].update(n_r=1),
    lambda d: d["solver"].update(cfl=2.0),
    lambda d: d.update(extra=1),
])
def test_simulate_bad_config_exits_2_before_compute(tmp_path, capsys, mutate):
    doc = json.loads(_small_config(tmp_path).read_text())
    mutate(doc)
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    assert main(["simulate", "--config", str(path)]) == EXIT_INPUT
    assert "config" in capsys.readouterr().err
    assert not (tmp_path / "out").exists()


def test_missing_config_file_exits_2(tmp_path, capsys):
    assert main(["simulate", "--config", str(tmp_path / "nope.json")]) == EXIT_INPUT


def test_drift_check_uniform(tmp_path, capsys):
    csv_path = tmp_path / "drift.csv"
    code = main(["drift-check", "--config", str(CONFIGS / "drift_uniform.json"), "--eps", "1e-1,5e-2,2.5e-2",
                 "--csv", str(csv_path)])
    assert code == EXIT_OK
    out = capsys.readouterr().out
    assert "order" in out
    rows = csv_path.read_text().splitlines()
    assert rows[0] == "eps,error,order"
    orders = [float(r.split(",")[2]) for r in rows[2:]]
    assert len(orders) == 2 and min(orders) >= 1 - 1e-6


def test_drift_check_rejects_increasing_eps(tmp_path, capsys):
    code = main(["drift-check", "--config", str(CONFIGS / "drift_uniform.json"), "--eps", "1e-2,1e-1",
                 "--csv", str(tmp_path / "d.csv")])
    assert code == EXIT_INPUT


def test_threads_env(monkeypatch):
    monkeypatch.setenv("GYROKIN_THREADS", "3")
    assert max_workers() == 3
    for bad in ("0", "-2", "many"):
        monkeypatch.setenv("GYROKIN_THREADS", bad)
        with pytest.raises(ValueError, match="GYROKIN_THREADS"):
            max_workers()


def test_threads_do_not_change_results(monkeypatch, tmp_path, capsys):
    cfg = _small_config(tmp_path)
    monkeypatch.setenv("GYROKIN_THREADS", "1")
    main(["simulate", "--config", str(cfg), "--output", str(tmp_path / "a")])
    monkeypatch.setenv("GYROKIN_THREADS", "4")
    main(["simulate", "--config", str(cfg), "--output", str(tmp_path / "b")])
    a = (tmp_path / "a" / "diagnostics.csv").read_text()
    b = (tmp_path / "b" / "diagnostics.csv").read_text()
    assert a == b
