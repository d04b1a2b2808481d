import json

import numpy as np
import pytest

from antixxz.cli import main
from antixxz.spectra import validate_document
from antixxz.tables import read_csv


def run(capsys, *args):
    rc = main(list(args))
    out = capsys.readouterr()
    return rc, out.out, out.err


def test_spectrum_json_and_cache(capsys, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert run(capsys, "spectrum", "--n-sites", "5", "--out", str(a))[0] == 0
    cached = list((tmp_path / "cache" / "spectrum").glob("*.json"))
    assert len(cached) == 1
    assert run(capsys, "spectrum", "--n-sites", "5", "--out", str(b))[0] == 0
    assert a.read_bytes() == b.read_bytes()
    doc = json.loads(a.read_text())
    validate_document(doc)
    assert len(doc["records"]) == 32
    ground = doc["records"][0]
    assert all(abs(r["re"]) <= 1e-6 for r in ground["roots"])


def test_corrupt_cache_is_recomputed(capsys, tmp_path):
    out = tmp_path / "s.json"
    run(capsys, "spectrum", "--n-sites", "4", "--levels", "2", "--out", str(out))
    entry = next((tmp_path / "cache" / "spectrum").glob("*.json"))
    entry.write_text("{not json")
    with pytest.warns(UserWarning, match="corrupt cache"):
        rc, _, _ = run(capsys, "spectrum", "--n-sites", "4", "--levels", "2", "--out", str(out))
    assert rc == 0
    assert json.loads(out.read_text())["records"][0]["index"] == 0


def test_spectrum_inhomogeneous_tracks_ground(capsys):
    rc, out, _ = run(capsys, "--no-cache", "spectrum", "--n-sites", "4", "--thetas", "0.1,-0.2,0.3,0.05")
    assert rc == 0
    doc = json.loads(out)
    assert doc["params"]["thetas"] == [0.1, -0.2, 0.3, 0.05]
    assert "tracked_ground" in doc["meta"]


def test_exit_codes(capsys):
    assert run(capsys, "spectrum", "--n-sites", "13")[0] == 1
    assert run(capsys, "spectrum", "--eta", "0")[0] == 1
    assert run(capsys, "nonsense")[0] == 1
    assert run(capsys, "roots", "--state", "sideways", "--n-sites", "4")[0] == 1
    assert run(capsys, "thermo", "--case", "af-even", "--beta", "2.0")[0] == 1


def test_numerical_failure_exit_code(capsys, tmp_path):
    # a one-step path cannot move the seed into the imaginary strip edge without stalling
    rc, _, err = run(capsys, "continue", "--n-sites", "4", "--thetas", "0.1,-0.2,0.3,0.05",
                     "--steps", "1", "--tol", "1e-40")
    assert rc == 2
    assert "numerical failure" in err


def test_config_file_and_flag_override(capsys, tmp_path):
    cfg = tmp_path / "run.toml"
    cfg.write_text('[dispersion]\neta_plus = 0.9\npoints = 5\n\n[roots]\nn_sites = 4\nregime = "antiferro"\n')
    rc, out, _ = run(capsys, "--config", str(cfg), "dispersion")
    assert rc == 0
    lines = out.splitlines()
    assert lines[0] == "# case=af-odd-excited eta_plus=0.90000000000000002 points=5"
    assert len(lines) == 7
    rc, out, _ = run(capsys, "--config", str(cfg), "dispersion", "--points", "3")
    assert len(out.splitlines()) == 5
    rc, out, _ = run(capsys, "--config", str(cfg), "roots")
    assert "N=4" in out.splitlines()[0] and "eta_im=3.1415926535897931" in out


def test_csv_format(capsys, tmp_path):
    path = tmp_path / "d.csv"
    assert run(capsys, "dispersion", "--points", "201", "--out", str(path))[0] == 0
    raw = path.read_bytes()
    assert b"\r" not in raw
    meta, cols, rows = read_csv(path)
    assert cols == ["t", "epsilon", "zeta"] and len(rows) == 201
    assert float(meta["eta_plus"]) == 1.31696
    t = np.array([float(r[0]) for r in rows])
    eps = np.array([float(r[1]) for r in rows])
    assert np.abs(eps - eps[::-1]).max() <= 1e-10
    assert t[np.argmin(eps)] == 0.0
    # 17 significant digits round-trip exactly
    assert all(float(r[1]) == float("%.17g" % float(r[1])) for r in rows)


def test_dispersion_single_point(capsys):
    rc, out, _ = run(capsys, "dispersion", "--points", "1")
    lines = out.splitlines()
    assert rc == 0 and len(lines) == 3
    t, _, zeta = (float(v) for v in lines[2].split(","))
    assert t == 0.0 and 2 * zeta == pytest.approx(np.pi, abs=1e-15)


def test_thermo_tables(capsys):
    rc, out, _ = run(capsys, "thermo", "--case", "ferro-excited", "--alpha", "0.3", "--points", "11")
    assert rc == 0 and out.startswith("# case=ferro-excited")
    assert len(out.splitlines()) == 13
    rc, out, _ = run(capsys, "thermo", "--table", "delta-e2", "--points", "5")
    row = [r for r in out.splitlines()[2:] if r.startswith("0,")][0]
    assert float(row.split(",")[1]) == pytest.approx(0.0, abs=1e-14)


def test_roots_command(capsys):
    rc, out, _ = run(capsys, "roots", "--n-sites", "9", "--regime", "antiferro", "--state", "af-odd-excited")
    assert rc == 0
    kinds = [line.split(",")[2] for line in out.splitlines()[2:]]
    assert kinds.count("imaginary") == 2 and kinds.count("pair") == 6


def test_bae_command(capsys, tmp_path):
    rc, out, _ = run(capsys, "bae", "--n-sites", "2", "--n-starts", "100", "--seed", "1")
    assert rc == 0
    doc = json.loads(out)
    validate_document(doc, "bae.schema.json")
    assert doc["coverage"] == 1.0 and doc["seed"] == 1
    rc, out2, _ = run(capsys, "bae", "--n-sites", "2", "--n-starts", "100", "--seed", "1")
    assert out == out2


def test_fit_command(capsys, tmp_path):
    csv_path = tmp_path / "fit.csv"
    rc, out, _ = run(capsys, "fit", "--case", "af-odd", "--sizes", "5,7,9", "--csv", str(csv_path))
    assert rc == 0
    doc = json.loads(out)
    validate_document(doc, "fit.schema.json")
    assert doc["fit"]["model"] == "power"
    _, cols, rows = read_csv(csv_path)
    assert cols[0] == "N" and [r[0] for r in rows] == ["5", "7", "9"]
    assert run(capsys, "fit", "--sizes", "6,8")[0] == 1
    assert run(capsys, "fit", "--case", "af-odd", "--sizes", "5,6,7")[0] == 1


def test_reproduce_fig7(capsys, tmp_path):
    rc, out, _ = run(capsys, "reproduce", "fig7", "--out", str(tmp_path / "figs"))
    assert rc == 0
    manifest = json.loads((tmp_path / "figs" / "fig7" / "manifest.json").read_text())
    validate_document(manifest, "manifest.schema.json")
    assert manifest["passed"] and manifest["files"] == ["dispersion.csv"]
    assert out.count("PASS") == len(manifest["checks"])


def test_reproduce_fig6(capsys, tmp_path):
    rc, _, _ = run(capsys, "reproduce", "fig6", "--out", str(tmp_path))
    assert rc == 0
    _, cols, rows = read_csv(tmp_path / "fig6" / "roots_excited.csv")
    assert sum(r[2] == "imaginary" for r in rows) == 2
