"""File formats and the command line entry point."""
import csv
import json

import numpy as np
import pytest

from multiscat.cli import main
from multiscat.io import read_field_bin, write_field_bin


# ----------------------------------------------------------------------
# binary field format
# ----------------------------------------------------------------------
def test_field_bin_roundtrip(tmp_path):
    rng = np.random.default_rng(1)
    vals = rng.standard_normal((5, 3, 7)) + 1j * rng.standard_normal((5, 3, 7))
    bbox = (-0.5, 0.5, -0.5, 0.5, -1.25, 1.75)
    p = tmp_path / "f.bin"
    write_field_bin(p, vals, bbox)
    got, got_bbox = read_field_bin(p)
    np.testing.assert_array_equal(got, vals)
    assert got_bbox == bbox


def test_field_bin_rejects_bad_magic(tmp_path):
    p = tmp_path / "junk.bin"
    p.write_bytes(b"NOPE" + b"\x00" * 64)
    with pytest.raises(ValueError, match="magic"):
        read_field_bin(p)


def test_field_bin_rejects_non_3d(tmp_path):
    with pytest.raises(ValueError):
        write_field_bin(tmp_path / "f.bin", np.zeros((2, 2)), (0,) * 6)


# ----------------------------------------------------------------------
# CLI
# ----------------------------------------------------------------------
def _small_problem(extra=None):
    doc = {
        "schema_version": 1,
        "d": 1.0,
        "interfaces": [{"kind": "flat", "offset": 0.0}],
        "wavenumbers": [3.0, 5.0],
        "phi": 5 * np.pi / 6,
        "theta": 0.0,
        "n": 8, "m_wall": 5, "m_cap": 6,
        "proxy": {"n_theta": 5, "n_phi": 10},
        "K": 1, "order": 5,
    }
    if extra:
        doc.update(extra)
    return doc


def _write(tmp_path, doc, name="prob.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


def test_cli_solve_writes_artifacts(tmp_path):
    cfgp = _write(tmp_path, _small_problem())
    out = tmp_path / "out"
    assert main(["solve", "--config", cfgp, "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["command"] == "solve"
    assert report["flux_err"] < 1e-2
    with open(out / "rayleigh.csv") as fh:
        rows = list(csv.DictReader(fh))
    K = 1
    assert len(rows) == 2 * (2 * K + 1) ** 2
    spec = [r for r in rows if r["m"] == "0" and r["n"] == "0"
            and r["side"] == "up"][0]
    assert abs(complex(float(spec["re_a"]), float(spec["im_a"]))) < 1.0
    assert spec["propagating"] == "1"


def test_cli_spectra(tmp_path):
    doc = _small_problem({"spectra": {"phi_min": 0.6 * np.pi,
                                      "phi_max": 0.7 * np.pi,
                                      "count": 3}})
    cfgp = _write(tmp_path, doc)
    out = tmp_path / "out"
    assert main(["spectra", "--config", cfgp, "--out", str(out)]) == 0
    with open(out / "spectra.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 3
    phis = [float(r["phi"]) for r in rows]
    np.testing.assert_allclose(phis,
                               np.linspace(0.6 * np.pi, 0.7 * np.pi, 3))


def test_cli_converge(tmp_path):
    doc = _small_problem({"converge": {"ns": [14, 16]}})
    cfgp = _write(tmp_path, doc)
    out = tmp_path / "out"
    assert main(["converge", "--config", cfgp, "--out", str(out)]) == 0
    with open(out / "convergence.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [int(r["n"]) for r in rows] == [14, 16]
    assert float(rows[-1].get("err_up")) == 0.0


def test_cli_field_roundtrips(tmp_path):
    doc = _small_problem({"field": {"nx": 4, "ny": 1, "nz": 8}})
    cfgp = _write(tmp_path, doc)
    out = tmp_path / "out"
    assert main(["field", "--config", cfgp, "--out", str(out)]) == 0
    vals, bbox = read_field_bin(out / "field.bin")
    assert vals.shape == (4, 1, 8)
    # points beyond +-3h of the interface are finite; the masked band
    # near z = 0 is NaN
    assert np.isfinite(vals[:, :, 0]).all()
    assert np.isfinite(vals[:, :, -1]).all()


def test_cli_schema_violation_exits_2(tmp_path):
    doc = _small_problem({"order": 4})          # not an allowed order
    cfgp = _write(tmp_path, doc)
    assert main(["solve", "--config", cfgp,
                 "--out", str(tmp_path / "o")]) == 2


def test_cli_unknown_key_exits_2(tmp_path):
    doc = _small_problem({"wavelength": 1.0})   # not in the schema
    cfgp = _write(tmp_path, doc)
    assert main(["solve", "--config", cfgp,
                 "--out", str(tmp_path / "o")]) == 2


def test_cli_missing_file_exits_2(tmp_path):
    assert main(["solve", "--config", str(tmp_path / "nope.json"),
                 "--out", str(tmp_path / "o")]) == 2


def test_cli_bad_preset_exits_2(tmp_path):
    doc = {"schema_version": 1, "preset": "does-not-exist"}
    cfgp = _write(tmp_path, doc)
    assert main(["solve", "--config", cfgp,
                 "--out", str(tmp_path / "o")]) == 2


def test_cli_preset_with_overrides(tmp_path):
    doc = {"schema_version": 1, "preset": "fig4-flat",
           "n": 8, "m_wall": 5, "m_cap": 6, "K": 1,
           "proxy": {"n_theta": 5, "n_phi": 10}}
    cfgp = _write(tmp_path, doc)
    out = tmp_path / "out"
    assert main(["solve", "--config", cfgp, "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["n"] == 8 and report["K"] == 1


def test_cli_order_override_flag(tmp_path):
    cfgp = _write(tmp_path, _small_problem())
    out = tmp_path / "out"
    assert main(["solve", "--config", cfgp, "--out", str(out),
                 "--order", "7"]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["order"] == 7
