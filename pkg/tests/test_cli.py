import csv
import json

import numpy as np
import pytest

from fewmode.cli import ConfigError, list_presets, load_config, main, resolve


def _write(tmp_path, text, name="cfg.toml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def _read(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)


def test_list_presets(capsys):
    assert main(["list-presets"]) == 0
    names = capsys.readouterr().out.split()
    assert names == list_presets()
    assert {"empty", "double-delta-1mode", "atom-strong-coupling", "drive-saturation"} <= set(names)


@pytest.mark.parametrize("name", list_presets())
def test_every_preset_resolves(name):
    rc = resolve(load_config(preset=name))
    assert rc.grid.size > 0


DD = "wave_kind = 'schroedinger'\ngeometry.kind = 'double_delta'\n"


@pytest.mark.parametrize("text, field", [
    (DD + "geometry.xy = 3\n", "geometry.xy"),
    ("geometry.kind = 'slab'\n", "geometry.kind"),
    (DD + "geometry.xi = 'big'\n", "geometry.xi"),
    (DD + "geometry.xi = 10\nbasis.selector = [1]\ngrid.min = 5\ngrid.max = 1\n", "grid"),
    (DD + "geometry.xi = 10\nbasis.selector = [0]\n", "selector"),
])
def test_bad_config_exits_with_field(tmp_path, capsys, text, field):
    code = main(["spectrum", "--config", _write(tmp_path, text), "--out", str(tmp_path / "o")])
    assert code == 1
    assert field in capsys.readouterr().err


def test_unknown_preset_and_suite(capsys):
    assert main(["spectrum", "--preset", "no-such-preset"]) == 1
    assert main(["verify", "no-such-suite"]) == 1
    with pytest.raises(ConfigError):
        load_config(preset="no-such-preset")


def test_empty_preset_is_free_propagation(tmp_path):
    assert main(["spectrum", "--preset", "empty", "--out", str(tmp_path)]) == 0
    head, t = _read(tmp_path / "spectrum.csv")
    col = {h: t[:, i] for i, h in enumerate(head)}
    assert np.allclose(col["Re_S_full_10"] ** 2 + col["Im_S_full_10"] ** 2, 1.0, atol=1e-12)
    assert np.max(np.abs(col["T2_oracle"] - 1.0)) < 1e-12
    assert np.max(np.abs(col["Re_S_full_00"])) < 1e-12


def test_double_delta_preset_matches_oracle(tmp_path):
    cfg = _write(tmp_path, "grid.count = 60\n")
    assert main(["spectrum", "--preset", "double-delta-1mode", "--config", cfg,
                 "--out", str(tmp_path)]) == 0
    head, t = _read(tmp_path / "spectrum.csv")
    assert head[0] == "E"
    col = {h: t[:, i] for i, h in enumerate(head)}
    assert np.max(np.abs(col["T2_full"] - col["T2_oracle"])) < 1e-6
    man = json.loads((tmp_path / "spectrum.manifest.json").read_text())
    assert {"tool", "config", "resolved", "conventions", "tolerances", "columns", "files"} <= set(man)
    assert man["columns"] == head
    assert man["resolved"]["selector"] == [1]


def test_output_is_deterministic_across_threads(tmp_path):
    cfg = _write(tmp_path, "grid.count = 40\n")
    outs = []
    for n in ("1", "2"):
        d = tmp_path / f"t{n}"
        assert main(["spectrum", "--preset", "atom-strong-coupling", "--config", cfg,
                     "--threads", n, "--out", str(d)]) == 0
        outs.append((d / "spectrum.csv").read_bytes())
    assert outs[0] == outs[1]
    head = outs[0].decode().splitlines()[0].split(",")
    assert head[0] == "omega"
    assert {"gamma_S", "delta_LS", "kappa_T"} <= set(head)


def test_sweep_records_resolved_atom_frequency(tmp_path):
    cfg = _write(tmp_path, "grid.count = 20\nsweep.values = [0.1, 0.15]\n")
    assert main(["sweep", "--preset", "atom-eta-track", "--config", cfg, "--out", str(tmp_path)]) == 0
    index = json.loads((tmp_path / "eta.index.json").read_text())
    entries = index["sweep"]["entries"]
    assert [e["value"] for e in entries] == [0.1, 0.15]
    wa = [e["resolved"]["omega_a"] for e in entries]
    assert wa[1] == pytest.approx(28.71, abs=0.01)
    assert wa[0] != wa[1]
    for e in entries:
        assert (tmp_path / e["file"]).exists()


def test_drive_columns(tmp_path):
    cfg = _write(tmp_path, "grid.count = 20\nsweep.values = [1e-3, 10.0]\n")
    assert main(["sweep", "--preset", "drive-saturation", "--config", cfg, "--out", str(tmp_path)]) == 0
    index = json.loads((tmp_path / f"{load_config(preset='drive-saturation')['outputs.prefix']}.index.json").read_text())
    cols = index["columns"]
    assert {"T2_drive", "R2_drive", "sigma_z", "drive_residual"} <= set(cols)
    sz = []
    for e in index["sweep"]["entries"]:
        head, t = _read(tmp_path / e["file"])
        sz.append(t[:, head.index("sigma_z")])
        assert np.max(t[:, head.index("drive_residual")]) < 1e-6
    assert np.all(sz[0] < -0.99) and np.max(sz[1]) > np.max(sz[0])


def test_verify_single_suite(tmp_path, capsys):
    assert main(["verify", "divergence-control", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "PASS" in out and "ALL PASSED" in out
    rep = json.loads((tmp_path / "verify-report.json").read_text())
    assert rep["passed"] is True
