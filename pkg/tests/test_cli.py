import struct

import numpy as np
import pytest

from spectune import cli, fileio
from spectune.bayesopt import INIT_PRESETS
from spectune.errors import ConditioningError
from spectune.tomo import shepp_logan


def run(*argv):
    return cli.main([str(a) for a in argv])


@pytest.fixture(scope="module")
def sino_file(tmp_path_factory):
    d = tmp_path_factory.mktemp("data")
    assert run("phantom", "--kind", "spheres", "--size", 64, "--slices", 2, "--out", d / "ph.vol") == 0
    assert run("radon", d / "ph.vol", "--angles", 45, "--counts", 1000, "--seed", 0, "--out", d / "sino.vol") == 0
    return d / "sino.vol"


# --- SPVOL1 ----------------------------------------------------------------

def test_phantom_header_golden(tmp_path):
    out = tmp_path / "p.vol"
    assert run("phantom", "--kind", "shepp-logan", "--size", 64, "--slices", 1, "--out", out) == 0
    raw = out.read_bytes()
    assert raw[:6] == bytes([0x53, 0x50, 0x56, 0x4F, 0x4C, 0x31])
    assert raw[6:18] == struct.pack("<III", 64, 64, 1)
    assert len(raw) == 18 + 4 * 64 * 64
    np.testing.assert_array_equal(fileio.read_volume(out)[0], shepp_logan(64).astype(np.float32))


def test_phantom_deterministic(tmp_path):
    for name in ("a.vol", "b.vol"):
        assert run("phantom", "--kind", "spheres", "--size", 48, "--slices", 3, "--out", tmp_path / name) == 0
    assert (tmp_path / "a.vol").read_bytes() == (tmp_path / "b.vol").read_bytes()


def test_phantom_size_rejected(tmp_path, capsys):
    assert run("phantom", "--size", 8, "--out", tmp_path / "x.vol") == 1
    assert "at least 32" in capsys.readouterr().err
    assert not (tmp_path / "x.vol").exists()


def test_volume_x_fastest_layout():
    vol = np.arange(24, dtype=float).reshape(2, 3, 4)
    raw = fileio.encode_volume(vol)
    assert struct.unpack_from("<III", raw, 6) == (4, 3, 2)
    assert np.frombuffer(raw, "<f4", offset=18)[:5].tolist() == [0, 1, 2, 3, 4]
    np.testing.assert_array_equal(fileio.decode_volume(raw), vol)


@pytest.mark.parametrize(
    "mutate, offset",
    [
        (lambda b: b"XPVOL1" + b[6:], 0),
        (lambda b: b[:10], 10),
        (lambda b: b[:-4], None),
        (lambda b: b + b"\0\0\0\0", None),
    ],
)
def test_malformed_volume_names_offset(tmp_path, capsys, mutate, offset):
    good = fileio.encode_volume(np.ones((1, 32, 32)))
    bad = tmp_path / "bad.vol"
    bad.write_bytes(mutate(good))
    assert run("pique", bad) == 2
    err = capsys.readouterr().err
    assert "byte offset" in err
    if offset is not None:
        assert f"byte offset {offset}" in err


def test_non_finite_voxel(tmp_path):
    vol = np.ones((1, 32, 32))
    vol[0, 2, 3] = np.nan
    with pytest.raises(fileio.FormatError) as info:
        fileio.decode_volume(fileio.encode_volume(vol))
    assert info.value.offset == 18 + 4 * (2 * 32 + 3)


def test_missing_file_is_io_error(tmp_path):
    assert run("pique", tmp_path / "nope.vol") == 2


# --- key=value -------------------------------------------------------------

def test_keyvalue_parsing():
    text = "# run\nschedule = decreasing\n\nbudget=12  # short\n"
    assert fileio.parse_keyvalue(text) == {"schedule": "decreasing", "budget": "12"}
    with pytest.raises(fileio.FormatError, match="duplicate"):
        fileio.parse_keyvalue("a=1\na=2\n")
    with pytest.raises(fileio.FormatError) as info:
        fileio.parse_keyvalue("a=1\nnonsense\n")
    assert info.value.offset == 4


def test_config_unknown_key_rejected_before_reading(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("schedule=constant\nmystery=3\n")
    assert run("tune", tmp_path / "missing.vol", "--config", cfg, "--out", tmp_path / "o") == 1
    assert "mystery" in capsys.readouterr().err


def test_config_ranges_validated(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("lambda=1.5\n")
    assert run("tune", tmp_path / "missing.vol", "--config", cfg) == 1
    cfg.write_text("budget=many\n")
    assert run("tune", tmp_path / "missing.vol", "--config", cfg) == 1


def test_flags_override_config(tmp_path, sino_file):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("schedule=constant\ninit=four\nbudget=30\ngrid_m=50\n")
    out = tmp_path / "o"
    assert run("tune", sino_file, "--config", cfg, "--budget", 5, "--out", out) == 0
    rows = (out / "trace.csv").read_text().splitlines()
    assert len(rows) == 1 + 5
    assert rows[1].endswith(",constant,four")


# --- subcommands -----------------------------------------------------------

def test_budget_must_exceed_init(tmp_path, sino_file):
    assert run("tune", sino_file, "--budget", 9, "--init", "nine", "--out", tmp_path / "o") == 1


def test_tune_trace_schema_and_determinism(tmp_path, sino_file):
    args = ["--schedule", "decreasing", "--lambda", 0.9, "--init", "nine", "--budget", 20, "--grid-m", 200]
    for name in ("a", "b"):
        assert run("tune", sino_file, *args, "--out", tmp_path / name) == 0
    a = (tmp_path / "a" / "trace.csv").read_bytes()
    assert a == (tmp_path / "b" / "trace.csv").read_bytes()
    lines = a.decode().splitlines()
    assert lines[0] == "step,rho,omega0,pique,beta_m,schedule,init_preset"
    assert len(lines) == 21
    rows = [ln.split(",") for ln in lines[1:]]
    assert [int(r[0]) for r in rows] == list(range(1, 21))
    np.testing.assert_allclose([(float(r[1]), float(r[2])) for r in rows[:9]], INIT_PRESETS["nine"], atol=0.03)
    assert all(r[4] == "" for r in rows[:9]) and all(r[4] != "" for r in rows[9:])
    for r in rows:
        for field in r[1:4]:
            assert len(field.split(".")[1]) == 6
    summary = (tmp_path / "a" / "summary.txt").read_text()
    for key in ("best_rho=", "best_omega0=", "best_pique=", "wall_time="):
        assert key in summary
    best = min(float(r[3]) for r in rows)
    assert f"best_pique={best:.6f}" in summary


def test_trace_rescoring(tmp_path, sino_file, capsys):
    out = tmp_path / "o"
    assert run("tune", sino_file, "--budget", 6, "--init", "four", "--grid-m", 100, "--out", out) == 0
    rows = [ln.split(",") for ln in (out / "trace.csv").read_text().splitlines()[1:]]
    for k, r in enumerate(rows):
        rec = tmp_path / f"rec{k}.vol"
        assert run("fbp", sino_file, "--rho", r[1], "--omega0", r[2], "--out", rec) == 0
        capsys.readouterr()
        assert run("pique", rec) == 0
        mean = capsys.readouterr().out.strip().splitlines()[-1]
        assert abs(float(mean.split(",")[1]) - float(r[3])) <= 1e-6


def test_oracle_landscape(tmp_path, sino_file):
    out = tmp_path / "o"
    assert run("tune", sino_file, "--budget", 5, "--init", "four", "--grid-m", 100, "--oracle", 3, "--out", out) == 0
    lines = (out / "landscape.csv").read_text().splitlines()
    assert lines[0] == "rho,omega0,pique" and len(lines) == 10
    summary = (out / "summary.txt").read_text()
    assert "final_simple_regret=" in summary


def test_grid_command(tmp_path, sino_file, capsys):
    assert run("grid", sino_file, "--m", 2, "--out", tmp_path / "g") == 0
    lines = (tmp_path / "g" / "landscape.csv").read_text().splitlines()
    assert len(lines) == 5
    assert "best_pique=" in capsys.readouterr().out


def test_fbp_sidecar_and_determinism(tmp_path, sino_file):
    for name in ("a.vol", "b.vol"):
        assert run("fbp", sino_file, "--rho", 4, "--omega0", 0.8, "--out", tmp_path / name) == 0
    assert (tmp_path / "a.vol").read_bytes() == (tmp_path / "b.vol").read_bytes()
    meta = fileio.read_meta(tmp_path / "a.vol")
    assert meta["rho"] == "4.0" and meta["omega0"] == "0.8"
    assert fileio.read_volume(tmp_path / "a.vol").shape == (2, 64, 64)


def test_fbp_parameter_validation(tmp_path, sino_file):
    assert run("fbp", sino_file, "--rho", 11, "--omega0", 0.5, "--out", tmp_path / "x.vol") == 1
    assert run("fbp", sino_file, "--rho", 3, "--omega0", 0.05, "--out", tmp_path / "x.vol") == 1


def test_roundtrip_through_files(tmp_path):
    ph, sino, rec = tmp_path / "ph.vol", tmp_path / "s.vol", tmp_path / "r.vol"
    assert run("phantom", "--size", 128, "--out", ph) == 0
    assert run("radon", ph, "--angles", 180, "--out", sino) == 0
    assert run("fbp", sino, "--rho", 4, "--omega0", 0.8, "--out", rec) == 0
    truth = fileio.read_volume(ph)[0]
    got = fileio.read_volume(rec)[0]
    inside = truth > 0
    rel = np.sqrt(np.mean((got - truth)[inside] ** 2) / np.mean(truth[inside] ** 2))
    assert rel <= 0.25


def test_pique_csv(tmp_path, capsys):
    vol = np.repeat(shepp_logan(64)[None], 3, axis=0)
    vol[2] = 0.7
    path = tmp_path / "v.vol"
    fileio.write_volume(path, vol)
    assert run("pique", path, "--csv", tmp_path / "p.csv") == 0
    lines = (tmp_path / "p.csv").read_text().splitlines()
    assert capsys.readouterr().out.splitlines() == lines
    assert lines[0] == "slice,pique"
    rows = [float(ln.split(",")[1]) for ln in lines[1:4]]
    assert rows[0] == rows[1]
    assert lines[3] == "2,100.000000"
    assert lines[4].startswith("mean,")
    assert abs(float(lines[4].split(",")[1]) - np.mean(rows)) <= 1e-6


def test_pique_undersized(tmp_path):
    path = tmp_path / "small.vol"
    fileio.write_volume(path, np.random.default_rng(0).normal(size=(1, 16, 16)))
    assert run("pique", path) == 1


def test_export_pgm(tmp_path):
    vol = np.stack([np.full((40, 50), 3.0), np.arange(2000.0).reshape(40, 50)])
    src = tmp_path / "v.vol"
    fileio.write_volume(src, vol)
    assert run("export", src, "--slice", 0, "--out", tmp_path / "flat.pgm") == 0
    raw = (tmp_path / "flat.pgm").read_bytes()
    header = b"P5\n50 40\n255\n"
    assert raw.startswith(header)
    assert len(raw) == len(header) + 50 * 40
    assert set(raw[len(header):]) == {0}
    assert run("export", src, "--slice", 1, "--out", tmp_path / "ramp.pgm") == 0
    px = np.frombuffer((tmp_path / "ramp.pgm").read_bytes()[len(header):], np.uint8)
    assert px[0] == 0 and px[-1] == 255
    assert run("export", src, "--slice", 2, "--out", tmp_path / "x.pgm") == 1


def test_usage_errors_exit_1(capsys):
    assert run("bogus") == 1
    assert run("fbp") == 1
    assert run() == 1


def test_numeric_failure_exit_3(tmp_path, sino_file, monkeypatch):
    def boom(*args, **kwargs):
        raise ConditioningError("kernel matrix not factorizable", condition_number=1e18)

    monkeypatch.setattr(cli, "tune", boom)
    assert run("tune", sino_file, "--budget", 5, "--init", "four", "--grid-m", 20, "--out", tmp_path / "o") == 3
