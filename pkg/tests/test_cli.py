"""Command-line layer: scenario plumbing, artifacts, exit codes, builtins."""

import cmath
import json
import math
import subprocess
import sys

import pytest

from basinlab.cli import EXIT_INTERNAL, EXIT_OK, EXIT_SCREENING, main
from basinlab.errors import MapConstructionError, ScreeningError
from basinlab.maps import load_builtin, load_map_file, parse_theta, resolve_map


def _read_csv(path):
    lines = path.read_text().splitlines()
    return lines[0], lines[1:]


# ---------------------------------------------------------------------------
# map sources

def test_builtins_resolve_with_exact_coefficients():
    b = load_builtin("z2")
    assert [c for c in b.map.numer.tolist()] == [0j, 0j, 1 + 0j]
    assert b.attractors[1].infinite
    b = load_builtin("basilica2")
    assert [c for c in b.map.numer.tolist()] == [0j, 0j, -2 + 0j, 0j, 1 + 0j]
    b = load_builtin("newton-cubic")
    assert len(b.attractors) == 3
    assert all(abs(abs(a.z) - 1.0) < 1e-12 for a in b.attractors)


def test_unknown_builtin_and_bad_theta():
    with pytest.raises(MapConstructionError, match="unknown builtin"):
        load_builtin("nope")
    with pytest.raises(MapConstructionError, match="rotation target"):
        parse_theta("one half")
    assert parse_theta("golden") == pytest.approx((math.sqrt(5) - 1) / 2, abs=1e-15)
    assert parse_theta("1/4") == 0.25


def test_map_file_roundtrip(tmp_path):
    payload = {
        "numerator": [0, [0.5, 0.0], 0.5],
        "denominator": [1],
        "attractors": [0, "inf"],
        "label": "half",
    }
    path = tmp_path / "map.json"
    path.write_text(json.dumps(payload))
    b = load_map_file(path)
    assert b.label == "half"
    assert b.attractors[1].infinite
    assert b.map.degree == 2


def test_map_file_autodetects_attractors(tmp_path):
    path = tmp_path / "map.json"
    path.write_text(json.dumps({"numerator": [0, 0.5, 0.5], "denominator": [1]}))
    b = load_map_file(path)
    assert len(b.attractors) == 2
    assert sum(1 for a in b.attractors if a.infinite) == 1
    assert any((not a.infinite) and abs(a.z) < 1e-12 for a in b.attractors)


def test_map_file_errors(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"numerator": [0,1')
    with pytest.raises(MapConstructionError, match="not valid JSON"):
        load_map_file(bad)
    with pytest.raises(MapConstructionError, match="cannot read"):
        load_map_file(tmp_path / "missing.json")
    nolist = tmp_path / "nolist.json"
    nolist.write_text(json.dumps({"numerator": [0, 0, 1]}))
    with pytest.raises(MapConstructionError, match="denominator"):
        load_map_file(nolist)
    with pytest.raises(MapConstructionError, match="exactly one"):
        resolve_map(None, None)
    with pytest.raises(MapConstructionError, match="exactly one"):
        resolve_map("z2", "also-a-file")


# ---------------------------------------------------------------------------
# subcommands, in process

def test_catalog_z2_eleven_junctions(tmp_path):
    out = tmp_path / "art"
    rc = main(["catalog", "--builtin", "z2", "--bound", "3", "--out", str(out)])
    assert rc == EXIT_OK
    header, rows = _read_csv(out / "catalog.csv")
    assert header == "angle1,angle2,junction_re,junction_im,period,abs_multiplier"
    assert len(rows) == 11
    junctions = {
        complex(float(r.split(",")[2]), float(r.split(",")[3])) for r in rows
    }
    # 1, the two primitive cube roots, the six primitive 7th roots
    assert len(junctions) == 9
    for k in range(7):
        assert any(abs(j - cmath.exp(2j * cmath.pi * k / 7)) < 1e-9 for j in junctions)


def test_catalog_reruns_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["catalog", "--builtin", "z2", "--bound", "2", "--out", str(a)]) == 0
    assert main(["catalog", "--builtin", "z2", "--bound", "2", "--out", str(b)]) == 0
    assert (a / "catalog.csv").read_bytes() == (b / "catalog.csv").read_bytes()


def test_basins_artifacts(tmp_path):
    out = tmp_path / "art"
    rc = main(
        ["basins", "--builtin", "z2", "--res", "64", "--out", str(out), "--threads", "2"]
    )
    assert rc == EXIT_OK
    ppm = (out / "basins_affine.ppm").read_bytes()
    assert ppm.startswith(b"P6\n64 64\n255\n")
    assert len(ppm) == len(b"P6\n64 64\n255\n") + 3 * 64 * 64
    header, rows = _read_csv(out / "basins.csv")
    assert header == "attractor,re,im,kind,cells_affine,cells_inverted"
    assert rows[0].startswith("0,0,0,superattracting,")
    assert rows[1].startswith("1,inf,0,superattracting,")
    cells = sum(int(r.split(",")[4]) for r in rows)
    assert cells == 64 * 64


def test_rays_land_on_circle(tmp_path, capsys):
    out = tmp_path / "art"
    rc = main(
        [
            "rays",
            "--builtin",
            "z2",
            "--angles",
            "0,1/7",
            "--out",
            str(out),
            "--json",
        ]
    )
    assert rc == EXIT_OK
    summary = json.loads(capsys.readouterr().out)
    assert len(summary["rays"]) == 4
    data = json.loads((out / "rays.json").read_text())
    assert all(r["landed"] for r in data)
    for r in data:
        z = complex(*r["landing"])
        assert abs(abs(z) - 1.0) < 1e-9
    inner = [r for r in data if r["basin"] == [0.0, 0.0] and r["angle"] == "1/7"]
    assert len(inner) == 1
    z = complex(*inner[0]["landing"])
    assert abs(z - cmath.exp(2j * cmath.pi / 7)) < 1e-9


def test_boundary_samples_on_circle(tmp_path):
    out = tmp_path / "art"
    rc = main(["boundary", "--builtin", "z2", "--res", "64", "--out", str(out)])
    assert rc == EXIT_OK
    header, rows = _read_csv(out / "boundary.csv")
    assert header.startswith("re,im,witness_i_re")
    assert len(rows) > 50
    for r in rows:
        parts = r.split(",")
        z = complex(float(parts[0]), float(parts[1]))
        assert abs(abs(z) - 1.0) < 1e-7


def test_mane_z2_certifies_immediately(tmp_path, capsys):
    out = tmp_path / "art"
    rc = main(
        ["mane", "--builtin", "z2", "--res", "64", "--out", str(out), "--json"]
    )
    assert rc == EXIT_OK
    summary = json.loads(capsys.readouterr().out)
    assert summary["certified_N"] == 1
    data = json.loads((out / "mane.json").read_text())
    assert data["certified_N"] == 1
    assert abs(data["per_n"][0][1] - 2.0) < 1e-9


def test_mane_newton_has_certificate(tmp_path):
    out = tmp_path / "art"
    rc = main(
        [
            "mane",
            "--builtin",
            "newton-cubic",
            "--res",
            "128",
            "--n-max",
            "20",
            "--out",
            str(out),
        ]
    )
    assert rc == EXIT_OK
    data = json.loads((out / "mane.json").read_text())
    assert data["certified_N"] is not None
    assert 1 <= data["certified_N"] <= 20


def test_closing_from_fixed_seed(tmp_path, capsys):
    out = tmp_path / "art"
    rc = main(
        [
            "closing",
            "--builtin",
            "z2",
            "--seed",
            "1,0",
            "--horizon",
            "6",
            "--out",
            str(out),
            "--json",
        ]
    )
    assert rc == EXIT_OK
    summary = json.loads(capsys.readouterr().out)
    assert summary["closed"] == summary["near_returns"] > 0
    assert summary["best"]["period"] == 1
    assert abs(summary["best"]["abs_multiplier"] - 2.0) < 1e-9
    header, rows = _read_csv(out / "closing.csv")
    assert header.startswith("seed_re,seed_im,L,")
    assert len(rows) == summary["closed"]


def test_pullback_basilica_fixed_chord(tmp_path):
    out = tmp_path / "art"
    rc = main(
        ["pullback", "--builtin", "basilica2", "--start", "0,0", "--out", str(out)]
    )
    assert rc == EXIT_OK
    data = json.loads((out / "pullback.json").read_text())
    assert data["period"] == 1
    alpha = (1 - math.sqrt(5)) / 2
    z = complex(*data["final_junction"])
    assert abs(z - alpha) < 1e-8
    gaps = [float(x) for x in (out / "pullback_gaps.txt").read_text().split()]
    assert len(gaps) == data["stages"]
    assert gaps[-1] < 1e-8


def test_ftheta_zero_target(tmp_path, capsys):
    out = tmp_path / "art"
    rc = main(
        [
            "ftheta",
            "--theta",
            "0",
            "--verify-n",
            "2000",
            "--period-max",
            "1",
            "--out",
            str(out),
            "--json",
        ]
    )
    assert rc == EXIT_OK
    summary = json.loads(capsys.readouterr().out)
    assert summary["rho"] == [1.0, 0.0]
    assert summary["theta_hat"] == 0.0
    assert summary["periodic_findings"] == 2
    data = json.loads((out / "ftheta.json").read_text())
    assert len(data["periodic_findings"]) == 2
    assert {f["period"] for f in data["periodic_findings"]} == {1}


def test_ftheta_golden_empty_findings(tmp_path):
    out = tmp_path / "art"
    rc = main(["ftheta", "--theta", "golden", "--out", str(out)])
    assert rc == EXIT_OK
    data = json.loads((out / "ftheta.json").read_text())
    assert data["periodic_findings"] == []
    assert abs(data["theta_hat"] - (math.sqrt(5) - 1) / 2) < 1e-4


# ---------------------------------------------------------------------------
# scenario validation, dry runs, exit codes

def test_dry_run_prints_config_and_writes_nothing(tmp_path, capsys, monkeypatch):
    monkeypatch.chdir(tmp_path)
    rc = main(["catalog", "--builtin", "z2", "--dry-run"])
    assert rc == EXIT_OK
    config = json.loads(capsys.readouterr().out)
    assert config["subcommand"] == "catalog"
    assert config["map"]["numerator"] == [[0.0, 0.0], [0.0, 0.0], [1.0, 0.0]]
    assert config["tolerances"]["junction"] == 1e-6
    assert not (tmp_path / "out").exists()


def test_dry_run_ftheta_defers_solving(capsys):
    rc = main(["basins", "--builtin", "ftheta:1/4", "--dry-run"])
    assert rc == EXIT_OK
    config = json.loads(capsys.readouterr().out)
    assert config["map"]["theta"] == 0.25
    assert config["map"]["resolved"] is False
    assert "numerator" not in config["map"]


def test_exit_codes(tmp_path, capsys, monkeypatch):
    assert main(["basins", "--builtin", "nope", "--out", str(tmp_path)]) == EXIT_INTERNAL
    assert (
        main(["basins", "--builtin", "z2", "--window", "2,-2,-2,2", "--out", str(tmp_path)])
        == EXIT_INTERNAL
    )
    assert (
        main(["basins", "--builtin", "z2", "--pair", "0,0", "--out", str(tmp_path)])
        == EXIT_INTERNAL
    )
    assert (
        main(["boundary", "--builtin", "z2", "--pair", "0,5", "--out", str(tmp_path)])
        == EXIT_INTERNAL
    )
    assert main(["ftheta", "--out", str(tmp_path)]) == EXIT_INTERNAL
    capsys.readouterr()

    def _screen(*a, **k):
        raise ScreeningError("sample 0 sits on a critical point")

    monkeypatch.setattr("basinlab.cli.mane_check", _screen)
    rc = main(["mane", "--builtin", "z2", "--res", "64", "--out", str(tmp_path / "s")])
    assert rc == EXIT_SCREENING
    assert "screening" in capsys.readouterr().err


def test_usage_errors_exit_one():
    with pytest.raises(SystemExit) as exc:
        main(["rays", "--builtin", "z2", "--badflag"])
    assert exc.value.code == EXIT_INTERNAL
    with pytest.raises(SystemExit) as exc:
        main(["rays", "--builtin", "z2", "--map", "x.json"])
    assert exc.value.code == EXIT_INTERNAL


def test_module_entry_point(tmp_path):
    out = tmp_path / "art"
    proc = subprocess.run(
        [
            sys.executable,
            "-m",
            "basinlab.cli",
            "catalog",
            "--builtin",
            "z2",
            "--bound",
            "1",
            "--out",
            str(out),
            "--json",
        ],
        capture_output=True,
        text=True,
        timeout=300,
    )
    assert proc.returncode == EXIT_OK
    summary = json.loads(proc.stdout)
    assert summary["rows"] == 1
    assert (out / "catalog.csv").exists()
