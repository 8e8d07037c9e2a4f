import csv
import subprocess
import sys

import numpy as np
import pytest

from phmor.bench_io import read_system, write_system
from phmor.cli import EXIT_DOMAIN, EXIT_OK, EXIT_USAGE, main, read_manifest, write_manifest
from phmor.systems import LtiSystem, PhSystem, validate_ph


@pytest.fixture
def ex51(tmp_path):
    fom = tmp_path / "fom.phm"
    rom = tmp_path / "rom.ltx"
    assert main(["gen", "paper-example", "--which", "ex5_1", "-o", str(fom)]) == EXIT_OK
    write_system(LtiSystem(-2.0, 6.0, 6.0, 1.0), rom)
    return fom, rom


def test_manifest_roundtrip(tmp_path):
    p = tmp_path / "m.manifest"
    write_manifest(p, a=1, b=[1, 2], c="x=y")
    assert read_manifest(p) == {"a": "1", "b": "1,2", "c": "x=y"}


def test_gen_msd_writes_manifest(tmp_path):
    out = tmp_path / "msd.phm"
    assert main(["gen", "msd", "--n-masses", "4", "-m", "1", "-o", str(out)]) == EXIT_OK
    sysobj = read_system(out)
    assert sysobj.n == 8 and sysobj.m == 1
    man = read_manifest(str(out) + ".manifest")
    assert man["command"] == "gen" and man["n_masses"] == "4" and "wall_time_s" in man
    assert man["mass"] == "4.0"


def test_validate(tmp_path, ex51, capsys):
    fom, rom = ex51
    assert main(["validate", str(fom)]) == EXIT_OK
    bad = tmp_path / "bad.phm"
    write_system(PhSystem.from_blocks(J=np.eye(1), R=-np.eye(1), Q=np.eye(1), G=[[1.0]]), bad)
    assert main(["validate", str(bad)]) == EXIT_DOMAIN
    assert "not a valid" in capsys.readouterr().out
    assert main(["validate", str(rom)]) == EXIT_USAGE


def test_minreal(tmp_path, capsys):
    src = tmp_path / "ex41.phm"
    out = tmp_path / "min.phm"
    assert main(["gen", "paper-example", "--which", "ex4_1", "-o", str(src)]) == EXIT_OK
    assert main(["minreal", str(src), "-o", str(out)]) == EXIT_OK
    text = capsys.readouterr().out
    assert "(2, 0, 0, 0)" in text
    assert read_system(out).n == 2
    assert read_manifest(str(out) + ".manifest")["dims"] == "2,0,0,0"


def test_reduce_prbt_balanced(tmp_path):
    src = tmp_path / "ex55.ltx"
    out = tmp_path / "rom.phm"
    assert main(["gen", "paper-example", "--which", "ex5_5", "-o", str(src)]) == EXIT_OK
    assert main(["reduce", str(src), "-r", "1", "-o", str(out)]) == EXIT_OK
    rom = read_system(out)
    assert rom.ph.Q[0, 0] == pytest.approx(0.5, abs=1e-12)
    assert rom.ph.R[0, 0] == pytest.approx(4.0, abs=1e-12)
    assert rom.ph.G[0, 0] == pytest.approx(6.0, abs=1e-12)
    assert rom.ph.P[0, 0] == pytest.approx(2.0, abs=1e-12)


def test_energy_match_scalar(ex51, tmp_path, capsys):
    fom, rom = ex51
    out = tmp_path / "em.phm"
    sdp = tmp_path / "em.sdp"
    code = main(["energy-match", str(fom), str(rom), "-o", str(out), "--sdp-export", str(sdp)])
    assert code == EXIT_OK
    text = capsys.readouterr().out
    assert "Q_opt = 0.9467455" in text
    em = read_system(out)
    assert em.ph.Q[0, 0] == pytest.approx(160 / 169, abs=1e-6)
    assert validate_ph(em)
    assert sdp.read_text().startswith("EMSDP1 1 1 1\n")
    man = read_manifest(str(out) + ".manifest")
    assert float(man["cost_after"]) <= float(man["cost_before"])


def test_energy_match_bad_schedule(ex51, tmp_path):
    fom, rom = ex51
    code = main(["energy-match", str(fom), str(rom), "-o", str(tmp_path / "x.phm"),
                 "--alpha-schedule", "1e-3,1e-2"])
    assert code == EXIT_USAGE


def test_h2(ex51, tmp_path, capsys):
    fom, _ = ex51
    assert main(["h2", str(fom), str(fom)]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert [ln.split(":")[0] for ln in lines] == ["io", "ham", "extended"]
    assert float(lines[0].split("abs=")[1].split()[0]) < 1e-6


def test_sweep_and_simulate(tmp_path):
    fom = tmp_path / "msd.phm"
    out = tmp_path / "sweep.csv"
    assert main(["gen", "msd", "--n-masses", "5", "-o", str(fom)]) == EXIT_OK
    assert main(["sweep", str(fom), "--orders", "2,4", "-o", str(out)]) == EXIT_OK
    with open(out) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 4
    assert {r["method"] for r in rows} == {"prbt", "phirka"}
    for r in rows:
        assert float(r["h2_ham_abs"]) <= float(r["h2_ham_abs_pre"]) * (1 + 1e-9)
    traj = tmp_path / "traj.csv"
    assert main(["simulate", str(fom), "--tf", "1", "--dt", "0.1", "--input", "step",
                 "-o", str(traj)]) == EXIT_OK
    with open(traj) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t", "y1", "y2", "y_H"]
    assert len(rows) == 12


def test_simulate_lti_input(tmp_path):
    src = tmp_path / "ex55.ltx"
    main(["gen", "paper-example", "--which", "ex5_5", "-o", str(src)])
    out = tmp_path / "t.csv"
    assert main(["simulate", str(src), "--tf", "0.5", "-o", str(out)]) == EXIT_OK


@pytest.mark.parametrize("argv", [
    [],
    ["bogus"],
    ["validate", "/nonexistent/file.phm"],
    ["sweep", "x.phm", "--orders", "a,b", "-o", "y.csv"],
])
def test_usage_errors(argv, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    if argv[:1] == ["sweep"]:
        main(["gen", "msd", "--n-masses", "3", "-o", "x.phm"])
    assert main(argv) == EXIT_USAGE


def test_truncated_file(tmp_path, capsys):
    p = tmp_path / "t.phm"
    p.write_text("PHMX1 2 1\nJ\n0 1\n")
    assert main(["validate", str(p)]) == EXIT_USAGE
    assert "line" in capsys.readouterr().err


def test_sweep_order_out_of_range(tmp_path):
    fom = tmp_path / "msd.phm"
    main(["gen", "msd", "--n-masses", "2", "-o", str(fom)])
    assert main(["sweep", str(fom), "--orders", "9", "-o", str(tmp_path / "s.csv")]) == EXIT_USAGE


def test_console_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "phmor.cli", "--version"], capture_output=True,
                         text=True)
    assert out.returncode == 0 and out.stdout.startswith("phmor")
