import csv
import io
import math
from pathlib import Path

import pytest

from spiralsweep.cli import main, parse_range, UsageError

GOLDEN = Path(__file__).parent / "golden"
REF = ["--R0", "100", "--r", "10", "--VT", "1"]


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def table(text):
    lines = text.splitlines()
    assert lines[0] == "# schema=1"
    return list(csv.DictReader(io.StringIO("\n".join(lines[1:]))))


@pytest.mark.parametrize(
    "golden,argv",
    [
        ("critical.txt", ["critical", *REF]),
        ("critical.csv", ["critical", *REF, "--format", "csv"]),
        ("schedule_drifting.csv", ["schedule", *REF, "--deltaV", "1", "--format", "csv"]),
        ("schedule_improved.csv", ["schedule", *REF, "--deltaV", "1", "--protocol", "improved", "--format", "csv"]),
    ],
)
def test_golden(capsys, golden, argv):
    code, out, _ = run(capsys, *argv)
    assert code == 0
    assert out.encode() == (GOLDEN / golden).read_bytes()


def test_critical_values(capsys):
    code, out, _ = run(capsys, "critical", *REF)
    assert code == 0
    for value in ("31.4159", "33.4294", "59.6435", "63.8319"):
        assert value in out


def test_critical_missing_flag(capsys):
    code, _, err = run(capsys, "critical", "--R0", "100", "--r", "10")
    assert code == 2
    assert "usage" in err and "--VT" in err


def test_bad_flag_is_usage_error(capsys):
    code, _, err = run(capsys, "critical", *REF, "--format", "xml")
    assert code == 2
    assert "usage" in err


def test_invalid_scenario(capsys):
    code, _, err = run(capsys, "critical", "--R0", "15", "--r", "10", "--VT", "1")
    assert code == 2
    assert "sensor does not fit" in err


def test_out_file_lf_endings(capsys, tmp_path):
    target = tmp_path / "crit.csv"
    assert main(["critical", *REF, "--format", "csv", "--out", str(target)]) == 0
    data = target.read_bytes()
    assert b"\r" not in data
    assert data == (GOLDEN / "critical.csv").read_bytes()


def test_schedule_footer(capsys):
    code, out, _ = run(capsys, "schedule", *REF, "--deltaV", "1", "--protocol", "improved", "--format", "csv")
    assert code == 0
    footer = dict(line.split(",") for line in out.split("quantity,value\n")[1].splitlines())
    assert footer["N"] == "16"
    assert float(footer["T_total"]) == pytest.approx(227.449, abs=1e-3)


def test_schedule_below_critical(capsys):
    code, _, err = run(capsys, "schedule", *REF, "--deltaV", "0")
    assert code == 3
    assert "59.6435" in err
    code, _, err = run(capsys, "schedule", *REF, "--Vs", "40", "--protocol", "drifting")
    assert code == 3
    assert "59.6435" in err


def test_schedule_circular_rejected(capsys):
    code, _, _ = run(capsys, "schedule", *REF, "--deltaV", "1", "--protocol", "circular")
    assert code == 2


def test_schedule_infeasible_endgame(capsys):
    # drifting at alpha = 2 starts inside 2r; the end game cannot finish
    code, out, err = run(capsys, "schedule", "--R0", "20", "--r", "10", "--VT", "1", "--deltaV", "1", "--format", "csv")
    assert code == 3
    assert "feasible,false" in out
    assert "infeasible" in err


def test_config_file_and_override(capsys, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# reference scenario\nR0 = 100\nr=10\nVT=1\nformat=csv\n")
    code, out, _ = run(capsys, "critical", "--config", str(cfg))
    assert code == 0
    assert out.encode() == (GOLDEN / "critical.csv").read_bytes()
    code, out, _ = run(capsys, "critical", "--config", str(cfg), "--R0", "200")
    assert table(out)[0]["drifting_spiral"] == "122.499"
    cfg.write_text("R0=100\nbogus=1\n")
    code, _, err = run(capsys, "critical", "--config", str(cfg))
    assert code == 2 and "bogus" in err


def test_study_alpha(capsys):
    code, out, _ = run(capsys, "study", "--r", "10", "--VT", "1", "--alpha", "2:100:1",
                       "--protocol", "drifting", "--format", "csv")
    assert code == 0
    rows = table(out)
    assert len(rows) == 99
    N = [int(float(r["N_drifting"])) for r in rows]
    T = [float(r["T_containment_drifting"]) for r in rows]
    assert all(a <= b for a, b in zip(N, N[1:]))
    assert all(a <= b for a, b in zip(T, T[1:]))


def test_study_above_circular(capsys):
    code, out, _ = run(capsys, "study", *REF, "--deltaV", "0.5:10:0.5", "--fig14", "--format", "csv")
    assert code == 0
    rows = table(out)
    assert len(rows) == 20
    code, again, _ = run(capsys, "study", *REF, "--deltaV", "0.5:10:0.5", "--above-circular", "--format", "csv")
    assert again == out
    for r in rows:
        assert float(r["Vs_improved"]) == float(r["Vs_drifting"])
        assert float(r["T_total_improved"]) < float(r["T_total_drifting"])


def test_study_deltaV_trend(capsys):
    code, out, _ = run(capsys, "study", *REF, "--deltaV", "0.5:10:0.5", "--protocol", "drifting,improved",
                       "--format", "csv")
    assert code == 0
    rows = table(out)
    for p in ("drifting", "improved"):
        N = [float(r[f"N_{p}"]) for r in rows]
        T = [float(r[f"T_total_{p}"]) for r in rows]
        assert all(a >= b for a, b in zip(N, N[1:]))
        assert all(a >= b for a, b in zip(T, T[1:]))


def test_study_single_point_and_jobs(capsys):
    code, out, _ = run(capsys, "study", *REF, "--deltaV", "1:1:0.5", "--format", "csv")
    assert code == 0 and len(table(out)) == 1
    code, serial, _ = run(capsys, "study", *REF, "--deltaV", "0.5:3:0.5", "--format", "csv")
    code, parallel, _ = run(capsys, "study", *REF, "--deltaV", "0.5:3:0.5", "--format", "csv", "--jobs", "2")
    assert serial == parallel


@pytest.mark.parametrize("rng", ["3:1:0.5", "1:3:0", "1:3", "a:b:c"])
def test_study_bad_range(capsys, rng):
    code, _, _ = run(capsys, "study", *REF, "--deltaV", rng)
    assert code == 2


def test_parse_range():
    assert parse_range("0.5:10:0.5", "x")[-1] == pytest.approx(10)
    assert len(parse_range("0.5:10:0.5", "x")) == 20
    assert parse_range("4", "x") == [4.0]
    with pytest.raises(UsageError):
        parse_range("2:1:1", "x")


def test_simulate_anti_tunneling(capsys):
    code, _, err = run(capsys, "simulate", "--R0", "20", "--r", "4", "--VT", "1", "--Vs", "30", "--dt", "0.01")
    assert code == 2
    assert "dt <" in err


@pytest.mark.slow
def test_simulate_success_and_frames(capsys, tmp_path):
    frames = tmp_path / "frames"
    code, out, _ = run(capsys, "simulate", "--R0", "20", "--r", "4", "--VT", "1", "--protocol", "improved",
                       "--deltaV", "2", "--cell-size", "0.4", "--frames", str(frames), "--frame-every", "200")
    assert code == 0
    assert "DetectionComplete" in out
    assert "relative_error" in out
    assert (frames / "frame_000000.pgm").exists()


@pytest.mark.slow
def test_simulate_below_critical(capsys):
    code, out, _ = run(capsys, "simulate", "--R0", "20", "--r", "4", "--VT", "1", "--protocol", "drifting",
                       "--Vs", "20", "--cell-size", "0.4", "--format", "csv")
    assert code in (3, 4)
    kind = table(out)[0]["verdict"]
    assert kind in ("EscapeWitness", "TimedOut")
    assert math.isnan(float(table(out)[0]["analytic_total"]))
