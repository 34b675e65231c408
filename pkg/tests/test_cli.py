"""Command-line surface: round trips, exit codes, deterministic outputs."""

import json

import pytest

from diracdrive.cli import main


def write_config(tmp_path, **overrides):
    config = {
        "n_modes": 32,
        "dt": 1e-3,
        "schedule": {
            "T": 0.2,
            "n_diracs": 1,
            "segments": [
                {
                    "kind": "hold",
                    "t_begin": 0.0,
                    "t_end": 0.2,
                    "eta": {"kind": "const", "value": 40.0},
                    "positions": [{"kind": "const", "x0": 0.4, "x1": 0.4}],
                }
            ],
        },
        "initial": [[1.0, 0.0], [0.5, 0.5]],
        "out": str(tmp_path / "traj.csv"),
    }
    config.update(overrides)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(config))
    return path


def test_evolve_writes_trajectory_and_manifest(tmp_path, capsys):
    config = write_config(tmp_path, snapshots={str(tmp_path / "final.csv"): 0.2})
    assert main(["evolve", "--config", str(config)]) == 0
    lines = (tmp_path / "traj.csv").read_text().splitlines()
    assert lines[0].startswith("time,eta,a_1,norm_sq")
    assert (tmp_path / "manifest.json").exists()
    snapshot = (tmp_path / "final.csv").read_text().splitlines()
    assert snapshot[0] == "mode_index,re,im"
    assert "norm drift" in capsys.readouterr().out


def test_evolve_negative_dt_exits_2(tmp_path, capsys):
    config = write_config(tmp_path, dt=-1e-3)
    assert main(["evolve", "--config", str(config)]) == 2
    assert "dt must be positive" in capsys.readouterr().err


def test_evolve_missing_key_exits_2(tmp_path, capsys):
    path = tmp_path / "broken.json"
    path.write_text(json.dumps({"n_modes": 8}))
    assert main(["evolve", "--config", str(path)]) == 2
    assert "error:" in capsys.readouterr().err


def test_evolve_warns_on_small_basis(tmp_path, capsys):
    config = write_config(tmp_path, n_modes=12)
    assert main(["evolve", "--config", str(config)]) == 0
    assert "warning" in capsys.readouterr().err


def test_plan_validate_evolve_round_trip(tmp_path, capsys):
    schedule_path = tmp_path / "schedule.json"
    summary_path = tmp_path / "plan.json"
    assert main([
        "plan", "--sigma", "2,3,1", "--out", str(schedule_path),
        "--summary", str(summary_path),
    ]) == 0
    assert main(["validate", "--schedule", str(schedule_path)]) == 0
    summary = json.loads(summary_path.read_text())
    assert summary["n_transition_sites"] == 2
    assert summary["final_positions"] == [0.31, 0.68]
    out = capsys.readouterr().out
    assert "x=0.35" in out and "x=0.69" in out

    config = write_config(tmp_path, schedule=str(schedule_path),
                          n_modes=40, dt=0.05,
                          initial=[[1.0, 0.0], [1.5, 0.0], [2.0, 0.0]])
    assert main(["evolve", "--config", str(config)]) == 0


def test_evolve_direct_flags_and_snapshot_initial(tmp_path):
    schedule_path = tmp_path / "hold.json"
    config = write_config(tmp_path)
    schedule_path.write_text(
        json.dumps(json.loads(config.read_text())["schedule"])
    )
    # build a snapshot to feed back in
    first = write_config(tmp_path, out=str(tmp_path / "first.csv"),
                         snapshots={str(tmp_path / "state.csv"): 0.2})
    assert main(["evolve", "--config", str(first)]) == 0
    assert main([
        "evolve", "--schedule", str(schedule_path), "--n-modes", "32",
        "--dt", "0.001", "--initial", str(tmp_path / "state.csv"),
        "--out", str(tmp_path / "second.csv"),
    ]) == 0
    assert (tmp_path / "second.csv").exists()


def test_evolve_initial_preset_name(tmp_path):
    config = write_config(tmp_path, initial="experiment1", n_modes=64)
    assert main(["evolve", "--config", str(config)]) == 0
    header, first = (tmp_path / "traj.csv").read_text().splitlines()[:2]
    norm_index = header.split(",").index("norm_sq")
    assert float(first.split(",")[norm_index]) == pytest.approx(7.25)


def test_plan_identity_has_no_transitions(tmp_path, capsys):
    assert main(["plan", "--sigma", "1,2,3", "--out", str(tmp_path / "s.json")]) == 0
    assert "0 transition sites" in capsys.readouterr().out


def test_plan_four_mode_transition_count(tmp_path, capsys):
    assert main([
        "plan", "--sigma", "2,4,3,1", "--out", str(tmp_path / "s4.json"),
        "--summary", str(tmp_path / "p4.json"),
    ]) == 0
    summary = json.loads((tmp_path / "p4.json").read_text())
    assert summary["n_transition_sites"] == 8


def test_plan_infeasible_exits_3(tmp_path, capsys):
    assert main(["plan", "--sigma", "2,1", "--out", str(tmp_path / "x.json")]) == 3
    assert "minimum feasible T" in capsys.readouterr().err


def test_validate_reports_violations(tmp_path, capsys):
    bad = {
        "T": 1.0,
        "n_diracs": 2,
        "segments": [
            {
                "kind": "hold", "t_begin": 0.0, "t_end": 1.0,
                "eta": {"kind": "const", "value": 5.0},
                "positions": [
                    {"kind": "const", "x0": 0.5, "x1": 0.5},
                    {"kind": "const", "x0": 0.505, "x1": 0.505},
                ],
            }
        ],
    }
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(bad))
    assert main(["validate", "--schedule", str(path)]) == 2
    assert "min_gap" in capsys.readouterr().out


def test_eigen_command(tmp_path, capsys):
    out = tmp_path / "eigen.csv"
    assert main([
        "eigen", "--eta", "2000", "--positions", "0.36,0.7",
        "--n-modes", "128", "--count", "3", "--out", str(out),
    ]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "time,k,lambda_k,participation"
    assert len(lines) == 4
    values = [float(line.split(",")[2]) for line in lines[1:]]
    assert values[0] == pytest.approx(76.15, abs=0.5)


def test_convergence_command_small(tmp_path, capsys):
    out = tmp_path / "conv.csv"
    assert main([
        "convergence", "--out", str(out),
        "--n-list", "16", "32", "--n-ref", "64", "--dt-list",
    ]) == 0
    rows = out.read_text().splitlines()
    assert rows[0] == "sweep,value,error"
    errors = [float(r.split(",")[2]) for r in rows[1:]]
    assert errors[0] > errors[1]


def test_byte_identical_reruns(tmp_path):
    config_a = write_config(tmp_path, out=str(tmp_path / "a.csv"))
    assert main(["evolve", "--config", str(config_a)]) == 0
    first = (tmp_path / "a.csv").read_bytes()
    config_b = write_config(tmp_path, out=str(tmp_path / "b.csv"))
    assert main(["evolve", "--config", str(config_b)]) == 0
    assert (tmp_path / "b.csv").read_bytes() == first

    plan_a, plan_b = tmp_path / "pa.json", tmp_path / "pb.json"
    assert main(["plan", "--sigma", "2,3,1", "--out", str(plan_a)]) == 0
    assert main(["plan", "--sigma", "2,3,1", "--out", str(plan_b)]) == 0
    assert plan_a.read_bytes() == plan_b.read_bytes()
