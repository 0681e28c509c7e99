import json
import logging
import math

import pandas as pd
import pytest

import cli


def _run(*argv):
    return cli.main([str(a) for a in argv])


def _load(path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


@pytest.mark.parametrize("alpha,expected", [(60, -0.5), (0, -1.0), (90, 0.0)])
def test_correlate_values(tmp_path, alpha, expected):
    out = tmp_path / "corr.json"
    assert _run("correlate", "--alpha", alpha, "--out", out) == 0
    data = _load(out)
    assert data["command"] == "correlate"
    assert data["tool_version"] == "1.0.0"
    assert data["parameters"]["alpha_deg"] == alpha
    assert data["values"]["value"] == pytest.approx(expected, abs=1e-12)
    assert sum(data["values"]["probabilities"].values()) == pytest.approx(1.0)


def test_correlate_to_stdout(capsys):
    assert _run("correlate", "--alpha", 60) == 0
    data = json.loads(capsys.readouterr().out)
    assert data["values"]["value"] == pytest.approx(-0.5)


def test_correlate_csv_format(tmp_path):
    out = tmp_path / "corr.csv"
    assert _run("correlate", "--alpha", 60, "--format", "csv", "--out", out) == 0
    frame = pd.read_csv(out)
    assert list(frame.columns) == ["field", "value"]
    row = frame.loc[frame["field"] == "values.value", "value"].iloc[0]
    assert float(row) == pytest.approx(-0.5)


def test_parse_errors_name_the_flag(capsys):
    assert _run("correlate") == 2
    assert "--alpha" in capsys.readouterr().err
    assert _run("correlate", "--alpha", 10, "--seed", -3) == 2
    assert "--seed" in capsys.readouterr().err
    assert _run("simulate", "--trials", 0) == 2
    assert "--trials" in capsys.readouterr().err


def test_out_of_range_angle_is_validation_error(tmp_path, capsys, caplog):
    caplog.set_level(logging.WARNING)
    assert _run("correlate", "--alpha", 200, "--out", tmp_path / "x.json") == 2
    assert "polar" in capsys.readouterr().err
    assert any("Validation error" in rec.message for rec in caplog.records)
    assert not (tmp_path / "x.json").exists()


@pytest.mark.parametrize(
    "angles,expected,verdict",
    [((0, 45, 90), 1.414213562, "violated"), ((0, 0, 0), 1.0, "boundary"), ((0, 60, 120), 1.5, "violated")],
)
def test_bell_analytic(tmp_path, angles, expected, verdict):
    out = tmp_path / "bell.json"
    assert _run("bell", *angles, "--out", out) == 0
    values = _load(out)["values"]
    assert values["analytic"] == pytest.approx(expected, abs=1e-9)
    assert values["analytic_verdict"] == verdict
    assert "monte_carlo" not in values


@pytest.mark.parametrize("model", ["local", "collapse"])
def test_bell_monte_carlo(tmp_path, model):
    out = tmp_path / "bell.json"
    assert _run("bell", 0, 45, 90, "--trials", 1_000_000, "--seed", 7, "--model", model, "--out", out) == 0
    data = _load(out)
    mc = data["values"]["monte_carlo"]
    assert mc["value"] == pytest.approx(math.sqrt(2.0), abs=0.01)
    assert mc["verdict"] == "violated"
    assert data["parameters"]["model"] == model


def test_simulate_writes_trials_and_counts(tmp_path, caplog):
    caplog.set_level(logging.INFO)
    out = tmp_path / "run.csv"
    assert _run("simulate", "--trials", 2_000, "--seed", 3, "--out", out) == 0
    frame = pd.read_csv(out, dtype=str)
    assert list(frame.columns) == [
        "trial", "sa", "sb", "alpha_a_deg", "beta_a_deg", "alpha_b_deg", "beta_b_deg", "model", "seed",
    ]
    assert len(frame) == 2_000
    assert set(frame["sa"]) <= {"+1", "-1"}

    counts = _load(tmp_path / "run.counts.json")
    assert counts["parameters"]["seed"] == 3
    values = counts["values"]
    assert values["n_trials"] == 2_000
    # singlet, both axes z
    assert values["c_pp"] == 0 and values["c_mm"] == 0
    assert any("simulate" in rec.message for rec in caplog.records)


def test_simulate_single_trial(tmp_path):
    out = tmp_path / "one.csv"
    assert _run("simulate", "--trials", 1, "--out", out) == 0
    assert len(pd.read_csv(out)) == 1


def test_simulate_is_byte_identical(tmp_path):
    paths = []
    for name in ("a", "b"):
        out = tmp_path / f"{name}.csv"
        assert _run("simulate", "--trials", 5_000, "--seed", 11, "--alpha-b", 60, "--model", "collapse", "--out", out) == 0
        paths.append(out)
    assert paths[0].read_bytes() == paths[1].read_bytes()
    assert (tmp_path / "a.counts.json").read_bytes() == (tmp_path / "b.counts.json").read_bytes()


def test_simulate_compare_reports_chi_square(tmp_path):
    out = tmp_path / "cmp.csv"
    counts = tmp_path / "cmp_counts.json"
    assert _run(
        "simulate", "--trials", 100_000, "--seed", 5, "--alpha-b", 60, "--compare", "--counts", counts, "--out", out
    ) == 0
    comparison = _load(counts)["values"]["comparison"]
    assert comparison["model"] == "collapse"
    assert 0.0 <= comparison["p_value"] <= 1.0
    assert comparison["dof"] == 3


def test_simulate_unwritable_path(tmp_path):
    out = tmp_path / "missing_dir" / "run.csv"
    assert _run("simulate", "--trials", 10, "--out", out) == 1


def test_simulate_unwritable_counts_writes_nothing(tmp_path):
    out = tmp_path / "run.csv"
    counts = tmp_path / "missing_dir" / "counts.json"
    assert _run("simulate", "--trials", 10, "--out", out, "--counts", counts) == 1
    assert not out.exists()


def test_simulate_negative_zero_angle_serializes_as_zero(tmp_path):
    out = tmp_path / "run.csv"
    assert _run("simulate", "--trials", 5, "--alpha-b=-0", "--beta-b=-0", "--out", out) == 0
    text = out.read_text()
    assert "-0.000000000" not in text
    assert "-0.0" not in (tmp_path / "run.counts.json").read_text()


def test_estimate_round_trip(tmp_path):
    out = tmp_path / "run.csv"
    assert _run("simulate", "--trials", 100_000, "--seed", 9, "--alpha-b", 60, "--out", out) == 0
    report = tmp_path / "estimate.json"
    assert _run("estimate", tmp_path / "run.counts.json", "--out", report) == 0
    values = _load(report)["values"]
    assert abs(values["replica"]["value"] - 0.5) <= 4 * values["replica"]["std_error"]
    assert values["agrees"] is True
    assert values["balanced_marginals"] is True
    assert set(values["channels"]) == {"pp", "pm", "mp", "mm"}


def test_estimate_hand_written_table(tmp_path):
    table = {
        "n_trials": 200, "n_a_plus": 100, "n_a_minus": 100, "n_b_plus": 100, "n_b_minus": 100,
        "c_pp": 50, "c_pm": 50, "c_mp": 50, "c_mm": 50,
    }
    path = tmp_path / "table.json"
    path.write_text(json.dumps(table))
    report = tmp_path / "estimate.json"
    assert _run("estimate", path, "--out", report) == 0
    assert _load(report)["values"]["channels"]["pm"]["value"] == pytest.approx(0.5)


def test_estimate_empty_channel_reported_as_null(tmp_path, caplog):
    caplog.set_level(logging.WARNING)
    table = {
        "n_trials": 10, "n_a_plus": 10, "n_a_minus": 0, "n_b_plus": 10, "n_b_minus": 0,
        "c_pp": 10, "c_pm": 0, "c_mp": 0, "c_mm": 0,
    }
    path = tmp_path / "table.json"
    path.write_text(json.dumps(table))
    report = tmp_path / "estimate.json"
    assert _run("estimate", path, "--out", report) == 0
    values = _load(report)["values"]
    assert values["channels"]["pm"] is None
    assert values["undefined_channels"] == ["pm", "mp", "mm"]
    assert values["channels"]["pp"]["value"] == pytest.approx(1.0)
    assert values["replica"]["value"] == pytest.approx(-1.0)
    assert any("channel pm" in rec.message for rec in caplog.records)


def test_estimate_after_single_trial(tmp_path):
    out = tmp_path / "one.csv"
    assert _run("simulate", "--trials", 1, "--seed", 4, "--out", out) == 0
    report = tmp_path / "estimate.json"
    assert _run("estimate", tmp_path / "one.counts.json", "--out", report) == 0
    values = _load(report)["values"]
    # singlet along z,z: exactly one of pm / mp fired
    assert len(values["undefined_channels"]) == 3
    assert values["replica"]["value"] == pytest.approx(1.0)
    assert values["direct"]["value"] == pytest.approx(-1.0)
    assert values["agrees"] is True


def test_estimate_malformed_table(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"n_trials": 10, "n_a_plus": 5}))
    assert _run("estimate", path) == 2
    assert "n_a_minus" in capsys.readouterr().err

    path.write_text("{not json")
    assert _run("estimate", path) == 2

    assert _run("estimate", tmp_path / "nowhere.json") == 1


@pytest.mark.parametrize("model,expected", [("local", 1.0), ("collapse", 0.0)])
def test_fringe_visibility(tmp_path, model, expected):
    out = tmp_path / "fringe.csv"
    assert _run("fringe", "--model", model, "--idler", "l", "--gamma", 30, "--out", out) == 0
    frame = pd.read_csv(out)
    assert list(frame.columns) == ["x_m", "intensity"]
    assert len(frame) == 1001
    report = _load(tmp_path / "fringe.visibility.json")["values"]
    assert report["visibility"] == pytest.approx(expected, abs=1e-9)
    assert report["model"] == model
    assert report["idler_outcome"] == "l"
    assert report["gamma"] == pytest.approx(math.radians(30))


def test_fringe_which_path_bound(tmp_path):
    report = tmp_path / "vis.json"
    assert _run("fringe", "--which-path", 0.99, "--report", report, "--out", tmp_path / "f.csv") == 0
    assert _load(report)["values"]["visibility_bound"] == pytest.approx(0.01)


def test_fringe_polarization_experiment(tmp_path):
    report = tmp_path / "vis.json"
    assert _run(
        "fringe", "--experiment", "polarization", "--idler", "H", "--model", "collapse",
        "--report", report, "--out", tmp_path / "f.csv",
    ) == 0
    assert _load(report)["values"]["visibility"] == pytest.approx(0.0, abs=1e-9)
    assert _run("fringe", "--experiment", "polarization", "--idler", "u", "--out", tmp_path / "g.csv") == 2


def test_sweep_analytic_column(tmp_path):
    out = tmp_path / "sweep.csv"
    assert _run("sweep", "--alpha-min", 0, "--alpha-max", 180, "--steps", 5, "--trials", 1_000, "--out", out) == 0
    frame = pd.read_csv(out)
    assert list(frame.columns) == ["alpha_deg", "analytic_E", "mc_E", "mc_stderr"]
    expected = [-1.0, -0.7071067812, 0.0, 0.7071067812, 1.0]
    assert frame["analytic_E"].tolist() == pytest.approx(expected, abs=1e-10)
    for alpha, analytic in zip(frame["alpha_deg"], frame["analytic_E"]):
        assert analytic == pytest.approx(-math.cos(math.radians(alpha)), abs=1e-12)


@pytest.mark.parametrize("model", ["local", "collapse"])
def test_sweep_monte_carlo_within_five_sigma(tmp_path, model):
    out = tmp_path / "sweep.csv"
    assert _run("sweep", "--steps", 7, "--trials", 100_000, "--model", model, "--out", out) == 0
    frame = pd.read_csv(out)
    bound = 5 / math.sqrt(100_000)
    assert ((frame["mc_E"] - frame["analytic_E"]).abs() <= bound).all()


def test_sweep_writes_settings_next_to_csv(tmp_path):
    out = tmp_path / "sweep.csv"
    assert _run("sweep", "--steps", 3, "--trials", 100, "--seed", 9, "--model", "collapse", "--out", out) == 0
    assert len(pd.read_csv(out)) == 3
    settings = _load(tmp_path / "sweep.sweep.json")
    assert settings["command"] == "sweep"
    assert settings["tool_version"] == "1.0.0"
    assert settings["parameters"]["seed"] == 9
    assert settings["parameters"]["model"] == "collapse"
    assert settings["parameters"]["n_trials"] == 100
    assert len(settings["values"]["rows"]) == 3


def test_sweep_json_output_has_no_companion(tmp_path):
    out = tmp_path / "sweep.json"
    assert _run("sweep", "--steps", 2, "--trials", 50, "--format", "json", "--out", out) == 0
    assert _load(out)["parameters"]["n_trials"] == 50
    assert not (tmp_path / "sweep.sweep.json").exists()


def test_sweep_rejects_degenerate_range(capsys):
    assert _run("sweep", "--alpha-min", 30, "--alpha-max", 30, "--steps", 3) == 2
    assert "alpha" in capsys.readouterr().err
    assert _run("sweep", "--steps", 1) == 2


@pytest.mark.parametrize("idler,model,mean", [("L", "collapse", 1.0), ("R", "collapse", -1.0), ("L", "local", 0.0)])
def test_torque(tmp_path, idler, model, mean):
    out = tmp_path / "torque.json"
    assert _run("torque", "--idler", idler, "--model", model, "--out", out) == 0
    values = _load(out)["values"]
    assert values["mean_hbar"] == pytest.approx(mean, abs=1e-12)
    assert values["discrimination_gap_hbar"] == pytest.approx(1.0, abs=1e-12)


def test_internal_failure_is_logged_not_raised(monkeypatch, capsys, caplog):
    def broken(idler, model):
        raise RuntimeError("joint expectation forms disagree")

    monkeypatch.setattr(cli, "predicted_signal_angular_momentum", broken)
    caplog.set_level(logging.ERROR)
    assert _run("torque", "--idler", "L") == 1
    err = capsys.readouterr().err
    assert "forms disagree" in err
    assert "Traceback" not in err
    assert any("torque failed" in rec.message for rec in caplog.records)
