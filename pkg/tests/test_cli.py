"""End-to-end tests of the command-line interface."""

import csv
import io
import json
import math

import numpy as np
import pytest

from impactval.cli import main, parse_fraction, parse_grid


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_parse_fraction():
    assert parse_fraction("0.063") == 0.063
    assert parse_fraction("6.3%") == pytest.approx(0.063)
    assert parse_fraction(" 15% ") == pytest.approx(0.15)


def test_parse_grid():
    grid = parse_grid("0:0.3:4")
    assert np.allclose(grid, [0.0, 0.1, 0.2, 0.3])
    with pytest.raises(Exception):
        parse_grid("0:0.3")


def test_value_empty_position(capsys):
    code, out, _ = run(
        capsys, "value", "--Q", "0", "--p0", "100", "--sigma", "2%", "--V", "1e6",
        "--format", "json",
    )
    assert code == 0
    payload = json.loads(out)
    assert payload["mtm_value"] == 0.0
    assert payload["impact_adjusted_value"] == 0.0


def test_value_worked_example(capsys):
    # Q = 5% of cap, V = 0.5% of cap per day, sigma = 2%: impact ~ 6.3%,
    # haircut ~ 4.2%.
    code, out, _ = run(
        capsys, "value", "--Q", "5e7", "--p0", "1", "--sigma", "2%", "--V", "5e6",
        "--format", "json",
    )
    assert code == 0
    payload = json.loads(out)
    assert payload["impact"] == pytest.approx(0.02 * math.sqrt(10.0), rel=1e-9)
    assert payload["haircut"] == pytest.approx((2.0 / 3.0) * 0.0632455532, rel=1e-6)


def test_value_zero_volatility(capsys):
    code, out, _ = run(
        capsys, "value", "--Q", "1e6", "--p0", "10", "--sigma", "0", "--V", "1e6",
        "--format", "json",
    )
    assert code == 0
    payload = json.loads(out)
    assert payload["haircut"] == 0.0
    assert payload["mtm_value"] == payload["impact_adjusted_value"]


def test_value_text_output_mentions_warnings(capsys):
    code, out, _ = run(
        capsys, "value", "--Q", "1e8", "--p0", "1", "--sigma", "5%", "--V", "1e6"
    )
    assert code == 0
    assert "WARN_LARGE_IMPACT" in out


def test_value_missing_required_flags_exit_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["value", "--p0", "100"])
    assert exc.value.code == 2


def test_value_missing_params_exit_1(capsys):
    code, _, err = run(capsys, "value", "--Q", "1e6", "--p0", "10")
    assert code == 1
    assert "error:" in err


def test_trajectory_no_impact_is_linear(capsys):
    code, out, _ = run(
        capsys, "trajectory", "--lambda0", "9", "--impact", "0", "--grid", "11"
    )
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 11
    for row in rows:
        assert float(row["lambda_mtm"]) == pytest.approx(
            9.0 * (1.0 - float(row["x"])), abs=1e-12
        )


def test_trajectory_family_with_divergence(tmp_path, capsys):
    # The curve family: only the 0.19 trajectory carries divergence markers.
    for impact in ("0", "0.1", "0.15", "0.19"):
        out_file = tmp_path / f"traj_{impact}.csv"
        code, _, _ = run(
            capsys, "trajectory", "--lambda0", "9", "--impact", impact,
            "--grid", "201", "--out", str(out_file),
        )
        assert code == 0
        body = out_file.read_text()
        mtm_cells = [row["lambda_mtm"] for row in csv.DictReader(io.StringIO(body))]
        if impact == "0.19":
            assert "inf" in mtm_cells
        else:
            assert "inf" not in mtm_cells


def test_trajectory_from_position_flags(capsys):
    code, out, _ = run(
        capsys, "trajectory", "--Q", "1e6", "--p0", "10", "--L", "8888888.888888889",
        "--sigma", "15%", "--V", "1e6", "--grid", "5",
    )
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert float(rows[0]["lambda_mtm"]) == pytest.approx(9.0, rel=1e-6)


def test_trajectory_roundtrip_supercritical(capsys):
    code, out, _ = run(
        capsys, "trajectory", "--mode", "roundtrip", "--Q", "1e6", "--p0", "10",
        "--E0", "1111111.1111111112", "--sigma", "19%", "--V", "1e6", "--grid", "100",
    )
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 200  # entry leg + exit leg
    entry_adj = [row["lambda_adj"] for row in rows[:100]]
    assert "inf" in entry_adj
    entry_mtm = [row["lambda_mtm"] for row in rows[:100]]
    assert "inf" not in entry_mtm


def test_trajectory_roundtrip_requires_position(capsys):
    code, _, err = run(capsys, "trajectory", "--mode", "roundtrip", "--lambda0", "9")
    assert code == 1
    assert "roundtrip" in err


def test_critical_lambda0_only(capsys):
    code, out, _ = run(capsys, "critical", "--lambda0", "9", "--format", "json")
    assert code == 0
    payload = json.loads(out)
    assert payload["I_c"] == pytest.approx(1.0 / 6.0, rel=1e-12)


def test_critical_subcritical_report(capsys):
    code, out, _ = run(
        capsys, "critical", "--lambda0", "9", "--impact", "15%", "--format", "json"
    )
    assert code == 0
    payload = json.loads(out)
    assert payload["regime"] == "SUBCRITICAL"
    assert 0.0 < payload["x_star"] < 1.0
    assert payload["lambda_c"] == pytest.approx(10.0)


def test_critical_supercritical_report(capsys):
    code, out, _ = run(
        capsys, "critical", "--lambda0", "9", "--impact", "0.19", "--format", "json"
    )
    assert code == 0
    payload = json.loads(out)
    assert payload["regime"] == "SUPERCRITICAL"
    assert 0.0 < payload["x_c"] < 1.0


def test_critical_needs_inputs(capsys):
    code, _, err = run(capsys, "critical")
    assert code == 1
    assert "lambda0" in err


def test_bankruptcy_curve_csv(tmp_path, capsys):
    out_file = tmp_path / "curve.csv"
    code, _, _ = run(
        capsys, "bankruptcy", "--lambda0", "9", "--eta", "10",
        "--impact-grid", "0.1:0.25:4", "--trials", "200", "--sigma", "1%",
        "--seed", "77", "--out", str(out_file),
    )
    assert code == 0
    rows = list(csv.DictReader(out_file.open()))
    assert len(rows) == 4
    assert set(rows[0]) == {"calI", "p_bankrupt", "std_error", "p_bankrupt_noimpact"}
    probs = [float(r["p_bankrupt"]) for r in rows]
    assert probs[0] < 0.5 < probs[-1]


def test_bankruptcy_deterministic_given_seed(capsys):
    args = [
        "bankruptcy", "--lambda0", "9", "--eta", "10",
        "--impact-grid", "0.12:0.2:3", "--trials", "100", "--seed", "5",
    ]
    code_a, out_a, _ = run(capsys, *args)
    code_b, out_b, _ = run(capsys, *args)
    assert code_a == code_b == 0
    assert out_a == out_b


def test_bankruptcy_zero_noise_step(capsys):
    code, out, _ = run(
        capsys, "bankruptcy", "--lambda0", "9", "--eta", "1",
        "--impact-grid", "0.12:0.2:3", "--trials", "1", "--noise-sigma", "0",
    )
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert [float(r["p_bankrupt"]) for r in rows] == [0.0, 0.0, 1.0]


def test_bankruptcy_bad_grid_exit_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["bankruptcy", "--lambda0", "9", "--eta", "10", "--impact-grid", "0-0.3-4"])
    assert exc.value.code == 2


def test_report_bundled_fixture(capsys):
    code, out, _ = run(capsys, "report", "--format", "json")
    assert code == 0
    rows = {row["name"]: row for row in json.loads(out)}
    expected_i1 = {
        "BUND": 0.004, "SP500": 0.016, "MSFT": 0.063,
        "AAPL": 0.089, "KKR": 0.079, "ClubMed": 0.135,
    }
    for name, target in expected_i1.items():
        assert abs(rows[name]["impact_vol_based"] - target) < 1e-3
    assert rows["CDS"]["impact_vol_based"] is None
    assert rows["CDS"]["impact_spread_based"] == pytest.approx(0.2, rel=1e-12)
    assert rows["CDS"]["lambda_c"] == pytest.approx(7.5, rel=1e-12)


def test_report_text_renders_missing_as_dashes(capsys):
    code, out, _ = run(capsys, "report")
    assert code == 0
    cds_line = next(line for line in out.splitlines() if line.startswith("CDS"))
    assert "--" in cds_line
    assert "7.5" in cds_line


def test_report_empty_asset_list(tmp_path, capsys):
    empty = tmp_path / "empty.ini"
    empty.write_text("# no assets\n")
    code, out, _ = run(capsys, "report", str(empty), "--format", "csv")
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert len(rows) == 1  # header only


def test_report_row_level_error_marker(tmp_path, capsys):
    path = tmp_path / "assets.ini"
    path.write_text("[Mystery]\nQ = 1e6\n")
    code, out, _ = run(capsys, "report", str(path), "--format", "json")
    assert code == 0
    assert json.loads(out)[0]["error"] == "no usable parameters"


def test_report_unreadable_file(capsys):
    code, _, err = run(capsys, "report", "/nonexistent/assets.ini")
    assert code == 1
    assert "error:" in err


def gaussian_series_csv(path, n=200, seed=9, sigma=0.015):
    rng = np.random.default_rng(seed)
    close = 100.0 * np.cumprod(1.0 + rng.normal(0.0, sigma, size=n))
    volume = rng.uniform(5e5, 1.5e6, size=n)
    lines = ["date,close,volume"]
    day = np.datetime64("2024-01-01")
    for i in range(n):
        lines.append(f"{day + i},{float(close[i])!r},{float(volume[i])!r}")
    path.write_text("\n".join(lines) + "\n")


def test_estimate_constant_series(tmp_path, capsys):
    path = tmp_path / "flat.csv"
    lines = ["date,close,volume"]
    day = np.datetime64("2024-01-01")
    for i in range(140):
        lines.append(f"{day + i},100.0,1e6")
    path.write_text("\n".join(lines) + "\n")
    code, out, _ = run(capsys, "estimate", str(path))
    assert code == 0
    assert "sigma = 0.0" in out


def test_estimate_round_trips_into_value(tmp_path, capsys):
    series = tmp_path / "series.csv"
    gaussian_series_csv(series)
    params_file = tmp_path / "params.ini"
    code, _, _ = run(capsys, "estimate", str(series), "--out", str(params_file))
    assert code == 0
    code, out, _ = run(
        capsys, "value", "--Q", "1e6", "--p0", "50", "--params", str(params_file),
        "--format", "json",
    )
    assert code == 0
    payload = json.loads(out)
    assert payload["impact"] > 0.0
    assert payload["impact_adjusted_value"] < payload["mtm_value"]


def test_estimate_short_file_exit_1(tmp_path, capsys):
    series = tmp_path / "short.csv"
    gaussian_series_csv(series, n=30)
    code, _, err = run(capsys, "estimate", str(series))
    assert code == 1
    assert "131" in err


def test_estimate_json_format(tmp_path, capsys):
    series = tmp_path / "series.csv"
    gaussian_series_csv(series)
    code, out, _ = run(capsys, "estimate", str(series), "--format", "json", "--Y", "0.7")
    assert code == 0
    payload = json.loads(out)
    assert payload["Y"] == 0.7
    assert payload["sigma"] > 0.0


def test_global_flags_accepted_before_and_after_subcommand(capsys):
    code_a, out_a, _ = run(capsys, "--format", "json", "critical", "--lambda0", "9")
    code_b, out_b, _ = run(capsys, "critical", "--lambda0", "9", "--format", "json")
    assert code_a == code_b == 0
    assert out_a == out_b


def test_unknown_command_exit_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2
