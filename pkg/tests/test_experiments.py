import csv
import math

import numpy as np
import pytest

from conftest import CONFIGS
from fhigs import experiments as ex
from fhigs.checks import check_equivalence, check_incremental, corrupt_a2, incremental_fixture
from fhigs.cli import EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_OK, main
from fhigs.config import ConfigError, load_config, parse_config, parse_value
from fhigs.element import Mode
from fhigs.experiments import step_metrics

DF_TEXT = """
[element]
k1 = 0
k2 = 1
omega_h = 100
f2 = {f2}

[filter lead]
num = [9, 6 * 20 * pi]
den = [4, 6 * 20 * pi]

[sweep]
{grid}
harmonics = [1, 3]
"""

LOG_GRID = "omega_min = 1\nomega_max = 1e4\npoints = 40"


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_parse_value():
    assert parse_value("2 * pi * 10") == pytest.approx(20 * math.pi)
    assert parse_value("[1, -2e3, pi/2]") == [1.0, -2000.0, math.pi / 2]
    with pytest.raises(ValueError):
        parse_value("__import__('os')")


@pytest.mark.parametrize("text, where", [
    ("[element]\nk1 = 0\nk2 = 1\n", "[element] omega_h"),
    ("[element]\nk1 = 0\nk2 = x\nomega_h = 1\n", "[element] k2"),
    ("[element]\nk1 = 1\nk2 = 0\nomega_h = 1\n", "[element]"),
    ("[element]\nk1 = 0\nk2 = 1\nomega_h = 1\nf2 = nope\n", "[filter nope]"),
    ("[element]\nk1 = 0\nk2 = 1\nomega_h = 1\nf2 = bad\n[filter bad]\nnum = [1, 0]\nden = [1]\n",
     "[filter bad]"),
])
def test_config_errors_name_section_and_field(text, where):
    with pytest.raises(ConfigError) as info:
        parse_config(text).element("element")
    assert str(info.value).startswith(where)


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "absent.ini")


def test_df_csvs(tmp_path):
    paths = ex.cmd_df(parse_config(DF_TEXT.format(f2="lead", grid=LOG_GRID)), tmp_path)
    rows = read_csv(paths[0])
    assert rows[0] == ["omega_rad_s", "k", "a_k", "b_k", "mag_db", "phase_deg", "case"]
    assert len(rows) == 1 + 2 * 40
    first = [r for r in rows[1:] if r[1] == "1"]
    assert max(float(r[5]) for r in first) > 0
    assert {r[6] for r in first} == {"lead"}
    assert len(read_csv(paths[1])) == len(rows)


def test_identity_filter_df_equals_higs(tmp_path):
    a, b = ex.cmd_df(parse_config(DF_TEXT.format(f2="1", grid=LOG_GRID)), tmp_path)
    assert a.read_bytes() == b.read_bytes()


def test_single_frequency_grid(tmp_path):
    cfg = parse_config(DF_TEXT.format(f2="lead", grid="omegas = [25]").replace("[1, 3]", "[1]"))
    for path in ex.cmd_df(cfg, tmp_path):
        assert len(read_csv(path)) == 2


def test_shipped_lowpass_config_is_lag_cycle(tmp_path):
    traj = ex.run_simulate(load_config(CONFIGS / "lowpass_simulate.ini"))
    period = 0.1
    seq = traj.mode_sequence(25 * period, 27 * period)
    # released from the k2 line, the integrator runs into the k1 line
    assert seq == [Mode.INTEGRATOR, Mode.GAIN_K1, Mode.GAIN_K2] * 4


def test_zero_input_trajectory(tmp_path):
    cfg = parse_config("[element]\nk1 = 0\nk2 = 1\nomega_h = 100\nf2 = lead\n"
                       "[filter lead]\nnum = [9, 6]\nden = [4, 6]\n"
                       "[sim]\ntotal_time = 0.01\n")
    ex.cmd_simulate(cfg, tmp_path)
    rows = read_csv(tmp_path / "trajectory.csv")
    assert all(float(v) == 0.0 for r in rows[1:] for v in r[1:])
    assert read_csv(tmp_path / "events.csv") == [["t_event", "from", "to"]]


def test_simulate_csv_is_byte_stable(tmp_path):
    cfg = load_config(CONFIGS / "lead_simulate.ini")
    a = ex.cmd_simulate(cfg, tmp_path / "a")
    b = ex.cmd_simulate(cfg, tmp_path / "b")
    for pa, pb in zip(a, b):
        assert pa.read_bytes() == pb.read_bytes()


def test_unknown_method_rejected():
    cfg = load_config(CONFIGS / "lead_simulate.ini")
    cfg.sections["simulate"]["method"] = "euler"
    with pytest.raises(ConfigError, match=r"\[simulate\] method"):
        ex.run_simulate(cfg)


def test_step_metrics():
    t = np.linspace(0.0, 1.0, 11)
    y = np.array([0, 0.5, 1.1, 1.05, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0])
    overshoot, settling, err = step_metrics(t, y, 1.0)
    assert overshoot == pytest.approx(10.0)
    assert settling == pytest.approx(0.4)
    assert err == 0.0


def test_step_metrics_clips_undershoot():
    t = np.linspace(0.0, 1.0, 5)
    assert step_metrics(t, np.array([0, 0.5, 0.9, 0.99, 1.0]), 1.0)[0] == 0.0


def test_corrupted_gain_matrix_breaks_equivalence():
    result = check_equivalence(np.random.default_rng(0), n=3, total_time=0.5, corrupt=corrupt_a2)
    assert not result.passed


def test_positive_lower_gain_rejected_by_harness():
    result = check_incremental(np.random.default_rng(0), incremental_fixture(k1=0.2), pairs=2,
                               total_time=1.0)
    assert not result.passed
    assert "hypothesis violated" in result.detail


def test_cli_config_error_exit(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[element]\nk1 = 0\n")
    assert main(["df", "--config", str(bad), "--out", str(tmp_path)]) == EXIT_CONFIG
    assert "[element]" in capsys.readouterr().err


def test_cli_df(tmp_path, capsys):
    code = main(["df", "--config", str(CONFIGS / "lead_df.ini"), "--out", str(tmp_path), "--profile",
                 "debug"])
    assert code == EXIT_OK
    assert (tmp_path / "fhigs_df.csv").exists()


def test_cli_requires_config():
    with pytest.raises(SystemExit):
        main(["df"])


SMALL_VERIFY = """
[verify]
equivalence_configs = 2
equivalence_time = 0.2
switching_draws = 6
lead_frequencies = 3
symmetry_responses = 3
incremental = element bad
incremental_pairs = 2
incremental_time = 10
envelope_pairs = 2

[element bad]
k1 = 0.2
k2 = 1
omega_h = 1
f2 = lowpass

[filter lowpass]
num = [1]
den = [1, 1]
"""


def test_cli_verify_fails_on_hypothesis_violation(tmp_path, capsys):
    cfg = tmp_path / "verify.ini"
    cfg.write_text(SMALL_VERIFY)
    assert main(["verify", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_CHECK_FAILED
    rows = {r[0]: r for r in read_csv(tmp_path / "verify.csv")[1:]}
    assert rows["incremental_attractivity"][1] == "0"
    assert rows["pwl_vs_epds"][1] == "1"
    out = capsys.readouterr().out
    assert "FAIL incremental_attractivity" in out
