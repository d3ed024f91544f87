import io

import numpy as np
import pytest

from mwsmpc import cli
from mwsmpc.config import (ConfigError, bundled_config, format_config, parse_config,
                           parse_config_text)

CASE_TEXT = open(bundled_config()).read()


def small_config(tmp_path, **overrides):
    text = CASE_TEXT.replace("mc_samples = 10000", "mc_samples = 300").replace("missions = 10000", "missions = 3")
    for key, value in overrides.items():
        # duplicates are rejected, so drop the original line first
        lines = [ln for ln in text.splitlines() if not ln.startswith(f"{key} =")]
        text = "\n".join(lines + [f"{key} = {value}"])
    path = tmp_path / "run.cfg"
    path.write_text(text)
    return str(path)


def run(argv):
    out, err = io.StringIO(), io.StringIO()
    code = cli.dispatch(argv, out, err)
    return code, out.getvalue(), err.getvalue()


def test_case_study_config():
    cfg = parse_config("paper.cfg")
    assert cfg.spec.n_mission == 11
    assert cfg.spec.gammas == (0.99,) * 10
    assert round(cfg.spec.certified_bound, 4) == 0.8863
    np.testing.assert_array_equal(cfg.system.sigma_w, 0.04 * np.eye(2))
    np.testing.assert_array_equal(cfg.s0, [-8, 0])
    assert cfg.missions == 10000 and cfg.spec.seed == 7


def test_empty_config_names_first_key():
    with pytest.raises(ConfigError) as info:
        parse_config_text("")
    assert info.value.key == "A"


def test_gamma_out_of_range():
    with pytest.raises(ConfigError) as info:
        parse_config_text(CASE_TEXT.replace("gamma = 0.99", "gamma = 1.2"))
    assert info.value.key == "gamma"


@pytest.mark.parametrize("old, new, key", [
    ("beta = 1e-6", "beta = 0", "beta"),
    ("S0 = 0.98", "S0 = abc", "S0"),
    ("N = 11", "N = 11.5", "N"),
    ("s0 = [-8, 0]", "s0 = [5, 0]", "s0"),
    ("sigma_w = [[0.04, 0], [0, 0.04]]", "sigma_w = [[1, 2], [2, 1]]", "sigma_w"),
    ("R = [[0.1]]", "R = [[0.1, 0]]", "R"),
])
def test_invalid_values_name_their_key(old, new, key):
    assert old in CASE_TEXT
    with pytest.raises(ConfigError) as info:
        parse_config_text(CASE_TEXT.replace(old, new))
    assert info.value.key == key


def test_unknown_and_duplicate_keys():
    with pytest.raises(ConfigError, match="unknown key"):
        parse_config_text(CASE_TEXT + "\nfoo = 1\n")
    with pytest.raises(ConfigError, match="duplicate key"):
        parse_config_text(CASE_TEXT + "\nN = 5\n")


def test_round_trip():
    cfg = parse_config("paper.cfg")
    again = parse_config_text(format_config(cfg))
    assert format_config(again) == format_config(cfg)
    np.testing.assert_array_equal(again.system.A, cfg.system.A)
    assert again.spec.gammas == cfg.spec.gammas


def test_missing_file():
    with pytest.raises(ConfigError):
        parse_config("/nonexistent/run.cfg")


def test_lqr_command():
    code, out, _ = run(["lqr", "--config", "paper.cfg"])
    assert code == 0
    assert "K = [-0.6167, -1.2703]" in out
    assert "Q_N = [[2.0599, 0.5916], [0.5916, 1.4228]]" in out


def test_surface_command(tmp_path):
    code, _, _ = run(["surface", "--out", str(tmp_path)])
    assert code == 0
    lines = (tmp_path / "swps_surface.csv").read_text().splitlines()
    assert lines[0] == "N,S,bound"
    assert len(lines) == 1 + 50 * 21
    assert "11,0.900000,0.990909" in lines


def test_mission_command(tmp_path):
    code, out, _ = run(["mission", "--config", small_config(tmp_path), "--out", str(tmp_path)])
    assert code == 0 and "mission safe" in out
    assert len((tmp_path / "mission_trace.csv").read_text().splitlines()) == 13


def test_batch_is_byte_identical(tmp_path):
    cfg = small_config(tmp_path)
    outputs = []
    for run_dir in ("a", "b"):
        code, _, _ = run(["batch", "--config", cfg, "--seed", "5", "--out", str(tmp_path / run_dir),
                          "--traces"])
        assert code == 0
        outputs.append({name: (tmp_path / run_dir / name).read_bytes()
                        for name in ("batch_summary.csv", "batch_steps.csv", "traces/mission_1.csv")})
    assert outputs[0] == outputs[1]
    assert outputs[0]["batch_summary.csv"].decode().splitlines()[1].startswith("3,")


def test_usage_errors_exit_one(tmp_path):
    code, _, err = run(["bogus"])
    assert code == 1 and "usage" in err
    assert run(["batch"])[0] == 1
    assert run(["lqr", "--config", str(tmp_path / "missing.cfg")])[0] == 1
    assert run(["batch", "--config", "paper.cfg", "--missions", "0"])[0] == 1


def test_runtime_errors_exit_two(tmp_path):
    # noise so large that the first scenario program has no solution
    cfg = small_config(tmp_path, sigma_w="[[4, 0], [0, 4]]")
    code, _, err = run(["mission", "--config", cfg, "--out", str(tmp_path)])
    assert code == 2 and "cannot start" in err


def test_oracle_command():
    code, out, _ = run(["oracle", "--instances", "50", "--seed", "1"])
    assert code == 0
    assert out.count("PASS") == 4
