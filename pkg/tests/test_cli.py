import json
import math

import numpy as np
import pytest
import yaml

from slopewalk.cli import main, recovery_time
from slopewalk.config import ConfigError, default_config, load_config
from slopewalk.policy import AffinePolicy, SeedGains, build_seed_policy, load_policy, save_policy

FAST = """\
robot: {}
gait: {}
policy:
  seed_gains: {k_step: 0.5}
env: {episode_length: 300}
ars: {iterations: 0, episode_length: 300}
experiment: {tracks: [flat]}
"""


@pytest.fixture
def cfg_path(tmp_path):
    p = tmp_path / "run.yaml"
    p.write_text(FAST)
    return p


def test_default_config_roundtrip(tmp_path):
    cfg = default_config()
    cfg.dump(tmp_path / "c.yaml")
    again = load_config(tmp_path / "c.yaml")
    assert again == cfg
    assert again.dump() == cfg.dump()


def test_angles_are_degrees_in_the_file(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text(FAST.replace("env: {episode_length: 300}", "env: {pitch_threshold_deg: 30}"))
    assert load_config(p).env.pitch_threshold == pytest.approx(math.radians(30))


def test_missing_section_names_the_key(tmp_path, capsys):
    p = tmp_path / "c.yaml"
    p.write_text(FAST.replace("gait: {}\n", ""))
    assert main(["train", "--config", str(p), "--out-dir", str(tmp_path / "o")]) == 2
    assert "'gait'" in capsys.readouterr().err


def test_unknown_key_reports_line(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text(FAST.replace("gait: {}", "gait:\n  period_s: 0.8\n  bogus: 1"))
    with pytest.raises(ConfigError, match=r"line 4.*bogus"):
        load_config(p)


def test_yaml_syntax_error_reports_line(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("robot: {}\ngait: [\n")
    with pytest.raises(ConfigError, match="line"):
        load_config(p)


def test_train_zero_iterations_writes_seed(cfg_path, tmp_path):
    out = tmp_path / "out"
    assert main(["train", "--config", str(cfg_path), "--out-dir", str(out)]) == 0
    cfg = load_config(cfg_path)
    seed = build_seed_policy(cfg.policy.gains, cfg.policy.mode, cfg.policy.clip_bounds)
    assert load_policy(out / "policy.json") == seed
    assert (out / "telemetry.csv").read_text().splitlines() == [
        "iteration,mean_return,max_return,eval_return,sigma_R"]
    assert load_config(out / "effective_config.yaml") == cfg


def test_train_short_run_is_deterministic(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text(FAST.replace("iterations: 0", "iterations: 2, directions: 2, top_directions: 1"))
    for name in ("a", "b"):
        assert main(["train", "--config", str(p), "--out-dir", str(tmp_path / name)]) == 0
    for f in ("policy.json", "telemetry.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    assert len((tmp_path / "a" / "telemetry.csv").read_text().splitlines()) == 3


def test_inspect_prints_gains(tmp_path, capsys):
    pol = build_seed_policy(SeedGains(k_step=0.4))
    save_policy(pol, tmp_path / "p.json")
    assert main(["inspect", "--policy", str(tmp_path / "p.json")]) == 0
    out = capsys.readouterr().out
    assert "9 learnable" in out
    row = next(l for l in out.splitlines() if l.startswith("step_length"))
    assert float(row.split()[1]) == 0.4


def test_inspect_corrupted_file(tmp_path):
    p = tmp_path / "p.json"
    p.write_text("{not json")
    assert main(["inspect", "--policy", str(p)]) != 0


def test_eval_zero_policy_repeatable(cfg_path, tmp_path, capsys):
    save_policy(AffinePolicy.zeros(), tmp_path / "zero.json")
    args = ["eval", "--config", str(cfg_path), "--policy", str(tmp_path / "zero.json"),
            "--track", "flat"]
    assert main(args + ["--csv", str(tmp_path / "a.csv")]) == 0
    assert main(args + ["--csv", str(tmp_path / "b.csv")]) == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    out = capsys.readouterr().out
    assert "termination" in out and "distance" in out


def test_eval_mode_mismatch(cfg_path, tmp_path):
    save_policy(AffinePolicy.zeros("full"), tmp_path / "full.json")
    rc = main(["eval", "--config", str(cfg_path), "--policy", str(tmp_path / "full.json"),
               "--out-dir", str(tmp_path)])
    assert rc == 1


def test_eval_bad_track_is_usage_error(cfg_path, tmp_path):
    assert main(["eval", "--config", str(cfg_path), "--track", "ramp:7deg",
                 "--out-dir", str(tmp_path)]) == 2


def test_perturb_zero_force_recovers_immediately(cfg_path, tmp_path, capsys):
    rc = main(["perturb", "--config", str(cfg_path), "--force-n", "0", "--duration-s", "0.05",
               "--t-start-s", "0.05", "--out-dir", str(tmp_path)])
    assert rc == 0
    out = capsys.readouterr().out
    assert "peak pitch deviation 0.000" in out


def test_fall_after_push_is_no_recovery(cfg_path, tmp_path, capsys):
    rc = main(["perturb", "--config", str(cfg_path), "--force-n", "3000", "--duration-s", "0.1",
               "--t-start-s", "0.05", "--out-dir", str(tmp_path)])
    assert rc == 0
    out = capsys.readouterr().out
    assert "no recovery" in out and "time_up" not in out


def test_recovery_time_definition():
    dt = 0.01
    nominal = np.zeros(500)
    pushed = np.zeros(500)
    pushed[100:150] = math.radians(5.0)
    assert recovery_time(nominal, pushed, dt, 1.0) == pytest.approx(0.5)
    assert recovery_time(nominal, nominal, dt, 1.0) == 0.0
    pushed[100:] = math.radians(3.0)
    assert recovery_time(nominal, pushed, dt, 1.0) is None
    # a compliant stretch shorter than the hold time is not a recovery
    pushed[:] = 0.0
    pushed[100:150] = 0.1
    pushed[200:] = 0.1
    assert recovery_time(nominal, pushed, dt, 1.0) is None
