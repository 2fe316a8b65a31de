"""Command-line entry point: ``slopewalk {train,eval,perturb,inspect}``.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .ars import WalkingObjective, train
from .config import ConfigError, RunConfig, default_config, load_config, with_seed
from .env import LOG_COLUMNS, EpisodeResult, PerturbationSchedule, parse_track, rollout
from .policy import DimensionMismatch, act_names, build_seed_policy, load_policy, obs_names, save_policy

PITCH = LOG_COLUMNS.index("pitch_deg")


class UsageError(Exception):
    pass


def recovery_time(nominal_pitch, perturbed_pitch, dt: float, t_start: float,
                  band: float = math.radians(2.0), hold: float = 1.0):
    """Seconds after ``t_start`` until |pitch - nominal| stays inside ``band``
    for ``hold`` seconds.  None when that never happens within the record.

    Both inputs are pitch traces in radians sampled every ``dt``; the shorter
    one bounds the record.
    """
    n = min(len(nominal_pitch), len(perturbed_pitch))
    dev = np.abs(np.asarray(perturbed_pitch[:n]) - np.asarray(nominal_pitch[:n]))
    i0 = max(0, int(round(t_start / dt)))
    need = int(round(hold / dt))
    inside = dev < band
    run = 0
    for i in range(n - 1, i0 - 1, -1):
        run = run + 1 if inside[i] else 0
        inside[i] = run >= need
    # inside[i] now means "a compliant window of length hold starts at i"
    hits = np.flatnonzero(inside[i0:n])
    return None if hits.size == 0 else hits[0] * dt


def _load(args) -> RunConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else default_config()
    if getattr(args, "seed", None) is not None:
        cfg = with_seed(cfg, args.seed)
    return cfg


def _out_dir(args, cfg: RunConfig) -> Path:
    out = Path(args.out_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _policy_for(args, cfg: RunConfig):
    if args.policy:
        policy = load_policy(args.policy)
        if policy.mode != cfg.policy.mode:
            raise DimensionMismatch(f"policy file is {policy.mode}-mode but the config uses "
                                    f"{cfg.policy.mode} mode")
        return policy
    return build_seed_policy(cfg.policy.gains, cfg.policy.mode, cfg.policy.clip_bounds)


def _track(spec: str, cfg: RunConfig):
    try:
        return parse_track(spec)
    except ValueError as exc:
        raise UsageError(f"--track {spec!r}: {exc}") from None


def _csv_path(args, out: Path, stem: str, i: int, n: int) -> Path:
    if args.csv:
        p = Path(args.csv)
        return p if n == 1 else p.with_name(f"{p.stem}_{i}{p.suffix}")
    return out / (f"{stem}.csv" if n == 1 else f"{stem}_{i}.csv")


def cmd_train(args) -> int:
    cfg = _load(args)
    out = _out_dir(args, cfg)
    cfg.dump(out / "effective_config.yaml")
    seed = build_seed_policy(cfg.policy.gains, cfg.policy.mode, cfg.policy.clip_bounds)
    save_policy(seed, out / "seed_policy.json")
    objective = WalkingObjective(cfg.ars.inclines, env=cfg.env, model=cfg.model, gait=cfg.gait,
                                 episode_length=cfg.ars.episode_length,
                                 ramp_length=cfg.experiment.ramp_length,
                                 plateau_length=cfg.experiment.plateau_length,
                                 eval_seed=cfg.experiment.seed)
    ckpt = out / "checkpoints"
    ckpt.mkdir(exist_ok=True)

    def report(rec):
        if rec.iteration % 10 == 0:
            print(f"iter {rec.iteration:4d}  mean {rec.mean_return:10.1f}  "
                  f"eval {rec.eval_return:10.1f}  sigma_R {rec.sigma_r:9.2f}", flush=True)

    best, history = train(seed, cfg.ars, objective, telemetry_path=out / "telemetry.csv",
                          checkpoint_dir=ckpt, callback=report)
    save_policy(best, out / "policy.json")
    print(f"seed eval return: {objective.evaluate(seed):.3f}")
    print(f"final eval return: {objective.evaluate(best):.3f}  ({len(history)} iterations)")
    print(f"wrote {out / 'policy.json'}")
    return 0


def _summary(res, terrain, dt: float) -> str:
    mean_pitch = float(np.mean(np.abs(res.log[:, PITCH]))) if res.steps else 0.0
    line = (f"distance {res.distance:.3f} m  survival {res.steps * dt:.3f} s  "
            f"mean |pitch| {mean_pitch:.2f} deg  termination {res.termination}")
    if terrain.end_x > 0:
        done = res.termination == "time_up" and res.final_state.q[0] >= terrain.end_x
        line += f"  traversed {'yes' if done else 'no'}"
    return line


def cmd_eval(args) -> int:
    cfg = _load(args)
    policy = _policy_for(args, cfg)
    out = _out_dir(args, cfg)
    tracks = args.track or list(cfg.experiment.tracks)
    dt = cfg.env.control_dt
    for i, spec in enumerate(tracks):
        terrain = _track(spec, cfg)
        res = rollout(policy, terrain, seed=cfg.experiment.seed, model=cfg.model, gait=cfg.gait,
                      config=cfg.env, log=True)
        path = _csv_path(args, out, "eval", i, len(tracks))
        res.write_csv(path)
        print(f"[{spec}] {_summary(res, terrain, dt)}  -> {path}")
    return 0


@dataclass(frozen=True)
class PushTrial:
    """Outcome of one pushed rollout measured against the unpushed one."""

    nominal: EpisodeResult
    pushed: EpisodeResult
    peak_deviation_deg: float
    nominal_peak_deg: float
    min_step_command: float
    recovery_s: float | None


def push_trial(policy, cfg: RunConfig, schedule: PerturbationSchedule, t_start: float,
               terrain=None) -> PushTrial:
    """Roll out with and without ``schedule`` from the experiment start seed."""
    x = cfg.experiment
    terrain = terrain if terrain is not None else parse_track("flat")
    run = dict(seed=x.seed, model=cfg.model, gait=cfg.gait, config=cfg.env, log=True)
    nominal = rollout(policy, terrain, **run)
    pushed = rollout(policy, terrain, schedule, **run)
    dt = cfg.env.control_dt
    nom = np.radians(nominal.log[:, PITCH])
    per = np.radians(pushed.log[:, PITCH])
    n = min(len(nom), len(per))
    i0 = int(round(t_start / dt))
    dev = np.degrees(np.abs(per[i0:n] - nom[i0:n]))
    rec = recovery_time(nom, per, dt, t_start, x.recovery_band, x.recovery_hold)
    if pushed.termination != "time_up":
        # a walker that falls has not recovered, whatever the shorter trace shows
        rec = None
    return PushTrial(nominal, pushed,
                     peak_deviation_deg=float(dev.max()) if dev.size else 0.0,
                     nominal_peak_deg=float(np.max(np.abs(nominal.log[:, PITCH]))),
                     min_step_command=float(pushed.log[:, LOG_COLUMNS.index("l_cmd")].min()),
                     recovery_s=rec)


def cmd_perturb(args) -> int:
    cfg = _load(args)
    policy = _policy_for(args, cfg)
    out = _out_dir(args, cfg)
    x = cfg.experiment
    force = x.force if args.force_n is None else args.force_n
    duration = x.duration if args.duration_s is None else args.duration_s
    t_start = x.t_start if args.t_start_s is None else args.t_start_s
    mode = args.mode or x.perturbation
    if duration <= 0 or t_start < 0:
        raise UsageError("--duration-s must be positive and --t-start-s non-negative")
    if mode == "periodic":
        period = x.period if args.period_s is None else args.period_s
        schedule = PerturbationSchedule.periodic(force, duration, t_start, period, x.until)
    else:
        schedule = PerturbationSchedule.impulse(force, duration, t_start)
    track = args.track or "flat"
    trial = push_trial(policy, cfg, schedule, t_start, _track(track, cfg))
    path = _csv_path(args, out, "perturb", 0, 1)
    trial.pushed.write_csv(path)
    rec = trial.recovery_s
    print(f"force {force:g} N for {duration:g} s at t={t_start:g} s ({mode}) on {track}")
    print(f"peak pitch deviation {trial.peak_deviation_deg:.3f} deg  (nominal peak |pitch| "
          f"{trial.nominal_peak_deg:.3f} deg)")
    print(f"min step length command {trial.min_step_command:.3f} m")
    print("recovery: " + ("no recovery" if rec is None else f"{rec:.3f} s"))
    print(f"termination {trial.pushed.termination}  -> {path}")
    return 0


def cmd_inspect(args) -> int:
    policy = load_policy(args.policy)
    obs, acts = obs_names(policy.mode), act_names(policy.mode)
    width = max(len(a) for a in acts)
    print(f"{policy.mode} policy: {policy.act_dim}x{policy.obs_dim} matrix, "
          f"{policy.n_learnable} learnable entries")
    print(" " * width + "".join(f"{o:>15}" for o in obs) + f"{'offset':>12}{'clip':>20}")
    for i, a in enumerate(acts):
        row = "".join(f"{v:15.6g}" for v in policy.matrix[i])
        lo, hi = policy.clip_bounds[i]
        print(f"{a:<{width}}{row}{policy.offset[i]:12.6g}    [{lo:g}, {hi:g}]")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="slopewalk", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, policy=True):
        sp.add_argument("--config", help="YAML run configuration")
        sp.add_argument("--seed", type=int, help="override the config seed")
        sp.add_argument("--out-dir", help="output directory (default: config output_dir)")
        if policy:
            sp.add_argument("--policy", help="policy JSON file (default: seed policy from config)")
            sp.add_argument("--csv", help="per-step log path")

    t = sub.add_parser("train", help="run ARS from the seed policy")
    common(t, policy=False)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="roll a policy out on one or more tracks")
    common(e)
    e.add_argument("--track", action="append",
                   help='track spec, e.g. "flat", "7deg" or "ramp:7deg,3m;plateau:2m"; repeatable')
    e.set_defaults(func=cmd_eval)

    q = sub.add_parser("perturb", help="push the torso and measure recovery")
    common(q)
    q.add_argument("--track", help="track spec (default flat)")
    q.add_argument("--force-n", type=float, help="horizontal force on the torso, N")
    q.add_argument("--duration-s", type=float, help="push duration, s")
    q.add_argument("--t-start-s", type=float, help="push onset, s")
    q.add_argument("--period-s", type=float, help="repeat period for periodic pushes, s")
    q.add_argument("--mode", choices=("impulse", "periodic"))
    q.set_defaults(func=cmd_perturb)

    i = sub.add_parser("inspect", help="print a policy as a labelled gain table")
    i.add_argument("--policy", required=True)
    i.set_defaults(func=cmd_inspect)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "train" and not args.config:
        print("slopewalk train: error: --config is required", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
