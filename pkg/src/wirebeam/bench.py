"""Experiment orchestration: seeded runs, sweeps, metrics, and file outputs.

Every artifact embeds the full config echo and seed in its header, so a
result is re-derivable from the file alone.  Policy comparisons inside a
sweep cell share identical environment seeds (paired-seed discipline),
and completed sweep cells are skipped on re-run.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import dqn
from .channel import write_pattern_csv
from .config import ExperimentConfig, SweepSpec, build_config
from .env import BeamTrackingEnv, angle_error_deg, trace_row, write_trace_csv
from .policies import PolicyKind, fixed_action, oracle_action
from .wire import ImpulseEvent, simulate_trajectory, write_trajectory_csv

POST_IMPULSE_WINDOW_S = 0.3  # averaging window after the impulsive force


class EvalError(ValueError):
    pass


def derive_seed(base: int, *key: int) -> int:
    """Stable sub-seed for (episode, cell, repetition, ...) indices."""
    return int(np.random.SeedSequence(entropy=base, spawn_key=key).generate_state(1)[0])


def make_env(cfg: ExperimentConfig, seed: int) -> BeamTrackingEnv:
    return BeamTrackingEnv(cfg.env, cfg.wire, cfg.wind, cfg.channel, cfg.array, seed)


def env_factory(cfg: ExperimentConfig):
    return lambda seed: make_env(cfg, seed)


def policy_callable(cfg: ExperimentConfig, kind: PolicyKind,
                    params: dqn.MlpParams | None = None):
    """Map a policy kind onto a callable(env) -> action index."""
    if kind is PolicyKind.ORACLE:
        return lambda env: oracle_action(env.true_node_position, env.rx_position,
                                         env.beam, cfg.env.refine_angle)
    if kind is PolicyKind.FIXED_BEAM:
        return lambda env: fixed_action()
    if params is None:
        raise EvalError("dqn policy requires trained parameters")
    return lambda env: int(np.argmax(dqn.forward(params, env.state_vector)))


# --------------------------------------------------------------------------
# rollouts and metrics
# --------------------------------------------------------------------------

@dataclass
class EpisodeResult:
    rows: list
    angle_errors_deg: list[float]
    impulse_time: float | None


def rollout_episode(env: BeamTrackingEnv, policy_fn) -> EpisodeResult:
    rows, errors = [], []
    while not env.done:
        action = policy_fn(env)
        out = env.step(action)
        rows.append(trace_row(env, action, out))
        errors.append(angle_error_deg(env))
    return EpisodeResult(rows=rows, angle_errors_deg=errors,
                         impulse_time=env.schedule.impulse_time)


def post_impulse_window(result: EpisodeResult, tau: float) -> list[float]:
    """Powers at the steps within (t_impulse, t_impulse + 300 ms]."""
    t0 = result.impulse_time
    if t0 is None:
        return []
    lo, hi = t0, t0 + POST_IMPULSE_WINDOW_S
    return [r.raw_power_dbm for k, r in enumerate(result.rows, start=1)
            if lo < k * tau <= hi + 1e-9]


@dataclass
class MetricsRecord:
    policy: str
    episodes: int
    mean_power_dbm: float
    mean_power_post_impulse_dbm: float | None
    mean_angle_error_deg: float
    config_echo: dict

    def to_json(self) -> str:
        d = dict(self.__dict__)
        v = d["mean_power_post_impulse_dbm"]
        if v is not None and math.isnan(v):
            d["mean_power_post_impulse_dbm"] = None
        return json.dumps(d, sort_keys=True)


def aggregate_metrics(cfg: ExperimentConfig, policy: str,
                      results: list[EpisodeResult]) -> MetricsRecord:
    powers = [r.raw_power_dbm for res in results for r in res.rows]
    errors = [e for res in results for e in res.angle_errors_deg]
    windows = [post_impulse_window(res, cfg.env.tau) for res in results]
    window_means = [float(np.mean(w)) for w in windows if w]
    post = float(np.mean(window_means)) if window_means else None
    return MetricsRecord(policy=policy, episodes=len(results),
                         mean_power_dbm=float(np.mean(powers)),
                         mean_power_post_impulse_dbm=post,
                         mean_angle_error_deg=float(np.mean(errors)),
                         config_echo=cfg.echo())


# --------------------------------------------------------------------------
# top-level runs
# --------------------------------------------------------------------------

def run_train(cfg: ExperimentConfig, out_dir=None) -> tuple[Path, Path]:
    """Train per the config; returns (checkpoint path, training-log path)."""
    out = Path(out_dir if out_dir is not None else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)

    baselines = {
        "oracle": policy_callable(cfg, PolicyKind.ORACLE),
        "fixed": policy_callable(cfg, PolicyKind.FIXED_BEAM),
    }
    result = dqn.train(env_factory(cfg), cfg.train, cfg.seed, baselines)

    ckpt_path = out / "checkpoint.bin"
    dqn.save_checkpoint(ckpt_path, result.params, result.adam,
                        result.total_steps, cfg.echo_json())
    sidecar = {"seed": cfg.seed, "total_steps": result.total_steps,
               "scenario": cfg.scenario, "state_mode": cfg.state_mode,
               "update_period_steps": cfg.train.update_period_steps,
               "target_sync_steps": cfg.train.target_sync_steps,
               "phases": len(result.log)}
    (out / "checkpoint.bin.json").write_text(json.dumps(sidecar, sort_keys=True))

    log_path = out / "training_log.csv"
    _write_training_log(log_path, cfg, result.log)
    return ckpt_path, log_path


def _write_training_log(path, cfg: ExperimentConfig, log_rows: list[dict]):
    cols = ["global_step", "phase", "mean_eval_power_dbm", "mean_proxy_reward",
            "loss", "mean_oracle_power_dbm", "mean_fixed_power_dbm", "eval_seed"]
    with open(path, "w", newline="") as fh:
        fh.write("# config " + cfg.echo_json() + "\n")
        w = csv.writer(fh)
        w.writerow(cols)
        for row in log_rows:
            w.writerow([row.get(c, "") for c in cols])


def load_trained_params(cfg: ExperimentConfig, checkpoint) -> dqn.MlpParams:
    params, _, _, _ = dqn.load_checkpoint(checkpoint)
    expected = (cfg.env.state_dim, *cfg.train.hidden_sizes, dqn.N_ACTIONS)
    if params.dims != expected:
        raise EvalError(f"checkpoint architecture {params.dims} does not match "
                        f"the config architecture {expected}")
    return params


def run_eval(cfg: ExperimentConfig, checkpoint, policy: PolicyKind,
             episodes: int, out_dir=None, write_traces: bool = True) -> MetricsRecord:
    """Greedy rollouts of one policy; emits per-episode traces and metrics."""
    if episodes <= 0:
        raise EvalError("episodes must be >= 1")
    params = None
    if policy is PolicyKind.DQN_GREEDY:
        if checkpoint is None:
            raise EvalError("dqn policy requires --checkpoint")
        params = load_trained_params(cfg, checkpoint)
    fn = policy_callable(cfg, policy, params)

    out = Path(out_dir if out_dir is not None else cfg.output_dir)
    results = []
    for ep in range(episodes):
        env = make_env(cfg, derive_seed(cfg.seed, ep))
        res = rollout_episode(env, fn)
        results.append(res)
        if write_traces:
            out.mkdir(parents=True, exist_ok=True)
            write_trace_csv(out / f"trace_{policy.value}_ep{ep:03d}.csv", res.rows)

    record = aggregate_metrics(cfg, policy.value, results)
    if write_traces:
        (out / f"metrics_{policy.value}.json").write_text(record.to_json())
    return record


# --------------------------------------------------------------------------
# sweeps
# --------------------------------------------------------------------------

_AXIS_KEYS = {"mass": "wire.mass_total_kg",
              "spring_k": "wire.spring_k_n_per_m",
              "lookback": "env.lookback_s"}


def sweep_cell_config(cfg: ExperimentConfig, axis: str, value: float,
                      seed: int) -> ExperimentConfig:
    """Re-materialize the config with one axis value and a cell seed."""
    values = dict(cfg.values)
    values[_AXIS_KEYS[axis]] = repr(float(value))
    values["seed"] = str(seed)
    return build_config(values)


def run_sweep(cfg: ExperimentConfig, sweep: SweepSpec | None = None,
              out_dir=None) -> Path:
    """One MetricsRecord per (value, repetition, policy), plus a summary.

    Completed cells (existing metrics files) are not recomputed.  Failures
    are recorded per cell and the sweep continues.
    """
    sweep = sweep if sweep is not None else cfg.sweep
    out = Path(out_dir if out_dir is not None else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)

    cells = []
    for vi, value in enumerate(sweep.values):
        for rep in range(sweep.repetitions):
            cell_seed = derive_seed(cfg.seed, vi, rep)
            cell_cfg = sweep_cell_config(cfg, sweep.axis, value, cell_seed)
            cell_dir = out / f"cell_{sweep.axis}_{value:g}_rep{rep}"
            cell_dir.mkdir(parents=True, exist_ok=True)
            ckpt = None
            for policy_name in sweep.policies:
                metrics_path = cell_dir / f"metrics_{policy_name}.json"
                entry = {"axis": sweep.axis, "value": value, "rep": rep,
                         "policy": policy_name, "path": str(metrics_path)}
                if metrics_path.exists():
                    entry["status"] = "cached"
                    cells.append(entry)
                    continue
                try:
                    if policy_name == "dqn":
                        ckpt = cell_dir / "checkpoint.bin"
                        if not ckpt.exists():
                            run_train(cell_cfg, cell_dir)
                        record = run_eval(cell_cfg, ckpt, PolicyKind.DQN_GREEDY,
                                          cell_cfg.eval_episodes, cell_dir,
                                          write_traces=False)
                    else:
                        kind = (PolicyKind.ORACLE if policy_name == "oracle"
                                else PolicyKind.FIXED_BEAM)
                        record = run_eval(cell_cfg, None, kind,
                                          cell_cfg.eval_episodes, cell_dir,
                                          write_traces=False)
                    metrics_path.write_text(record.to_json())
                    entry["status"] = "ok"
                except Exception as e:  # record the failure, keep sweeping
                    entry["status"] = f"failed: {e}"
                cells.append(entry)

    summary_path = out / f"sweep_{sweep.axis}_summary.csv"
    _write_sweep_summary(summary_path, cfg, sweep, cells)
    (out / f"sweep_{sweep.axis}_cells.json").write_text(
        json.dumps({"echo": cfg.echo(), "cells": cells}, sort_keys=True))
    return summary_path


def _write_sweep_summary(path, cfg, sweep, cells):
    rows = []
    for value in sweep.values:
        for policy_name in sweep.policies:
            stats = {"mean_power_dbm": [], "mean_power_post_impulse_dbm": [],
                     "mean_angle_error_deg": []}
            for entry in cells:
                if entry["value"] != value or entry["policy"] != policy_name:
                    continue
                p = Path(entry["path"])
                if not p.exists():
                    continue
                rec = json.loads(p.read_text())
                for k in stats:
                    if rec.get(k) is not None:
                        stats[k].append(rec[k])
            row = [sweep.axis, value, policy_name, len(stats["mean_power_dbm"])]
            for k in ("mean_power_dbm", "mean_power_post_impulse_dbm",
                      "mean_angle_error_deg"):
                vals = stats[k]
                row.append(f"{np.mean(vals):.6f}" if vals else "")
                row.append(f"{np.std(vals):.6f}" if vals else "")
            rows.append(row)
    with open(path, "w", newline="") as fh:
        fh.write("# config " + cfg.echo_json() + "\n")
        w = csv.writer(fh)
        w.writerow(["axis", "value", "policy", "n",
                    "mean_power_dbm", "std_power_dbm",
                    "mean_power_post_impulse_dbm", "std_power_post_impulse_dbm",
                    "mean_angle_error_deg", "std_angle_error_deg"])
        w.writerows(rows)


def spearman_rank_corr(x, y) -> float:
    """Spearman correlation via average ranks; NaN when either side is constant."""
    def ranks(v):
        v = np.asarray(v, float)
        order = np.argsort(v, kind="stable")
        r = np.empty(len(v))
        r[order] = np.arange(1, len(v) + 1)
        # average ranks over ties
        for val in np.unique(v):
            mask = v == val
            if mask.sum() > 1:
                r[mask] = r[mask].mean()
        return r
    rx, ry = ranks(x), ranks(y)
    sx, sy = rx.std(), ry.std()
    if sx == 0 or sy == 0:
        return math.nan
    return float(np.mean((rx - rx.mean()) * (ry - ry.mean())) / (sx * sy))


# --------------------------------------------------------------------------
# auxiliary exports (pattern / trajectory verbs)
# --------------------------------------------------------------------------

def export_pattern(cfg: ExperimentConfig, out_dir=None, span_deg: float = 60.0,
                   step_deg: float = 1.0) -> Path:
    """Beam-pattern CSV around the equilibrium boresight steering."""
    out = Path(out_dir if out_dir is not None else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    env = make_env(cfg, cfg.seed)
    path = out / "pattern.csv"
    write_pattern_csv(path, env.beam, cfg.channel, cfg.array, span_deg, step_deg)
    return path


def export_trajectory(cfg: ExperimentConfig, out_dir=None, duration: float = 0.5,
                      impulse_time: float = 0.0, with_wind: bool = False) -> Path:
    """Impulse-response trajectory export (wire positions over time)."""
    out = Path(out_dir if out_dir is not None else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    impulse = ImpulseEvent(point_number=cfg.env.impulse_point,
                           force=np.asarray(cfg.env.impulse_force, float),
                           apply_time=impulse_time,
                           duration_s=cfg.env.impulse_duration_s)
    wind = cfg.wind if with_wind else type(cfg.wind)(amplitude=0.0)
    params = cfg.wire
    if not with_wind:
        params = type(params)(n_points=params.n_points, mass_total=params.mass_total,
                              spring_k=params.spring_k, drag_c=params.drag_c,
                              gravity=params.gravity,
                              wind_diffusion=np.zeros((3, 3)),
                              endpoint_separation=params.endpoint_separation)
    samples = simulate_trajectory(params, wind, [impulse], duration,
                                  cfg.env.substep_dt, cfg.seed,
                                  sample_every=cfg.env.tau)
    path = out / "trajectory.csv"
    write_trajectory_csv(path, samples)
    return path
