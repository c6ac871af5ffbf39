"""Experiment configuration: parsing, defaults, validation, echo.

Config files are flat ``section.key = value`` lines ('#' starts a comment).
Every key has a default, so an empty file is a valid Table-style baseline
run.  Loading materializes all defaults, records where each value came
from ("file" or "default[:note]"), derives the quantities that depend on
the wire shape (receiver position, auto reward offset), and validates the
cross-module invariants.  The echo of a loaded config is embedded in every
output file so results stay re-derivable from their own headers.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import wire as wire_mod
from .channel import ArrayConfig, ChannelConfig, boresight_power
from .env import ConfigError, EnvConfig
from .dqn import TrainConfig

SCENARIOS = ("wind_only", "wind_plus_impulse")
STATE_MODES = ("single_point", "expanded")
SWEEP_AXES = ("mass", "spring_k", "lookback")

# default value strings, parsed through the same path as file values
DEFAULTS: dict[str, str] = {
    "scenario": "wind_only",
    "state_mode": "single_point",
    "seed": "0",
    "output_dir": "runs",

    "wire.n_points": "21",
    "wire.mass_total_kg": "10.0",
    "wire.spring_k_n_per_m": "1000.0",
    "wire.drag_c_per_s": "1.0",
    "wire.gravity_mps2": "0, 0, -9.8",
    "wire.wind_diffusion": "0.1",
    "wire.endpoint_separation_m": "10.0",
    "wire.substep_dt_s": "0.001",
    "wire.impulse_point": "4",
    "wire.impulse_force_n": "0, 0, 470",
    "wire.impulse_duration_s": "0.01",
    "wire.impulse_times_s": "1, 2, 3",

    "wind.amplitude_mps": "5.0",
    "wind.periods_s": "4, 6, 8",

    "channel.tx_power_dbm": "23.0",
    "channel.wavelength_m": "0.005",
    "channel.rx_gain_dbi": "8.0",
    "channel.pathloss_exponent": "2.0",
    "channel.pathloss_ref_db": "free_space",
    "channel.rx_distance_m": "5.0",

    "array.n_vertical": "32",
    "array.n_horizontal": "8",
    "array.corr_coeff": "1.0",
    "array.spacing_v_m": "0.0025",
    "array.spacing_h_m": "0.0025",
    "array.amplitude_norm": "paper_literal",

    "env.tau_s": "0.01",
    "env.lookback_s": "0.02",
    "env.episode_duration_s": "3.0",
    "env.refine_angle_deg": "1.0",
    "env.tx_point": "10",
    "env.sense_points": "2, 4, 6, 8, 10, 12, 14, 16, 18",
    "env.reward_offset_dbm": "auto",
    "env.reward_scale_db": "5.0",

    "train.discount": "0.99",
    "train.epsilon_train": "0.2",
    "train.epsilon_eval": "0.0",
    "train.learning_rate": "1e-4",
    "train.update_period_steps": "300",
    "train.sample_block": "2048",
    "train.minibatch": "32",
    "train.epochs": "8",
    "train.outer_iterations": "4",
    "train.target_sync_steps": "3000",
    "train.total_steps": "100000",
    "train.eval_steps": "300",
    "train.adam_beta1": "0.9",
    "train.adam_beta2": "0.999",
    "train.adam_eps": "1e-8",
    "train.replay_capacity": "50000",
    "train.hidden_sizes": "128, 128, 128",

    "eval.episodes": "5",

    "sweep.axis": "lookback",
    "sweep.values": "0.02, 0.04, 0.08",
    "sweep.repetitions": "3",
    "sweep.policies": "oracle, fixed, dqn",
}

# notes attached to defaults that encode a modelling choice
_DEFAULT_NOTES = {
    "channel.pathloss_exponent": "default:free-space",
    "channel.pathloss_ref_db": "default:free-space",
    "env.reward_offset_dbm": "default:auto-reward-offset",
    "wire.impulse_duration_s": "default:impulse-over-tau",
}


@dataclass
class SweepSpec:
    axis: str
    values: tuple[float, ...]
    repetitions: int
    policies: tuple[str, ...] = ("oracle", "fixed", "dqn")

    def __post_init__(self):
        if self.axis not in SWEEP_AXES:
            raise ConfigError(f"sweep.axis must be one of {SWEEP_AXES}")
        if not self.values:
            raise ConfigError("sweep.values must be non-empty")
        if self.repetitions < 1:
            raise ConfigError("sweep.repetitions must be >= 1")


@dataclass
class ExperimentConfig:
    """Full closure of one run: physics, channel, env, training, bookkeeping."""

    scenario: str
    state_mode: str
    seed: int
    output_dir: str
    wire: wire_mod.WireParams
    wind: wire_mod.WindModel
    channel: ChannelConfig
    array: ArrayConfig
    env: EnvConfig
    train: TrainConfig
    sweep: SweepSpec
    eval_episodes: int
    values: dict[str, str] = field(default_factory=dict)      # all keys, string form
    provenance: dict[str, str] = field(default_factory=dict)  # key -> file|default[:note]
    derived: dict[str, object] = field(default_factory=dict)  # materialized quantities

    def echo(self) -> dict:
        """JSON-serializable header embedded in every output file."""
        return {"config": dict(self.values),
                "provenance": dict(self.provenance),
                "derived": dict(self.derived),
                "seed": self.seed}

    def echo_json(self) -> str:
        return json.dumps(self.echo(), sort_keys=True)


# --------------------------------------------------------------------------
# parsing helpers
# --------------------------------------------------------------------------

def _parse_file(path) -> dict[str, str]:
    values = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
            key, _, val = line.partition("=")
            key, val = key.strip(), val.strip()
            if key not in DEFAULTS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            if not val:
                raise ConfigError(f"{path}:{lineno}: empty value for {key!r}")
            values[key] = val
    return values


class _Reader:
    def __init__(self, values: dict[str, str]):
        self.values = dict(DEFAULTS)
        self.values.update(values)
        self.provenance = {
            k: ("file" if k in values else _DEFAULT_NOTES.get(k, "default"))
            for k in DEFAULTS
        }

    def raw(self, key) -> str:
        return self.values[key]

    def floatv(self, key) -> float:
        try:
            return float(self.raw(key))
        except ValueError as e:
            raise ConfigError(f"{key}: expected a number, got {self.raw(key)!r}") from e

    def intv(self, key) -> int:
        try:
            return int(self.raw(key))
        except ValueError as e:
            raise ConfigError(f"{key}: expected an integer, got {self.raw(key)!r}") from e

    def float_list(self, key) -> tuple[float, ...]:
        try:
            return tuple(float(p) for p in self.raw(key).split(","))
        except ValueError as e:
            raise ConfigError(f"{key}: expected comma-separated numbers, "
                              f"got {self.raw(key)!r}") from e

    def int_list(self, key) -> tuple[int, ...]:
        try:
            return tuple(int(p) for p in self.raw(key).split(","))
        except ValueError as e:
            raise ConfigError(f"{key}: expected comma-separated integers, "
                              f"got {self.raw(key)!r}") from e

    def choice(self, key, options) -> str:
        v = self.raw(key)
        if v not in options:
            raise ConfigError(f"{key}: must be one of {options}, got {v!r}")
        return v

    def str_list(self, key) -> tuple[str, ...]:
        return tuple(p.strip() for p in self.raw(key).split(","))


# --------------------------------------------------------------------------
# loading
# --------------------------------------------------------------------------

def load_config(path) -> ExperimentConfig:
    """Parse, default-fill, derive, and validate an experiment config file."""
    return build_config(_parse_file(path))


def default_config(**overrides: str) -> ExperimentConfig:
    """The all-defaults config, with optional key -> value-string overrides."""
    for k in overrides:
        if k not in DEFAULTS:
            raise ConfigError(f"unknown key {k!r}")
    return build_config({k: str(v) for k, v in overrides.items()})


def build_config(values: dict[str, str]) -> ExperimentConfig:
    r = _Reader(values)

    scenario = r.choice("scenario", SCENARIOS)
    state_mode = r.choice("state_mode", STATE_MODES)
    seed = r.intv("seed")

    diffusion_parts = r.float_list("wire.wind_diffusion")
    if len(diffusion_parts) == 1:
        diffusion = diffusion_parts[0] * np.eye(3)
    elif len(diffusion_parts) == 9:
        diffusion = np.array(diffusion_parts).reshape(3, 3)
    else:
        raise ConfigError("wire.wind_diffusion: give one scalar (s -> s*I) "
                          "or nine row-major entries")

    gravity = r.float_list("wire.gravity_mps2")
    if len(gravity) != 3:
        raise ConfigError("wire.gravity_mps2: expected three components")
    try:
        wire_params = wire_mod.WireParams(
            n_points=r.intv("wire.n_points"),
            mass_total=r.floatv("wire.mass_total_kg"),
            spring_k=r.floatv("wire.spring_k_n_per_m"),
            drag_c=r.floatv("wire.drag_c_per_s"),
            gravity=np.array(gravity),
            wind_diffusion=diffusion,
            endpoint_separation=r.floatv("wire.endpoint_separation_m"),
        )
    except ValueError as e:
        raise ConfigError(f"wire: {e}") from e

    wind = wire_mod.WindModel(amplitude=r.floatv("wind.amplitude_mps"),
                              periods=_three(r.float_list("wind.periods_s"),
                                             "wind.periods_s"))

    # receiver on the building wall: across the road from the wire midpoint,
    # at the height of the wire endpoints (sag above the origin)
    sag = wire_mod.sag_depth(wire_params)
    rx_position = np.array([0.0, r.floatv("channel.rx_distance_m"), sag])

    ref_raw = r.raw("channel.pathloss_ref_db")
    pathloss_ref = None if ref_raw == "free_space" else _as_float(
        ref_raw, "channel.pathloss_ref_db")
    try:
        channel = ChannelConfig(
            tx_power_dbm=r.floatv("channel.tx_power_dbm"),
            wavelength=r.floatv("channel.wavelength_m"),
            rx_gain_dbi=r.floatv("channel.rx_gain_dbi"),
            pathloss_exponent=r.floatv("channel.pathloss_exponent"),
            pathloss_ref_db=pathloss_ref,
            rx_position=rx_position,
        )
        array = ArrayConfig(
            n_vertical=r.intv("array.n_vertical"),
            n_horizontal=r.intv("array.n_horizontal"),
            corr_coeff=r.floatv("array.corr_coeff"),
            spacing_v=r.floatv("array.spacing_v_m"),
            spacing_h=r.floatv("array.spacing_h_m"),
            amplitude_norm=r.choice("array.amplitude_norm",
                                    ("paper_literal", "power_norm")),
        )
    except ValueError as e:
        raise ConfigError(f"channel/array: {e}") from e

    tx_point = r.intv("env.tx_point")
    if state_mode == "single_point":
        sense_points = (tx_point,)
    else:
        sense_points = r.int_list("env.sense_points")

    eq = wire_mod.solve_equilibrium(wire_params)
    offset_raw = r.raw("env.reward_offset_dbm")
    if offset_raw == "auto":
        # centre the linear reward band 0-10 dB below perfect alignment
        reward_offset = boresight_power(eq.positions[tx_point - 1], channel, array) - 5.0
    else:
        reward_offset = _as_float(offset_raw, "env.reward_offset_dbm")

    dur_raw = r.raw("wire.impulse_duration_s")
    impulse_duration = None if dur_raw == "substep" else _as_float(
        dur_raw, "wire.impulse_duration_s")

    env_cfg = EnvConfig(
        tau=r.floatv("env.tau_s"),
        lookback=r.floatv("env.lookback_s"),
        episode_duration=r.floatv("env.episode_duration_s"),
        refine_angle=math.radians(r.floatv("env.refine_angle_deg")),
        tx_point=tx_point,
        sense_points=sense_points,
        reward_offset_dbm=reward_offset,
        reward_scale_db=r.floatv("env.reward_scale_db"),
        impulse_enabled=(scenario == "wind_plus_impulse"),
        impulse_times_s=r.float_list("wire.impulse_times_s"),
        impulse_point=r.intv("wire.impulse_point"),
        impulse_force=_three(r.float_list("wire.impulse_force_n"),
                             "wire.impulse_force_n"),
        impulse_duration_s=impulse_duration,
        substep_dt=r.floatv("wire.substep_dt_s"),
    )

    try:
        train = TrainConfig(
            discount=r.floatv("train.discount"),
            epsilon_train=r.floatv("train.epsilon_train"),
            epsilon_eval=r.floatv("train.epsilon_eval"),
            learning_rate=r.floatv("train.learning_rate"),
            update_period_steps=r.intv("train.update_period_steps"),
            sample_block=r.intv("train.sample_block"),
            minibatch=r.intv("train.minibatch"),
            epochs=r.intv("train.epochs"),
            outer_iterations=r.intv("train.outer_iterations"),
            target_sync_steps=r.intv("train.target_sync_steps"),
            total_steps=r.intv("train.total_steps"),
            eval_steps=r.intv("train.eval_steps"),
            adam_beta1=r.floatv("train.adam_beta1"),
            adam_beta2=r.floatv("train.adam_beta2"),
            adam_eps=r.floatv("train.adam_eps"),
            replay_capacity=r.intv("train.replay_capacity"),
            hidden_sizes=r.int_list("train.hidden_sizes"),
        )
    except ValueError as e:
        raise ConfigError(f"train: {e}") from e

    sweep = SweepSpec(axis=r.choice("sweep.axis", SWEEP_AXES),
                      values=r.float_list("sweep.values"),
                      repetitions=r.intv("sweep.repetitions"),
                      policies=r.str_list("sweep.policies"))
    for p in sweep.policies:
        if p not in ("oracle", "fixed", "dqn"):
            raise ConfigError(f"sweep.policies: unknown policy {p!r}")

    eval_episodes = r.intv("eval.episodes")
    if eval_episodes < 0:
        raise ConfigError("eval.episodes must be >= 0")

    cfg = ExperimentConfig(
        scenario=scenario, state_mode=state_mode, seed=seed,
        output_dir=r.raw("output_dir"),
        wire=wire_params, wind=wind, channel=channel, array=array,
        env=env_cfg, train=train, sweep=sweep, eval_episodes=eval_episodes,
        values=dict(r.values), provenance=dict(r.provenance),
        derived={
            "rx_position_m": [float(v) for v in rx_position],
            "sag_depth_m": float(sag),
            "reward_offset_dbm": float(reward_offset),
            "pathloss_ref_db": float(channel.beta_db),
            "impulse_duration_s": impulse_duration,
            "weight_init": "he-uniform hidden, uniform(+-1e-3) output, zero biases",
        },
    )
    _cross_validate(cfg)
    return cfg


def _three(vals, key):
    if len(vals) != 3:
        raise ConfigError(f"{key}: expected three components")
    return tuple(vals)


def _as_float(raw, key):
    try:
        return float(raw)
    except ValueError as e:
        raise ConfigError(f"{key}: expected a number, got {raw!r}") from e


def _cross_validate(cfg: ExperimentConfig):
    dt = cfg.env.substep_dt
    bound = cfg.wire.max_stable_dt()
    if dt >= bound:
        raise ConfigError(
            f"wire.substep_dt_s = {dt} violates the stability bound "
            f"dt < 2/sqrt(4*k0*N/m) = {bound:.6f} s")
    for p in cfg.env.sense_points:
        if not 1 <= p <= cfg.wire.n_points:
            raise ConfigError(f"env.sense_points: P{p} outside 1..{cfg.wire.n_points}")
    if not 1 < cfg.env.tx_point < cfg.wire.n_points:
        raise ConfigError("env.tx_point must be an interior point")
    if cfg.env.impulse_enabled and not 1 < cfg.env.impulse_point < cfg.wire.n_points:
        raise ConfigError("wire.impulse_point must be an interior point")
    if cfg.sweep.axis == "lookback":
        for v in cfg.sweep.values:
            ratio = v / cfg.env.tau
            if abs(ratio - round(ratio)) > 1e-9:
                raise ConfigError(f"sweep over lookback: {v} s is not a "
                                  f"multiple of tau = {cfg.env.tau} s")


def apply_smoke(values: dict[str, str]) -> dict[str, str]:
    """Reduced-scale profile for quick end-to-end runs."""
    smoke = dict(values)
    smoke.setdefault("train.total_steps", "600")
    smoke.setdefault("train.sample_block", "256")
    smoke.setdefault("train.target_sync_steps", "300")
    smoke.setdefault("eval.episodes", "2")
    return smoke
