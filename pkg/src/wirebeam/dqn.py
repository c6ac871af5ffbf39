"""From-scratch deep Q-learning on numpy.

A plain MLP (three ReLU hidden layers, linear head over the nine steering
actions) is trained with Huber TD errors against a periodically frozen
target network, uniform replay sampling, and hand-rolled bias-corrected
Adam.  Every stochastic choice flows from one injected generator, so a
fixed seed reproduces parameters bit for bit.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .env import N_ACTIONS

CHECKPOINT_MAGIC = b"WBQN"
CHECKPOINT_VERSION = 1


class TrainingDivergedError(RuntimeError):
    """Loss became non-finite; carries a diagnostics dict."""

    def __init__(self, message: str, diagnostics: dict):
        super().__init__(message + " | " + json.dumps(diagnostics, default=str))
        self.diagnostics = diagnostics


# --------------------------------------------------------------------------
# network
# --------------------------------------------------------------------------

@dataclass
class MlpParams:
    """Weight matrices (fan_in x fan_out) and bias vectors, input to output."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @property
    def dims(self) -> tuple[int, ...]:
        return (self.weights[0].shape[0], *(w.shape[1] for w in self.weights))

    def copy(self) -> "MlpParams":
        return MlpParams([w.copy() for w in self.weights],
                         [b.copy() for b in self.biases])

    def allclose(self, other: "MlpParams") -> bool:
        return (all(np.array_equal(a, b) for a, b in zip(self.weights, other.weights))
                and all(np.array_equal(a, b) for a, b in zip(self.biases, other.biases)))


def init_mlp(dims: tuple[int, ...], rng: np.random.Generator) -> MlpParams:
    """He-uniform hidden layers, small-uniform output layer, zero biases."""
    weights, biases = [], []
    for i, (fan_in, fan_out) in enumerate(zip(dims[:-1], dims[1:])):
        if i == len(dims) - 2:
            bound = 1e-3
        else:
            bound = math.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpParams(weights, biases)


def forward(params: MlpParams, x: np.ndarray) -> np.ndarray:
    """Action values for one state (D,) -> (A,) or a batch (B,D) -> (B,A)."""
    x = np.asarray(x, float)
    single = x.ndim == 1
    h = x[None, :] if single else x
    if h.shape[1] != params.weights[0].shape[0]:
        raise ValueError(f"input dim {h.shape[1]} != network input "
                         f"{params.weights[0].shape[0]}")
    for w, b in zip(params.weights[:-1], params.biases[:-1]):
        h = np.maximum(h @ w + b, 0.0)
    q = h @ params.weights[-1] + params.biases[-1]
    return q[0] if single else q


def _forward_cached(params: MlpParams, x: np.ndarray):
    """Batch forward keeping pre-activations and activations for backprop."""
    pre, act = [], [x]
    h = x
    for w, b in zip(params.weights[:-1], params.biases[:-1]):
        z = h @ w + b
        pre.append(z)
        h = np.maximum(z, 0.0)
        act.append(h)
    q = h @ params.weights[-1] + params.biases[-1]
    return q, pre, act


# --------------------------------------------------------------------------
# loss
# --------------------------------------------------------------------------

def huber(x):
    """Quadratic within |x| <= 1, linear |x| - 0.5 outside."""
    x = np.asarray(x, float)
    out = np.where(np.abs(x) <= 1.0, 0.5 * x * x, np.abs(x) - 0.5)
    return float(out) if out.ndim == 0 else out


def huber_grad(x):
    """d huber / dx = clip(x, -1, 1)."""
    return np.clip(x, -1.0, 1.0)


@dataclass(frozen=True)
class Transition:
    """One replay record."""

    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray
    terminal: bool

    def __post_init__(self):
        if not -1.0 - 1e-9 <= self.reward <= 1.0 + 1e-9:
            raise ValueError(f"reward {self.reward} outside the clipped range [-1, 1]")


@dataclass
class TransitionBatch:
    states: np.ndarray       # (B, D)
    actions: np.ndarray      # (B,) int
    rewards: np.ndarray      # (B,)
    next_states: np.ndarray  # (B, D)
    terminals: np.ndarray    # (B,) bool

    def __len__(self):
        return self.states.shape[0]


def td_target(tr: Transition, target_params: MlpParams, gamma: float) -> float:
    """r + gamma * max_a' Q_target(s', a'); the bootstrap drops when terminal."""
    if tr.terminal:
        return float(tr.reward)
    return float(tr.reward + gamma * forward(target_params, tr.next_state).max())


def _batch_td_targets(batch: TransitionBatch, target_params: MlpParams,
                      gamma: float) -> np.ndarray:
    boot = forward(target_params, batch.next_states).max(axis=1)
    return batch.rewards + gamma * boot * (~batch.terminals)


def _loss_and_grad(params: MlpParams, batch: TransitionBatch,
                   target_params: MlpParams, gamma: float):
    """Mean Huber TD loss and its gradient; no gradient flows to the target."""
    y = _batch_td_targets(batch, target_params, gamma)
    q, pre, act = _forward_cached(params, batch.states)
    rows = np.arange(len(batch))
    resid = q[rows, batch.actions] - y
    loss = float(np.mean(huber(resid)))

    dq = np.zeros_like(q)
    dq[rows, batch.actions] = huber_grad(resid) / len(batch)

    grads_w = [None] * len(params.weights)
    grads_b = [None] * len(params.biases)
    grads_w[-1] = act[-1].T @ dq
    grads_b[-1] = dq.sum(axis=0)
    dh = dq @ params.weights[-1].T
    for layer in range(len(params.weights) - 2, -1, -1):
        dz = dh * (pre[layer] > 0.0)
        grads_w[layer] = act[layer].T @ dz
        grads_b[layer] = dz.sum(axis=0)
        if layer > 0:
            dh = dz @ params.weights[layer].T
    return loss, grads_w, grads_b


def grad(params: MlpParams, batch: TransitionBatch, target_params: MlpParams,
         gamma: float):
    """Gradient of the mean Huber TD loss over the minibatch.

    Returns (weight gradients, bias gradients) shaped like the parameters.
    """
    if len(batch) == 0:
        raise ValueError("minibatch must be non-empty")
    _, gw, gb = _loss_and_grad(params, batch, target_params, gamma)
    return gw, gb


# --------------------------------------------------------------------------
# optimizer
# --------------------------------------------------------------------------

@dataclass
class AdamState:
    m_w: list[np.ndarray]
    v_w: list[np.ndarray]
    m_b: list[np.ndarray]
    v_b: list[np.ndarray]
    t: int = 0

    def copy(self) -> "AdamState":
        return AdamState([a.copy() for a in self.m_w], [a.copy() for a in self.v_w],
                         [a.copy() for a in self.m_b], [a.copy() for a in self.v_b],
                         self.t)


def init_adam(params: MlpParams) -> AdamState:
    return AdamState([np.zeros_like(w) for w in params.weights],
                     [np.zeros_like(w) for w in params.weights],
                     [np.zeros_like(b) for b in params.biases],
                     [np.zeros_like(b) for b in params.biases])


def _adam_update_inplace(params: MlpParams, state: AdamState, grads_w, grads_b,
                         lr: float, beta1: float, beta2: float, eps: float):
    state.t += 1
    c1 = 1.0 - beta1 ** state.t
    c2 = 1.0 - beta2 ** state.t
    for arrs, moments1, moments2, grads in (
            (params.weights, state.m_w, state.v_w, grads_w),
            (params.biases, state.m_b, state.v_b, grads_b)):
        for a, m, v, g in zip(arrs, moments1, moments2, grads):
            m *= beta1
            m += (1.0 - beta1) * g
            v *= beta2
            v += (1.0 - beta2) * (g * g)
            a -= lr * (m / c1) / (np.sqrt(v / c2) + eps)


def adam_step(params: MlpParams, state: AdamState, grads,
              cfg: "TrainConfig") -> tuple[MlpParams, AdamState]:
    """Pure bias-corrected Adam step; inputs are left untouched."""
    grads_w, grads_b = grads
    new_params, new_state = params.copy(), state.copy()
    _adam_update_inplace(new_params, new_state, grads_w, grads_b,
                         cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2,
                         cfg.adam_eps)
    return new_params, new_state


# --------------------------------------------------------------------------
# exploration and replay
# --------------------------------------------------------------------------

def select_action(qvalues: np.ndarray, epsilon: float,
                  rng: np.random.Generator) -> int:
    """Epsilon-greedy over the action values; greedy ties take the lowest index."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must be in [0, 1]")
    if epsilon > 0.0 and rng.random() < epsilon:
        return int(rng.integers(N_ACTIONS))
    return int(np.argmax(qvalues))


class ReplayBuffer:
    """Bounded FIFO of transitions with uniform without-replacement sampling."""

    def __init__(self, capacity: int, state_dim: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._states = np.empty((capacity, state_dim))
        self._actions = np.empty(capacity, dtype=np.int64)
        self._rewards = np.empty(capacity)
        self._next_states = np.empty((capacity, state_dim))
        self._terminals = np.empty(capacity, dtype=bool)
        self._size = 0
        self._head = 0

    def __len__(self):
        return self._size

    def push(self, state, action, reward, next_state, terminal):
        if not -1.0 - 1e-9 <= reward <= 1.0 + 1e-9:
            raise ValueError(f"reward {reward} outside the clipped range [-1, 1]")
        i = self._head
        self._states[i] = state
        self._actions[i] = action
        self._rewards[i] = reward
        self._next_states[i] = next_state
        self._terminals[i] = terminal
        self._head = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def push_transition(self, tr: Transition):
        self.push(tr.state, tr.action, tr.reward, tr.next_state, tr.terminal)

    def sample(self, rng: np.random.Generator, n: int) -> TransitionBatch:
        if n > self._size:
            raise ValueError(f"cannot draw {n} transitions from a buffer of {self._size}")
        idx = rng.choice(self._size, size=n, replace=False)
        return TransitionBatch(self._states[idx].copy(),
                               self._actions[idx].copy(),
                               self._rewards[idx].copy(),
                               self._next_states[idx].copy(),
                               self._terminals[idx].copy())


# --------------------------------------------------------------------------
# training
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class TrainConfig:
    discount: float = 0.99
    epsilon_train: float = 0.2
    epsilon_eval: float = 0.0
    learning_rate: float = 1e-4
    update_period_steps: int = 300
    sample_block: int = 2048
    minibatch: int = 32
    epochs: int = 8
    outer_iterations: int = 4
    target_sync_steps: int = 3000
    total_steps: int = 100_000
    eval_steps: int = 300
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    replay_capacity: int = 50_000
    hidden_sizes: tuple[int, ...] = (128, 128, 128)

    def __post_init__(self):
        object.__setattr__(self, "hidden_sizes", tuple(self.hidden_sizes))
        if not 0.0 <= self.discount < 1.0:
            raise ValueError("discount must be in [0, 1)")
        for name in ("epsilon_train", "epsilon_eval"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")
        if self.replay_capacity < self.sample_block:
            raise ValueError("replay_capacity must cover at least one sample block")
        for name in ("learning_rate", "update_period_steps", "sample_block",
                     "minibatch", "epochs", "outer_iterations", "target_sync_steps",
                     "total_steps", "eval_steps"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class TrainResult:
    params: MlpParams
    adam: AdamState
    log: list[dict] = field(default_factory=list)
    total_steps: int = 0
    target_params: MlpParams | None = None


def _greedy_segment(env, params: MlpParams, steps: int):
    """Run a greedy (epsilon = 0) segment; returns (mean power, mean reward)."""
    powers, rewards = [], []
    s = env.state_vector
    for _ in range(steps):
        out = env.step(int(np.argmax(forward(params, s))))
        powers.append(out.raw_power_dbm)
        rewards.append(out.proxy_reward)
        s = out.next_state
        if out.episode_done:
            break
    return float(np.mean(powers)), float(np.mean(rewards))


def _policy_segment(env, policy_fn, steps: int) -> float:
    """Mean raw power of a scripted policy over up to `steps` steps."""
    powers = []
    for _ in range(steps):
        out = env.step(policy_fn(env))
        powers.append(out.raw_power_dbm)
        if out.episode_done:
            break
    return float(np.mean(powers))


def train(env_factory: Callable[[int], object], cfg: TrainConfig, seed: int,
          baseline_policies: dict[str, Callable] | None = None) -> TrainResult:
    """Run the full DQN protocol and return parameters plus the phase log.

    env_factory(seed) must build a fresh episode handle exposing
    .state_vector and .step(action) -> StepOutcome.  Every
    update_period_steps environment steps (once the buffer holds a full
    sample block), outer_iterations blocks of sample_block transitions are
    drawn and fitted for `epochs` passes of minibatch Adam updates; the
    target network refreshes every target_sync_steps; after each update
    phase a fresh greedy episode segment is evaluated and logged, together
    with any baseline policies run on the same evaluation seed.
    """
    rng = np.random.default_rng(seed)
    env = env_factory(int(rng.integers(2 ** 63)))
    s = np.asarray(env.state_vector, float).copy()
    input_dim = s.size

    params = init_mlp((input_dim, *cfg.hidden_sizes, N_ACTIONS), rng)
    target = params.copy()
    adam = init_adam(params)
    buffer = ReplayBuffer(cfg.replay_capacity, input_dim)
    result = TrainResult(params=params, adam=adam)
    phase = 0

    for global_step in range(1, cfg.total_steps + 1):
        action = select_action(forward(params, s), cfg.epsilon_train, rng)
        out = env.step(action)
        buffer.push(s, action, out.proxy_reward, out.next_state, out.episode_done)
        s = np.asarray(out.next_state, float).copy()
        if out.episode_done:
            env = env_factory(int(rng.integers(2 ** 63)))
            s = np.asarray(env.state_vector, float).copy()

        if global_step % cfg.target_sync_steps == 0:
            target = params.copy()

        if global_step % cfg.update_period_steps == 0 and len(buffer) >= cfg.sample_block:
            phase += 1
            losses = []
            for _ in range(cfg.outer_iterations):
                block = buffer.sample(rng, cfg.sample_block)
                for _ in range(cfg.epochs):
                    order = rng.permutation(cfg.sample_block)
                    for lo in range(0, cfg.sample_block, cfg.minibatch):
                        idx = order[lo:lo + cfg.minibatch]
                        mb = TransitionBatch(block.states[idx], block.actions[idx],
                                             block.rewards[idx], block.next_states[idx],
                                             block.terminals[idx])
                        loss, gw, gb = _loss_and_grad(params, mb, target, cfg.discount)
                        if not math.isfinite(loss):
                            raise TrainingDivergedError(
                                "non-finite loss",
                                {"global_step": global_step, "phase": phase,
                                 "loss": loss,
                                 "q_max": float(np.max(np.abs(forward(params, mb.states))))})
                        _adam_update_inplace(params, adam, gw, gb,
                                             cfg.learning_rate, cfg.adam_beta1,
                                             cfg.adam_beta2, cfg.adam_eps)
                        losses.append(loss)

            eval_seed = int(rng.integers(2 ** 63))
            mean_power, mean_reward = _greedy_segment(env_factory(eval_seed),
                                                      params, cfg.eval_steps)
            row = {"global_step": global_step, "phase": phase,
                   "mean_eval_power_dbm": mean_power,
                   "mean_proxy_reward": mean_reward,
                   "loss": float(np.mean(losses)),
                   "eval_seed": eval_seed}
            for name, fn in (baseline_policies or {}).items():
                row[f"mean_{name}_power_dbm"] = _policy_segment(
                    env_factory(eval_seed), fn, cfg.eval_steps)
            result.log.append(row)

    result.total_steps = cfg.total_steps
    result.target_params = target
    return result


# --------------------------------------------------------------------------
# checkpoints
# --------------------------------------------------------------------------

def save_checkpoint(path, params: MlpParams, adam: AdamState, global_step: int,
                    config_json: str = "{}"):
    """Versioned flat binary: dims, weights/biases row-major, Adam state,
    step counter, and the configuration echo."""
    dims = params.dims
    blob = config_json.encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<II", CHECKPOINT_VERSION, len(dims)))
        fh.write(struct.pack(f"<{len(dims)}I", *dims))
        fh.write(struct.pack("<QQQ", adam.t, global_step, len(blob)))
        fh.write(blob)
        for arrs in (params.weights, params.biases, adam.m_w, adam.v_w,
                     adam.m_b, adam.v_b):
            for a in arrs:
                fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def load_checkpoint(path) -> tuple[MlpParams, AdamState, int, str]:
    with open(path, "rb") as fh:
        if fh.read(4) != CHECKPOINT_MAGIC:
            raise ValueError(f"{path} is not a checkpoint file")
        version, n_dims = struct.unpack("<II", fh.read(8))
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        dims = struct.unpack(f"<{n_dims}I", fh.read(4 * n_dims))
        adam_t, global_step, blob_len = struct.unpack("<QQQ", fh.read(24))
        config_json = fh.read(blob_len).decode("utf-8")

        def read_arrays(shapes):
            out = []
            for shape in shapes:
                count = int(np.prod(shape))
                data = np.frombuffer(fh.read(8 * count), dtype="<f8").copy()
                out.append(data.reshape(shape))
            return out

        w_shapes = list(zip(dims[:-1], dims[1:]))
        b_shapes = [(d,) for d in dims[1:]]
        weights = read_arrays(w_shapes)
        biases = read_arrays(b_shapes)
        adam = AdamState(read_arrays(w_shapes), read_arrays(w_shapes),
                         read_arrays(b_shapes), read_arrays(b_shapes), adam_t)
    return MlpParams(weights, biases), adam, global_step, config_json
