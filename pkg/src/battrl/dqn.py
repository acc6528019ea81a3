"""Deep Q-learning from scratch on float64 numpy.

The learner is the classic recipe: a small fully-connected Q-network, a
frozen target copy refreshed every fixed number of gradient steps, a bounded
FIFO replay buffer with uniform sampling, epsilon-greedy exploration with
per-step multiplicative decay, and Adam on the squared Bellman error.
Everything is deterministic given the seed.

Environments are duck-typed gym-style: ``reset() -> obs`` and
``step(action_index) -> (next_obs, reward, done, info)`` with float64
observation vectors, plus an ``n_actions`` attribute.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

DEFAULT_HIDDEN = (128, 32)


@dataclass(frozen=True)
class QNetworkParams:
    """Weights and biases of the fully-connected Q-network.

    ``weights[i]`` has shape (fan_out, fan_in); layer i maps activations
    through ``W @ h + b`` followed by ReLU on all but the last layer.
    """

    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        ws = tuple(np.ascontiguousarray(w, dtype=np.float64) for w in self.weights)
        bs = tuple(np.ascontiguousarray(b, dtype=np.float64) for b in self.biases)
        object.__setattr__(self, "weights", ws)
        object.__setattr__(self, "biases", bs)
        if len(ws) != len(bs) or not ws:
            raise ValueError("need matching, nonempty weight/bias lists")
        for i, (w, b) in enumerate(zip(ws, bs)):
            if w.ndim != 2 or b.ndim != 1 or w.shape[0] != b.size:
                raise ValueError(f"layer {i}: weight {w.shape} and bias {b.shape} disagree")
            if i > 0 and w.shape[1] != ws[i - 1].shape[0]:
                raise ValueError(f"layer {i}: fan-in {w.shape[1]} != previous fan-out")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError(f"layer {i}: non-finite parameters")

    def layer_sizes(self) -> tuple[int, ...]:
        """(input_dim, hidden..., output_dim)."""
        return (self.weights[0].shape[1],) + tuple(w.shape[0] for w in self.weights)

    @property
    def n_actions(self) -> int:
        return self.weights[-1].shape[0]

    @classmethod
    def init(
        cls,
        obs_dim: int,
        n_actions: int,
        hidden: Sequence[int] = DEFAULT_HIDDEN,
        rng: np.random.Generator | None = None,
    ) -> "QNetworkParams":
        """Fan-in-scaled uniform initialization: U(-1/sqrt(fan_in), +1/sqrt(fan_in))."""
        rng = rng or np.random.default_rng(0)
        sizes = (obs_dim, *hidden, n_actions)
        weights = []
        biases = []
        for fan_in, fan_out in zip(sizes, sizes[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
            biases.append(rng.uniform(-bound, bound, size=fan_out))
        return cls(tuple(weights), tuple(biases))


class Gradients(NamedTuple):
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]


class Batch(NamedTuple):
    obs: np.ndarray        # (B, obs_dim)
    actions: np.ndarray    # (B,) int64
    rewards: np.ndarray    # (B,)
    next_obs: np.ndarray   # (B, obs_dim)
    terminals: np.ndarray  # (B,) bool


def q_forward(params: QNetworkParams, obs: np.ndarray) -> np.ndarray:
    """Q-values for one observation (1-D) or a batch (2-D, row-per-sample)."""
    x = np.asarray(obs, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != params.weights[0].shape[1]:
        raise ValueError(
            f"observation shape {np.shape(obs)} does not feed a "
            f"{params.weights[0].shape[1]}-input network"
        )
    h = x
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        h = h @ w.T + b
        if i < last:
            np.maximum(h, 0.0, out=h)
    return h[0] if single else h


def _forward_trace(params: QNetworkParams, x: np.ndarray) -> tuple[list[np.ndarray], np.ndarray]:
    """Forward pass keeping post-activation layer inputs for backprop."""
    acts = [x]
    h = x
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        h = h @ w.T + b
        if i < last:
            np.maximum(h, 0.0, out=h)
            acts.append(h)
    return acts, h


def bellman_loss_grad(
    params: QNetworkParams,
    target_params: QNetworkParams,
    batch: Batch,
    gamma: float,
) -> tuple[float, Gradients]:
    """Mean squared Bellman error and its gradient in the online parameters.

    Targets are r + gamma * max_a' Q_target(s', a'), or bare r on terminal
    transitions; no gradient flows through the target network.
    """
    n = batch.obs.shape[0]
    if n == 0:
        raise ValueError("empty batch")
    acts, q = _forward_trace(params, np.asarray(batch.obs, dtype=np.float64))
    rows = np.arange(n)
    q_sa = q[rows, batch.actions]
    next_best = q_forward(target_params, batch.next_obs).max(axis=1)
    targets = batch.rewards + gamma * np.where(batch.terminals, 0.0, next_best)
    err = q_sa - targets
    loss = float(np.mean(err * err))

    delta = np.zeros_like(q)
    delta[rows, batch.actions] = (2.0 / n) * err
    gw: list[np.ndarray] = [None] * len(params.weights)  # type: ignore[list-item]
    gb: list[np.ndarray] = [None] * len(params.biases)  # type: ignore[list-item]
    for i in range(len(params.weights) - 1, -1, -1):
        gw[i] = delta.T @ acts[i]
        gb[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ params.weights[i]) * (acts[i] > 0.0)
    return loss, Gradients(tuple(gw), tuple(gb))


@dataclass(frozen=True)
class AdamState:
    """First/second moment accumulators and the step counter."""

    m_weights: tuple[np.ndarray, ...]
    v_weights: tuple[np.ndarray, ...]
    m_biases: tuple[np.ndarray, ...]
    v_biases: tuple[np.ndarray, ...]
    t: int = 0

    @classmethod
    def init(cls, params: QNetworkParams) -> "AdamState":
        zw = tuple(np.zeros_like(w) for w in params.weights)
        zb = tuple(np.zeros_like(b) for b in params.biases)
        return cls(zw, tuple(np.zeros_like(w) for w in params.weights),
                   zb, tuple(np.zeros_like(b) for b in params.biases))


def adam_update(
    params: QNetworkParams,
    grads: Gradients,
    state: AdamState,
    learning_rate: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> tuple[QNetworkParams, AdamState]:
    """One bias-corrected adaptive-moment step; returns new params and state."""
    t = state.t + 1
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t

    def _step(p, g, m, v):
        m_new = beta1 * m + (1.0 - beta1) * g
        v_new = beta2 * v + (1.0 - beta2) * (g * g)
        p_new = p - learning_rate * (m_new / c1) / (np.sqrt(v_new / c2) + eps)
        return p_new, m_new, v_new

    new_w, mw, vw = [], [], []
    for p, g, m, v in zip(params.weights, grads.weights, state.m_weights, state.v_weights):
        pn, mn, vn = _step(p, g, m, v)
        new_w.append(pn); mw.append(mn); vw.append(vn)
    new_b, mb, vb = [], [], []
    for p, g, m, v in zip(params.biases, grads.biases, state.m_biases, state.v_biases):
        pn, mn, vn = _step(p, g, m, v)
        new_b.append(pn); mb.append(mn); vb.append(vn)
    return (
        QNetworkParams(tuple(new_w), tuple(new_b)),
        AdamState(tuple(mw), tuple(vw), tuple(mb), tuple(vb), t),
    )


class ReplayBuffer:
    """Bounded FIFO of transitions with uniform random minibatch sampling."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = int(capacity)
        self._size = 0
        self._head = 0
        self._obs: np.ndarray | None = None
        self._next_obs: np.ndarray | None = None
        self._actions = np.zeros(capacity, dtype=np.int64)
        self._rewards = np.zeros(capacity, dtype=np.float64)
        self._terminals = np.zeros(capacity, dtype=bool)

    def __len__(self) -> int:
        return self._size

    def push(self, obs, action: int, reward: float, next_obs, terminal: bool) -> None:
        obs = np.asarray(obs, dtype=np.float64)
        next_obs = np.asarray(next_obs, dtype=np.float64)
        if self._obs is None:
            self._obs = np.zeros((self.capacity, obs.size))
            self._next_obs = np.zeros((self.capacity, obs.size))
        i = self._head
        self._obs[i] = obs
        self._next_obs[i] = next_obs
        self._actions[i] = action
        self._rewards[i] = reward
        self._terminals[i] = terminal
        self._head = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator) -> Batch:
        if self._size == 0:
            raise ValueError("cannot sample from an empty buffer")
        idx = rng.integers(0, self._size, size=batch_size)
        return Batch(
            self._obs[idx].copy(),
            self._actions[idx].copy(),
            self._rewards[idx].copy(),
            self._next_obs[idx].copy(),
            self._terminals[idx].copy(),
        )


def select_action(
    params: QNetworkParams,
    obs: np.ndarray,
    epsilon: float,
    rng: np.random.Generator,
) -> int:
    """Epsilon-greedy action; greedy ties break toward the lowest index."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must lie in [0, 1]")
    if epsilon > 0.0 and rng.random() < epsilon:
        return int(rng.integers(params.n_actions))
    return int(np.argmax(q_forward(params, obs)))


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for the training loop.

    When ``kappa`` is omitted it is derived so the per-step multiplicative
    epsilon decay reaches ``epsilon_floor`` halfway through the full run of
    ``episodes * steps_per_episode`` environment steps.
    """

    gamma: float = 1.0
    learning_rate: float = 0.001
    epsilon_init: float = 1.0
    epsilon_floor: float = 0.001
    kappa: float | None = None
    batch_size: int = 256
    target_interval: int = 500
    episodes: int = 2000
    steps_per_episode: int = 8640
    replay_capacity: int = 100_000
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    hidden: tuple[int, ...] = DEFAULT_HIDDEN
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")
        for name in ("learning_rate", "epsilon_floor", "batch_size",
                     "target_interval", "episodes", "steps_per_episode",
                     "replay_capacity", "adam_eps"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 <= self.epsilon_init <= 1.0:
            raise ValueError("epsilon_init must lie in [0, 1]")
        if self.kappa is None:
            if self.epsilon_init <= self.epsilon_floor:
                object.__setattr__(self, "kappa", 1.0 - 1e-12)
            else:
                half = 0.5 * self.episodes * self.steps_per_episode
                object.__setattr__(
                    self, "kappa",
                    float((self.epsilon_floor / self.epsilon_init) ** (1.0 / half)),
                )
        if not 0.0 < self.kappa < 1.0:
            raise ValueError("kappa must lie in (0, 1)")


@dataclass(frozen=True)
class EpisodeRecord:
    episode: int
    profile_id: str
    total_reward: float
    epsilon_end: float
    mean_loss: float
    updates: int
    #: (energy, deviation, degradation) cost totals when the env reports them
    env_totals: tuple[float, float, float] | None = None


@dataclass(frozen=True)
class TrainResult:
    params: QNetworkParams
    episode_rewards: np.ndarray
    records: tuple[EpisodeRecord, ...]
    replay_size: int


def train(env_factory, config: TrainConfig, profiles: Sequence, step_hook=None) -> TrainResult:
    """Run the full learning loop and return final parameters plus the reward trace.

    One environment per episode, cycling round-robin through ``profiles``.
    Per step: epsilon-greedy action, environment step, store the transition,
    sample a uniform minibatch once the buffer holds ``batch_size`` tuples,
    one Adam update, a hard target sync whenever the global step count is a
    multiple of ``target_interval``, then epsilon decays by ``kappa`` down to
    its floor. ``step_hook(global_step, params, target)``, when given, is
    called after each step (instrumentation for tests and tracing).
    """
    if not profiles:
        raise ValueError("need at least one profile")
    for p in profiles:
        if len(p) < config.steps_per_episode:
            raise ValueError(
                f"profile {getattr(p, 'profile_id', '?')!r} has {len(p)} steps, "
                f"needs >= {config.steps_per_episode}"
            )
    rng = np.random.default_rng(config.seed)
    probe_env = env_factory(profiles[0])
    obs = np.asarray(probe_env.reset(), dtype=np.float64)
    params = QNetworkParams.init(obs.size, probe_env.n_actions, config.hidden, rng)
    target = params
    adam = AdamState.init(params)
    buffer = ReplayBuffer(config.replay_capacity)
    epsilon = config.epsilon_init
    global_step = 0

    totals: list[float] = []
    records: list[EpisodeRecord] = []
    for episode in range(config.episodes):
        profile = profiles[episode % len(profiles)]
        env = probe_env if episode == 0 else env_factory(profile)
        obs = np.asarray(env.reset(), dtype=np.float64)
        total = 0.0
        loss_sum = 0.0
        updates = 0
        for _ in range(config.steps_per_episode):
            action = select_action(params, obs, epsilon, rng)
            next_obs, reward, done, _info = env.step(action)
            next_obs = np.asarray(next_obs, dtype=np.float64)
            buffer.push(obs, action, reward, next_obs, bool(done))
            global_step += 1
            if len(buffer) >= config.batch_size:
                batch = buffer.sample(config.batch_size, rng)
                loss, grads = bellman_loss_grad(params, target, batch, config.gamma)
                params, adam = adam_update(
                    params, grads, adam, config.learning_rate,
                    config.adam_beta1, config.adam_beta2, config.adam_eps,
                )
                loss_sum += loss
                updates += 1
            if global_step % config.target_interval == 0:
                target = params
            epsilon = max(epsilon * config.kappa, config.epsilon_floor)
            total += reward
            obs = next_obs
            if step_hook is not None:
                step_hook(global_step, params, target)
            if done:
                break
        totals.append(total)
        records.append(EpisodeRecord(
            episode, getattr(profile, "profile_id", ""), total, epsilon,
            loss_sum / updates if updates else float("nan"), updates,
            getattr(env, "episode_totals", None),
        ))
    return TrainResult(params, np.asarray(totals), tuple(records), len(buffer))
