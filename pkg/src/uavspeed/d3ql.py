"""Deep dueling double Q-learning: replay buffer, double-Q targets, target sync."""
from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .env import state_from_index
from .network import (NetArchitecture, NetParams, encode_state, forward, init_params,
                      loss_and_gradient, q_values, sgd_step)
from .tabular import exploration_rng, greedy, linear_epsilon, select_epsilon_greedy


class Transition(NamedTuple):
    s: np.ndarray
    a: int
    r: float
    s_next: np.ndarray


class InsufficientData(ValueError):
    pass


class ReplayBuffer:
    """Fixed-capacity FIFO ring of transitions backed by numpy arrays."""

    def __init__(self, capacity: int, state_dim: int = 3):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.s = np.zeros((capacity, state_dim))
        self.s_next = np.zeros((capacity, state_dim))
        self.a = np.zeros(capacity, dtype=np.intp)
        self.r = np.zeros(capacity)
        self.size = 0
        self._head = 0

    def __len__(self) -> int:
        return self.size

    def add(self, s, a: int, r: float, s_next) -> None:
        i = self._head
        self.s[i] = s
        self.a[i] = a
        self.r[i] = r
        self.s_next[i] = s_next
        self._head = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def push(self, t: Transition) -> None:
        self.add(t.s, t.a, t.r, t.s_next)

    def _oldest_first(self) -> np.ndarray:
        if self.size < self.capacity:
            return np.arange(self.size)
        return (np.arange(self.size) + self._head) % self.capacity

    def contents(self) -> list[Transition]:
        return [Transition(self.s[i].copy(), int(self.a[i]), float(self.r[i]), self.s_next[i].copy())
                for i in self._oldest_first()]

    def sample_indices(self, k: int, rng: np.random.Generator) -> np.ndarray:
        if k < 1:
            raise ValueError("sample size must be >= 1")
        # draws are with replacement, so only an empty buffer is too small
        if self.size == 0:
            raise InsufficientData(f"buffer is empty, {k} transitions requested")
        return rng.integers(0, self.size, size=k)

    def sample(self, k: int, rng: np.random.Generator) -> list[Transition]:
        """``k`` uniform draws with replacement."""
        return [Transition(self.s[i].copy(), int(self.a[i]), float(self.r[i]), self.s_next[i].copy())
                for i in self.sample_indices(k, rng)]


def double_target(r, gamma, q_online_next, q_target_next):
    """Online net picks the next action, target net values it.

    Accepts a single transition (1-D q vectors) or a batch ((n, A) arrays).
    """
    qo = np.asarray(q_online_next, dtype=float)
    qt = np.asarray(q_target_next, dtype=float)
    if qo.ndim == 1:
        return float(r + gamma * qt[greedy(qo)])
    best = np.argmax(qo, axis=1)
    return np.asarray(r) + gamma * qt[np.arange(len(qt)), best]


def sync_target(online: NetParams) -> NetParams:
    return online.copy()


@dataclass
class D3QLConfig:
    discount: float = 0.9
    epsilon_start: float = 1.0
    epsilon_end: float = 0.01
    epsilon_decay_fraction: float = 0.8
    batch_size: int = 32
    buffer_capacity: int = 100_000
    target_sync_interval: int = 1_000
    learning_start: int = 1_000
    steps: int = 50_000
    learning_rate: float = 3e-3
    # per update; shrinks the step size 100x over 49k updates
    lr_decay: float = 0.999906
    hidden: tuple[int, ...] = (64, 64)

    def __post_init__(self):
        self.hidden = tuple(self.hidden)

    def validate(self) -> "D3QLConfig":
        if not 0 <= self.discount < 1:
            raise ValueError("discount must lie in [0, 1)")
        if not 1 <= self.batch_size <= self.buffer_capacity:
            raise ValueError("batch_size must lie in [1, buffer_capacity]")
        if self.target_sync_interval < 1:
            raise ValueError("target_sync_interval must be >= 1")
        if self.learning_rate <= 0 or not 0 < self.lr_decay <= 1:
            raise ValueError("learning_rate must be > 0 and lr_decay in (0, 1]")
        if self.steps < 0:
            raise ValueError("steps must be >= 0")
        return self

    @classmethod
    def from_dict(cls, data: dict) -> "D3QLConfig":
        return cls(**data).validate()

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(d["hidden"])
        return d

    def epsilon(self, step: int) -> float:
        return linear_epsilon(step, self.steps, self.epsilon_start, self.epsilon_end,
                              self.epsilon_decay_fraction)


def feature_table(env_config) -> np.ndarray:
    """Features for every state index (row 0 is the charging sentinel)."""
    n = env_config.num_cells * env_config.num_positions * (env_config.battery_capacity + 1) + 1
    return np.array([encode_state(state_from_index(i, env_config), env_config) for i in range(n)])


class StepResult(NamedTuple):
    next_state: tuple
    reward: float
    loss: float | None
    action: int
    epsilon: float


class D3QLAgent:
    def __init__(self, env, config: D3QLConfig, seed: int = 0):
        self.env = env
        self.config = config.validate()
        self.arch = NetArchitecture(3, config.hidden, env.num_actions)
        init_ss, batch_ss = np.random.SeedSequence([seed, 0xD3]).spawn(2)
        self.online = init_params(self.arch, init_ss)
        self.target = sync_target(self.online)
        self.buffer = ReplayBuffer(config.buffer_capacity, 3)
        self.explore_rng = exploration_rng(seed)
        self.batch_rng = np.random.default_rng(batch_ss)
        self.features = feature_table(env.config)
        self.eta = config.learning_rate
        self.steps_done = 0

    def act(self, x: np.ndarray, epsilon: float) -> int:
        u1, u2 = self.explore_rng.random(2)
        if u1 < epsilon:
            return select_epsilon_greedy((0.0,) * self.arch.num_actions, 1.0, 0.0, u2)
        return greedy(q_values(self.online, x))

    def learn(self) -> float:
        cfg = self.config
        b = self.buffer
        idx = b.sample_indices(cfg.batch_size, self.batch_rng)
        S, A, R, S2 = b.s[idx], b.a[idx], b.r[idx], b.s_next[idx]
        Y = double_target(R, cfg.discount, q_values(self.online, S2), q_values(self.target, S2))
        loss, grads = loss_and_gradient(self.online, S, A, Y)
        self.online = sgd_step(self.online, grads, self.eta)
        self.eta *= cfg.lr_decay
        return loss

    def train_step(self, state) -> StepResult:
        cfg = self.config
        t = self.steps_done
        eps = cfg.epsilon(t)
        x = self.features[self.env.state_index(state)]
        a = self.act(x, eps)
        out = self.env.step(a + 1)
        x_next = self.features[self.env.state_index(out.next_state)]
        self.buffer.add(x, a, out.reward, x_next)
        loss = None
        if len(self.buffer) >= max(cfg.learning_start, cfg.batch_size):
            loss = self.learn()
        self.steps_done += 1
        if self.steps_done % cfg.target_sync_interval == 0:
            self.target = sync_target(self.online)
        return StepResult(out.next_state, out.reward, loss, a, eps)


@dataclass
class TrainHistory:
    reward: np.ndarray
    loss: np.ndarray  # nan where no update happened
    epsilon: np.ndarray
    energy: np.ndarray
    cell: np.ndarray

    def write_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["step", "reward", "loss", "epsilon", "energy", "cell"])
            for t in range(len(self.reward)):
                loss = "" if np.isnan(self.loss[t]) else repr(float(self.loss[t]))
                w.writerow([t + 1, repr(float(self.reward[t])), loss, repr(float(self.epsilon[t])),
                            int(self.energy[t]), int(self.cell[t])])


def train(env, config: D3QLConfig, seed: int = 0, check_finite: bool = True):
    """Run D3QL training for ``config.steps`` slots on the continuing environment.

    Returns ``(online params, TrainHistory)``; ``history.loss`` is the
    per-step loss (nan during warm-up).
    """
    agent = D3QLAgent(env, config, seed)
    T = config.steps
    hist = TrainHistory(np.zeros(T), np.full(T, np.nan), np.zeros(T), np.zeros(T, dtype=int),
                        np.zeros(T, dtype=int))
    state = env.reset(seed)
    for t in range(T):
        res = agent.train_step(state)
        if res.loss is not None:
            hist.loss[t] = res.loss
            if check_finite and not agent.online.is_finite():
                raise FloatingPointError(f"non-finite parameters after step {t + 1}")
        hist.reward[t] = res.reward
        hist.epsilon[t] = res.epsilon
        hist.energy[t] = res.next_state[2]
        hist.cell[t] = res.next_state[0]
        state = res.next_state
    return agent.online, hist
