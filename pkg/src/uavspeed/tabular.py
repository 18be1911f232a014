"""Tabular Q-learning with epsilon-greedy exploration on a continuing task."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np


def linear_epsilon(step: int, total_steps: int, start: float = 1.0, end: float = 0.01,
                   decay_fraction: float = 0.8) -> float:
    """Linear decay from ``start`` to ``end`` over the first ``decay_fraction`` of training,
    then held at ``end``."""
    horizon = decay_fraction * total_steps
    if horizon <= 0 or step >= horizon:
        return end
    return start + (end - start) * step / horizon


def exploration_rng(seed: int) -> np.random.Generator:
    """Stream for epsilon-greedy draws (two uniforms per step).

    Both learners use it, so when trained on the same seed they explore on the
    same slots with the same random actions and differ only in greedy choices.
    """
    return np.random.default_rng(np.random.SeedSequence([seed, 0xE5]))


def q_update(q: float, r: float, max_next_q: float, beta: float, gamma: float) -> float:
    return q + beta * (r + gamma * max_next_q - q)


def greedy(q_row) -> int:
    """Argmax with ties going to the lowest index."""
    return int(np.argmax(q_row))


def select_epsilon_greedy(q_row, epsilon: float, u_explore: float, u_choice: float) -> int:
    n = len(q_row)
    if n == 0:
        raise ValueError("q_row must not be empty")
    if u_explore < epsilon:
        return min(int(u_choice * n), n - 1)
    return greedy(q_row)


@dataclass
class QLConfig:
    learning_rate: float = 0.1
    discount: float = 0.9
    epsilon_start: float = 1.0
    epsilon_end: float = 0.01
    epsilon_decay_fraction: float = 0.8
    steps: int = 50_000
    # 0 keeps the learning rate constant; > 0.5 gives beta_n = lr / n**exponent
    # per (state, action) visit count, which satisfies the Robbins-Monro conditions
    lr_decay_exponent: float = 0.0

    def validate(self) -> "QLConfig":
        if not 0 <= self.learning_rate < 1:
            raise ValueError("learning_rate must lie in [0, 1)")
        if not 0 <= self.discount < 1:
            raise ValueError("discount must lie in [0, 1)")
        for eps in (self.epsilon_start, self.epsilon_end):
            if not 0 <= eps <= 1:
                raise ValueError("epsilon values must lie in [0, 1]")
        if self.steps < 0:
            raise ValueError("steps must be >= 0")
        if self.lr_decay_exponent < 0:
            raise ValueError("lr_decay_exponent must be >= 0")
        return self

    @classmethod
    def from_dict(cls, data: dict) -> "QLConfig":
        return cls(**data).validate()

    def epsilon(self, step: int) -> float:
        return linear_epsilon(step, self.steps, self.epsilon_start, self.epsilon_end,
                              self.epsilon_decay_fraction)


class QTable:
    """Dense (state-index, action-index) value table, zero initialised."""

    def __init__(self, num_states: int, num_actions: int):
        self.values = np.zeros((num_states, num_actions))

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def greedy_action(self, s: int) -> int:
        return greedy(self.values[s])

    def save_csv(self, path) -> None:
        """Write non-zero entries as ``state_index,action_index,value`` rows.

        Entries that are absent on load are zero, so the file round-trips.
        """
        path = Path(path)
        rows = np.argwhere(self.values != 0.0)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["num_states", "num_actions", ""])
            w.writerow([self.values.shape[0], self.values.shape[1], ""])
            w.writerow(["state_index", "action_index", "value"])
            for s, a in rows:
                w.writerow([int(s), int(a), repr(float(self.values[s, a]))])

    @classmethod
    def load_csv(cls, path) -> "QTable":
        with Path(path).open(newline="") as fh:
            r = csv.reader(fh)
            next(r)
            ns, na, _ = next(r)
            table = cls(int(ns), int(na))
            next(r)
            for s, a, v in r:
                table.values[int(s), int(a)] = float(v)
        return table


def train(env, config: QLConfig, seed: int = 0):
    """Run ``config.steps`` slots of act / observe / update on a continuing task.

    ``env`` needs ``reset(seed)``, ``step(level)`` (levels are 1-based),
    ``state_index(state)``, ``num_states`` and ``num_actions``. Charging slots
    are treated as ordinary transitions: the agent still acts (the action is
    ignored by the simulator) and the sentinel entry is bootstrapped through.

    Returns the table and the per-step reward history.
    """
    config.validate()
    table = QTable(env.num_states, env.num_actions)
    Q = table.values
    visits = np.zeros_like(Q, dtype=np.int64)
    rewards = np.zeros(config.steps)
    agent_rng = exploration_rng(seed)
    state = env.reset(seed)
    s = env.state_index(state)
    gamma, lr, omega = config.discount, config.learning_rate, config.lr_decay_exponent
    for t in range(config.steps):
        eps = config.epsilon(t)
        u1, u2 = agent_rng.random(2)
        a = select_epsilon_greedy(Q[s], eps, u1, u2)
        out = env.step(a + 1)
        s_next = env.state_index(out.next_state)
        visits[s, a] += 1
        beta = lr if omega == 0 else lr / visits[s, a] ** omega
        Q[s, a] = q_update(Q[s, a], out.reward, Q[s_next].max(), beta, gamma)
        rewards[t] = out.reward
        s = s_next
    return table, rewards
