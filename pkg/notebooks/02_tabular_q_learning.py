"""
Tabular Q-learning
==================

First on a two-state chain whose optimal values are known from value
iteration, then on the full simulator (about 5.8k states by 3 actions).
"""
import numpy as np

from uavspeed import DEFAULT_CONFIG, UavEnv
from uavspeed.tabular import QLConfig, train

###############################################################################
# A chain we can solve exactly
# ----------------------------
# State 0: stay for reward 1 or move for 0. State 1: stay for 2 or move back for 0.


class Chain:
    num_states = num_actions = 2
    moves = {(0, 1): (0, 1.0), (0, 2): (1, 0.0), (1, 1): (1, 2.0), (1, 2): (0, 0.0)}

    def reset(self, seed=None):
        self.s = 0
        return 0

    def state_index(self, s):
        return s

    def step(self, level):
        from types import SimpleNamespace
        self.s, r = self.moves[(self.s, level)]
        return SimpleNamespace(next_state=self.s, reward=r)


Q = np.zeros((2, 2))
for _ in range(500):
    Q = np.array([[r + 0.9 * Q[s2].max() for s2, r in (Chain.moves[(s, a)] for a in (1, 2))] for s in (0, 1)])
print("value iteration:\n", Q.round(4))

table, _ = train(Chain(), QLConfig(steps=100_000, learning_rate=0.9, lr_decay_exponent=0.55), seed=0)
print("Q-learning with a decaying step size:\n", table.values.round(4))

###############################################################################
# The simulator
# -------------
# Constant step size 0.1 and epsilon decaying linearly from 1 to 0.01.

table, rewards = train(UavEnv(DEFAULT_CONFIG), QLConfig(steps=20_000), seed=0)
blocks = rewards.reshape(-1, 2_000).mean(axis=1)
print("mean reward per 2k-slot block:", blocks.round(3))
print("entries visited:", np.count_nonzero(table.values), "of", table.values.size)
