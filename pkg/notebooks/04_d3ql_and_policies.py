"""
Dueling double deep Q-learning and policy evaluation
====================================================

Trains the deep agent for a short run, inspects the greedy speed chosen in
each cell, and compares it with the three constant-speed baselines. Full
5e4-step runs take roughly 20 seconds each on one core.
"""
from collections import Counter

from uavspeed import DEFAULT_CONFIG, UavEnv
from uavspeed.d3ql import D3QLConfig, train
from uavspeed.harness import FixedSpeedPolicy, GreedyNetPolicy, evaluate_policy, rollout_trace

config = D3QLConfig(steps=15_000)
params, history = train(UavEnv(DEFAULT_CONFIG), config, seed=0)
print("mean training reward, last 2k slots:", history.reward[-2_000:].mean().round(3))

###############################################################################
# Greedy speeds along a rollout
# -----------------------------

policy = GreedyNetPolicy(params, DEFAULT_CONFIG)
trace = rollout_trace(policy, DEFAULT_CONFIG, horizon=2_000, seed=0)
for cell in range(1, DEFAULT_CONFIG.num_cells + 1):
    speeds = Counter(r[4] for r in trace if r[1] == cell and not r[5])
    print(f"cell {cell} (p={DEFAULT_CONFIG.arrival_probs[cell - 1]}): speed counts {dict(sorted(speeds.items()))}")

###############################################################################
# Long-run average reward against constant speeds
# -----------------------------------------------
# Charging slots count in the denominator. All policies share the evaluation seed.
# A 15k-step run has not settled yet; with the full 5e4 steps the greedy policy
# flies slowly almost everywhere and matches the slowest constant speed.

for pol in (policy, FixedSpeedPolicy(1), FixedSpeedPolicy(2), FixedSpeedPolicy(3)):
    rep = evaluate_policy(pol, DEFAULT_CONFIG, horizon=20_000, seed=1_000_003)
    print(f"{pol.name:>8}: reward {rep.avg_reward:.4f}  throughput {rep.avg_throughput:.4f}  "
          f"energy {rep.avg_energy:.4f}  charging {rep.charging_fraction:.3f}")
