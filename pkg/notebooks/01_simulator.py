"""
The UAV data-collection simulator
=================================

A single UAV flies a closed loop over four cells. Each slot it picks one of
three speeds: faster flight burns more energy but leaves a cell sooner. When
the battery cannot cover the cheapest move the UAV detours to charge for a
random number of slots, then resumes where it left off.
"""
import numpy as np

from uavspeed import DEFAULT_CONFIG, UavEnv
from uavspeed.env import sample_charging_duration

print(DEFAULT_CONFIG)
print("positions per cell:", DEFAULT_CONFIG.num_positions)

###############################################################################
# Stepping by hand
# ----------------
# Actions are 1-based speed levels. The reward is Omega + w1 * packets - w2 * cost.

env = UavEnv(DEFAULT_CONFIG)
state = env.reset(seed=0)
for level in (1, 2, 3, 3):
    out = env.step(level)
    print(f"{state} --speed {level}--> {out.next_state}  reward={out.reward}  packets={out.packets}")
    state = out.next_state

###############################################################################
# A full battery cycle at constant speed
# --------------------------------------
# At the slowest speed a full battery lasts 120 / 2 = 60 working slots.

env.reset(seed=1)
working = 0
while not env.step(1).next_state.charging:
    working += 1
print("working slots before the charging detour:", working + 1)

###############################################################################
# Charging durations
# ------------------
# Durations are geometric with mean z, drawn by inverse transform.

u = np.random.default_rng(0).random(100_000)
for z in (5, 10, 30):
    draws = np.array([sample_charging_duration(z, x) for x in u])
    print(f"z={z:>2}: sample mean {draws.mean():.3f}, min {draws.min()}")
