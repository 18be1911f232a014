"""Slotted simulator of a battery-limited UAV sweeping a loop of IoT cells.

The UAV flies a fixed cyclic route over ``num_cells`` cells, each cut into
``L = cell_length_m / position_step_m`` grid positions. Every slot it picks a
speed level; while working it may receive one packet (Bernoulli with the
current cell's arrival probability), moves forward and burns energy. When no
speed level is affordable any more it leaves for a battery swap and the
observable state becomes the charging sentinel ``(-1, -1, -1)`` until it
returns to the same spot with a full battery.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import NamedTuple

import numpy as np


class ConfigError(ValueError):
    """Raised when an :class:`EnvConfig` violates one of its invariants."""


@dataclass(frozen=True)
class EnvConfig:
    num_cells: int = 4
    cell_length_m: float = 60.0
    position_step_m: float = 5.0
    speeds_mps: tuple[float, ...] = (5.0, 10.0, 15.0)
    energy_cost: tuple[int, ...] = (2, 3, 4)
    arrival_probs: tuple[float, ...] = (0.1, 0.25, 0.6, 0.15)
    battery_capacity: int = 120
    mean_charging_slots: float = 10.0
    reward_base: float = 15.0
    weight_data: float = 1.0
    weight_energy: float = 0.5
    slot_seconds: float = 1.0

    def __post_init__(self):
        # lists from JSON are normalised to tuples so the config stays hashable
        for name in ("speeds_mps", "energy_cost", "arrival_probs"):
            object.__setattr__(self, name, tuple(getattr(self, name)))

    @property
    def num_positions(self) -> int:
        return int(round(self.cell_length_m / self.position_step_m))

    @property
    def num_actions(self) -> int:
        return len(self.speeds_mps)

    def grid_steps(self, speed_level: int) -> int:
        """Grid positions covered in one slot at ``speed_level`` (1-based)."""
        dist = self.speeds_mps[speed_level - 1] * self.slot_seconds
        return int(round(dist / self.position_step_m))

    def validate(self) -> "EnvConfig":
        def fail(msg):
            raise ConfigError(msg)

        if int(self.num_cells) != self.num_cells or self.num_cells < 1:
            fail(f"num_cells must be an integer >= 1, got {self.num_cells}")
        A = len(self.speeds_mps)
        if A < 1:
            fail("speeds_mps must contain at least one speed level")
        if len(self.energy_cost) != A:
            fail("energy_cost and speeds_mps must have the same length")
        if any(b <= a for a, b in zip(self.speeds_mps, self.speeds_mps[1:])):
            fail("speeds_mps must be strictly increasing")
        if any(b <= a for a, b in zip(self.energy_cost, self.energy_cost[1:])):
            fail("energy_cost must be strictly increasing")
        if any(int(c) != c or c < 1 for c in self.energy_cost):
            fail("energy_cost entries must be positive integers")
        if self.position_step_m <= 0 or self.slot_seconds <= 0:
            fail("position_step_m and slot_seconds must be positive")
        if self.speeds_mps[0] <= 0:
            fail("speeds_mps must be positive")
        ratio = self.cell_length_m / self.position_step_m
        if ratio < 1 or not math.isclose(ratio, round(ratio), abs_tol=1e-9):
            fail("cell_length_m must be a positive integer multiple of position_step_m")
        for s in self.speeds_mps:
            k = s * self.slot_seconds / self.position_step_m
            if not math.isclose(k, round(k), abs_tol=1e-9):
                fail(f"speed {s} m/s x slot_seconds is not a multiple of position_step_m")
        if len(self.arrival_probs) != self.num_cells:
            fail("arrival_probs must have one entry per cell")
        if any(not 0.0 <= p <= 1.0 for p in self.arrival_probs):
            fail("arrival_probs entries must lie in [0, 1]")
        if int(self.battery_capacity) != self.battery_capacity:
            fail("battery_capacity must be an integer")
        if self.battery_capacity < max(self.energy_cost):
            fail("battery_capacity must be >= max(energy_cost)")
        if not self.mean_charging_slots >= 1:
            fail("mean_charging_slots must be >= 1")
        return self

    def replace(self, **changes) -> "EnvConfig":
        d = asdict(self)
        d.update(changes)
        return EnvConfig(**d).validate()

    def to_dict(self) -> dict:
        d = asdict(self)
        for name in ("speeds_mps", "energy_cost", "arrival_probs"):
            d[name] = list(d[name])
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "EnvConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown EnvConfig keys: {', '.join(unknown)}")
        return cls(**data).validate()

    @classmethod
    def from_json(cls, path) -> "EnvConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


class UavState(NamedTuple):
    cell: int
    location: int
    energy: int

    @property
    def charging(self) -> bool:
        return self.cell == -1


CHARGING = UavState(-1, -1, -1)


@dataclass
class ChargingStatus:
    remaining_slots: int = 0
    resume_cell: int = 1
    resume_location: int = 0


@dataclass(frozen=True)
class StepOutcome:
    next_state: UavState
    reward: float
    packets: int
    energy_spent: int
    was_working: bool


def advance(cell: int, location: int, speed_level: int, config: EnvConfig) -> tuple[int, int]:
    """Move ``speed_level`` worth of grid steps along the loop 1 -> ... -> C -> 1."""
    L = config.num_positions
    if not (1 <= cell <= config.num_cells and 0 <= location < L):
        raise ValueError(f"position ({cell}, {location}) is out of bounds")
    if not 1 <= speed_level <= config.num_actions:
        raise ValueError(f"speed level {speed_level} outside 1..{config.num_actions}")
    flat = (cell - 1) * L + location + config.grid_steps(speed_level)
    flat %= config.num_cells * L
    return flat // L + 1, flat % L


def sample_arrival(p_n: float, u: float) -> int:
    return 1 if u < p_n else 0


def sample_charging_duration(z: float, u: float) -> int:
    """Geometric quantile on {1, 2, ...} with success probability 1/z (mean z)."""
    if z < 1:
        raise ValueError(f"mean charging time must be >= 1, got {z}")
    if z == 1:
        return 1
    q = 1.0 - 1.0 / z
    # smallest k with 1 - q**k > u
    k = max(1, math.ceil(math.log1p(-u) / math.log(q)))
    while 1.0 - q**k <= u:
        k += 1
    while k > 1 and 1.0 - q ** (k - 1) > u:
        k -= 1
    return k


def compute_reward(was_working: bool, d: int, speed_level: int, config: EnvConfig) -> float:
    if not was_working:
        return 0.0
    m = config.energy_cost[speed_level - 1]
    return config.reward_base + config.weight_data * d - config.weight_energy * m


class UavEnv:
    """Stateful simulator; one instance per actor.

    Arrivals and charging durations come from two independent streams spawned
    from the reset seed, so two controllers run on the same seed see the same
    sequence of battery-swap durations even when their actions differ.

    ``fixed_charging_slots`` replaces the random duration by a constant
    (test hook for closed-form checks).
    """

    def __init__(self, config: EnvConfig, fixed_charging_slots: int | None = None):
        self.config = config.validate()
        self.fixed_charging_slots = fixed_charging_slots
        self._state: UavState | None = None
        self.charging = ChargingStatus()
        self._min_cost = min(config.energy_cost)

    # tabular / network agents need these
    @property
    def num_actions(self) -> int:
        return self.config.num_actions

    @property
    def num_states(self) -> int:
        c = self.config
        return c.num_cells * c.num_positions * (c.battery_capacity + 1) + 1

    def state_index(self, state: UavState) -> int:
        return state_index(state, self.config)

    @property
    def state(self) -> UavState:
        if self._state is None:
            raise RuntimeError("environment used before reset()")
        return self._state

    def reset(self, seed: int | None = None) -> UavState:
        arrival_ss, charge_ss = np.random.SeedSequence(seed).spawn(2)
        self._arrival_rng = np.random.default_rng(arrival_ss)
        self._charge_rng = np.random.default_rng(charge_ss)
        self.charging = ChargingStatus()
        self._state = UavState(1, 0, self.config.battery_capacity)
        return self._state

    def _charge_duration(self) -> int:
        if self.fixed_charging_slots is not None:
            return int(self.fixed_charging_slots)
        return sample_charging_duration(self.config.mean_charging_slots, self._charge_rng.random())

    def step(self, action: int) -> StepOutcome:
        state = self.state
        cfg = self.config
        if state.charging:
            ch = self.charging
            ch.remaining_slots -= 1
            if ch.remaining_slots > 0:
                nxt = CHARGING
            else:
                nxt = UavState(ch.resume_cell, ch.resume_location, cfg.battery_capacity)
            self._state = nxt
            return StepOutcome(nxt, 0.0, 0, 0, False)

        if not 1 <= action <= cfg.num_actions:
            raise ValueError(f"action {action} outside 1..{cfg.num_actions}")
        d = sample_arrival(cfg.arrival_probs[state.cell - 1], self._arrival_rng.random())
        cell, loc = advance(state.cell, state.location, action, cfg)
        cost = cfg.energy_cost[action - 1]
        energy = max(0, state.energy - cost)
        spent = state.energy - energy
        reward = compute_reward(True, d, action, cfg)
        if energy < self._min_cost:
            self.charging = ChargingStatus(self._charge_duration(), cell, loc)
            nxt = CHARGING
        else:
            nxt = UavState(cell, loc, energy)
        self._state = nxt
        return StepOutcome(nxt, reward, d, spent, True)


def state_index(state: UavState, config: EnvConfig) -> int:
    """Bijection from states onto ``0 .. C*L*(E+1)``.

    The sentinel maps to 0; ``(c, l, e)`` maps to
    ``1 + ((c - 1) * L + l) * (E + 1) + e``.
    """
    if state.cell == -1:
        return 0
    L = config.num_positions
    return 1 + ((state.cell - 1) * L + state.location) * (config.battery_capacity + 1) + state.energy


def state_from_index(index: int, config: EnvConfig) -> UavState:
    if index == 0:
        return CHARGING
    L = config.num_positions
    pos, e = divmod(index - 1, config.battery_capacity + 1)
    c, l = divmod(pos, L)
    return UavState(c + 1, l, e)


def all_states(config: EnvConfig) -> list[UavState]:
    """Every non-sentinel state in index order."""
    L, E = config.num_positions, config.battery_capacity
    return [UavState(c, l, e) for c in range(1, config.num_cells + 1)
            for l in range(L) for e in range(E + 1)]


DEFAULT_CONFIG = EnvConfig()
