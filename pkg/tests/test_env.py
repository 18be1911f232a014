import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from uavspeed.env import (CHARGING, DEFAULT_CONFIG, ChargingStatus, ConfigError, EnvConfig, UavEnv,
                          UavState, advance, all_states, compute_reward, sample_arrival,
                          sample_charging_duration, state_from_index, state_index)


def test_default_config_derived_sizes():
    assert DEFAULT_CONFIG.num_positions == 12
    assert [DEFAULT_CONFIG.grid_steps(a) for a in (1, 2, 3)] == [1, 2, 3]


def test_reset_returns_full_battery_origin():
    assert UavEnv(DEFAULT_CONFIG).reset(7) == UavState(1, 0, 120)
    tiny = EnvConfig(num_cells=1, cell_length_m=5, speeds_mps=(5,), energy_cost=(2,),
                     arrival_probs=(0.5,), battery_capacity=10)
    assert UavEnv(tiny).reset(3) == UavState(1, 0, 10)


@pytest.mark.parametrize("change, needle", [
    (dict(speeds_mps=(10, 5, 15)), "speeds_mps"),
    (dict(energy_cost=(2, 2, 4)), "energy_cost"),
    (dict(arrival_probs=(0.1, 1.5, 0.2, 0.3)), "arrival_probs"),
    (dict(arrival_probs=(0.1, 0.2)), "arrival_probs"),
    (dict(battery_capacity=3), "battery_capacity"),
    (dict(cell_length_m=62), "cell_length_m"),
    (dict(speeds_mps=(5, 7, 15)), "speed"),
    (dict(mean_charging_slots=0.5), "mean_charging_slots"),
    (dict(num_cells=0), "num_cells"),
])
def test_invalid_config_names_the_violation(change, needle):
    with pytest.raises(ConfigError, match=needle):
        UavEnv(EnvConfig(**{**DEFAULT_CONFIG.to_dict(), **change}))


def test_config_json_roundtrip_and_unknown_keys(tmp_path):
    path = tmp_path / "env.json"
    path.write_text(json.dumps(DEFAULT_CONFIG.to_dict()))
    assert EnvConfig.from_json(path) == DEFAULT_CONFIG
    path.write_text(json.dumps({**DEFAULT_CONFIG.to_dict(), "wind": 3}))
    with pytest.raises(ConfigError, match="wind"):
        EnvConfig.from_json(path)


@pytest.mark.parametrize("pos, level, expected", [
    ((1, 0), 1, (1, 1)),
    ((1, 11), 3, (2, 2)),
    ((4, 11), 2, (1, 1)),
    ((2, 10), 2, (3, 0)),
])
def test_advance(pos, level, expected):
    assert advance(*pos, level, DEFAULT_CONFIG) == expected


def test_advance_rejects_out_of_bounds():
    with pytest.raises(ValueError):
        advance(5, 0, 1, DEFAULT_CONFIG)
    with pytest.raises(ValueError):
        advance(1, 12, 1, DEFAULT_CONFIG)
    with pytest.raises(ValueError):
        advance(1, 0, 4, DEFAULT_CONFIG)


def test_sample_arrival():
    assert sample_arrival(0.6, 0.3) == 1
    assert sample_arrival(0.6, 0.9) == 0
    assert sample_arrival(0.0, 0.0) == 0
    assert sample_arrival(1.0, 0.999999) == 1


def test_charging_duration_edge_cases():
    assert sample_charging_duration(1, 0.0) == 1
    assert sample_charging_duration(1, 0.99) == 1
    assert sample_charging_duration(10, 0.0) == 1
    with pytest.raises(ValueError):
        sample_charging_duration(0.5, 0.1)


@given(z=st.floats(1.01, 50), u=st.floats(0, 1, exclude_max=True))
def test_charging_duration_matches_geometric_quantile(z, u):
    k = sample_charging_duration(z, u)
    q = 1 - 1 / z
    # smallest k >= 1 with 1 - q**k > u
    assert 1 - q**k > u
    assert k == 1 or 1 - q ** (k - 1) <= u


def test_charging_duration_agrees_with_scipy_geometric():
    u = np.random.default_rng(0).random(2000)
    for z in (2.0, 10.0, 25.0):
        ours = np.array([sample_charging_duration(z, x) for x in u])
        assert np.array_equal(ours, stats.geom.ppf(u, 1 / z).astype(int))


@pytest.mark.parametrize("z", [5.0, 10.0, 20.0])
def test_charging_duration_monte_carlo_mean(z):
    u = np.random.default_rng(int(z)).random(1_000_000)
    mean = np.mean([sample_charging_duration(z, x) for x in u])
    assert abs(mean - z) <= 0.01 * z


def test_compute_reward():
    assert compute_reward(True, 1, 1, DEFAULT_CONFIG) == 15.0
    assert compute_reward(True, 0, 3, DEFAULT_CONFIG) == 13.0
    assert compute_reward(False, 1, 2, DEFAULT_CONFIG) == 0.0


def _env_at(state, seed=0, **kw):
    env = UavEnv(DEFAULT_CONFIG, **kw)
    env.reset(seed)
    env._state = state
    return env


def test_step_while_charging_counts_down():
    env = _env_at(CHARGING)
    env.charging = ChargingStatus(3, 2, 7)
    out = env.step(3)
    assert out.next_state == CHARGING
    assert (out.reward, out.packets, out.energy_spent, out.was_working) == (0.0, 0, 0, False)
    assert env.charging.remaining_slots == 2
    env.step(1)
    out = env.step(1)
    assert out.next_state == UavState(2, 7, 120)


def test_step_working_fast():
    out = _env_at(UavState(3, 5, 120)).step(3)
    assert out.next_state == UavState(3, 8, 116)
    assert out.reward in (13.0, 14.0)
    assert out.energy_spent == 4


def test_step_triggers_charging_when_nothing_is_affordable():
    env = _env_at(UavState(2, 0, 3))
    out = env.step(3)
    assert out.next_state == CHARGING
    assert out.energy_spent == 3 and out.was_working
    assert (env.charging.resume_cell, env.charging.resume_location) == (2, 3)
    assert env.charging.remaining_slots >= 1


def test_step_before_reset_is_an_error():
    with pytest.raises(RuntimeError):
        UavEnv(DEFAULT_CONFIG).step(1)


def _log(seed, actions, config=DEFAULT_CONFIG):
    env = UavEnv(config)
    env.reset(seed)
    return [env.step(a) for a in actions]


def test_same_seed_same_outcomes():
    actions = np.random.default_rng(1).integers(1, 4, size=3000).tolist()
    assert _log(11, actions) == _log(11, actions)
    assert _log(11, actions) != _log(12, actions)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**16), actions=st.lists(st.integers(1, 3), min_size=1, max_size=400))
def test_trajectory_invariants(seed, actions):
    env = UavEnv(DEFAULT_CONFIG)
    state = env.reset(seed)
    last_cell = state.cell
    for a in actions:
        was_charging = state.charging
        resume = (env.charging.resume_cell, env.charging.resume_location)
        out = env.step(a)
        s = out.next_state
        if was_charging or not out.was_working:
            assert out.reward == 0.0
        if s.charging:
            assert s == CHARGING
        else:
            assert 0 <= s.energy <= DEFAULT_CONFIG.battery_capacity
            if was_charging:
                assert (s.cell, s.location, s.energy) == (*resume, 120)
            # cells are visited in loop order
            assert s.cell in (last_cell, last_cell % 4 + 1)
            last_cell = s.cell
        state = s


def test_zero_arrival_probability_collects_nothing():
    cfg = DEFAULT_CONFIG.replace(arrival_probs=(0.0,) * 4)
    outs = _log(5, [1, 2, 3] * 2000, cfg)
    assert sum(o.packets for o in outs) == 0


def test_state_index_is_a_bijection():
    cfg = EnvConfig(num_cells=2, cell_length_m=10, speeds_mps=(5, 10), energy_cost=(1, 2),
                    arrival_probs=(0.2, 0.4), battery_capacity=6)
    states = [CHARGING] + all_states(cfg)
    idx = [state_index(s, cfg) for s in states]
    assert idx == list(range(len(states)))
    assert UavEnv(cfg).num_states == len(states)
    assert all(state_from_index(i, cfg) == s for i, s in zip(idx, states))
