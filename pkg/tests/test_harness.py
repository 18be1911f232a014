import csv

import numpy as np
import pytest

from uavspeed import harness
from uavspeed.d3ql import D3QLConfig
from uavspeed.env import DEFAULT_CONFIG
from uavspeed.harness import (ExperimentSpec, FixedSpeedPolicy, UniformRandomPolicy, evaluate_policy,
                              moving_average, run_charging_sweep, run_convergence, run_policy_trace)
from uavspeed.tabular import QLConfig

NO_DATA = DEFAULT_CONFIG.replace(arrival_probs=(0.0,) * 4)


def tiny_spec(tmp_path, kind, **kw):
    base = dict(
        kind=kind,
        d3ql=D3QLConfig(steps=300, learning_start=64, batch_size=16, hidden=(8, 8)),
        tabular=QLConfig(steps=300),
        seeds=(0, 1),
        eval_horizon=500,
        checkpoint_dir=str(tmp_path / "ckpt"),
    )
    base.update(kw)
    return ExperimentSpec(**base)


def _closed_form(cost, charge, reward_per_slot, E=120):
    work = E // cost
    return reward_per_slot * work / (work + charge)


@pytest.mark.parametrize("level, expected", [(1, 12.0), (3, 9.75)])
def test_fixed_speed_closed_form(level, expected):
    # cycle: E / cost working slots at Omega - w2 * cost, then 10 charging slots
    cost = DEFAULT_CONFIG.energy_cost[level - 1]
    assert _closed_form(cost, 10, 15 - 0.5 * cost) == expected
    rep = evaluate_policy(FixedSpeedPolicy(level), NO_DATA, horizon=2800, seed=0, fixed_charging_slots=10)
    assert abs(rep.avg_reward - expected) <= 1e-9
    assert rep.avg_throughput == 0.0


def test_zero_reward_environment():
    cfg = DEFAULT_CONFIG.replace(reward_base=0.0, weight_data=0.0, weight_energy=0.0)
    for pol in (FixedSpeedPolicy(1), FixedSpeedPolicy(3), UniformRandomPolicy(3, 1)):
        assert evaluate_policy(pol, cfg, 3000, 2).avg_reward == 0.0


def test_eval_report_bounds():
    for level in (1, 2, 3):
        rep = evaluate_policy(FixedSpeedPolicy(level), DEFAULT_CONFIG, 20_000, 1)
        assert 0 <= rep.avg_throughput <= 1
        assert 0 <= rep.avg_energy <= max(DEFAULT_CONFIG.energy_cost)
        # working slots spread evenly over cells, so the packet rate is bounded by max(p)
        sigma = np.sqrt(0.25 / 20_000)
        assert rep.avg_throughput <= max(DEFAULT_CONFIG.arrival_probs) + 3 * sigma


@pytest.mark.parametrize("level", [1, 2, 3])
@pytest.mark.parametrize("z", [5.0, 10.0, 20.0])
def test_charging_fraction_renewal(level, z):
    cfg = DEFAULT_CONFIG.replace(mean_charging_slots=z)
    rep = evaluate_policy(FixedSpeedPolicy(level), cfg, 100_000, 3)
    work = cfg.battery_capacity // cfg.energy_cost[level - 1]
    expected = z / (z + work)
    assert abs(rep.charging_fraction - expected) <= 0.05 * expected


def test_equal_probabilities_give_equal_per_slot_throughput():
    cfg = DEFAULT_CONFIG.replace(arrival_probs=(0.3,) * 4)
    rates = []
    for level in (1, 2, 3):
        rep = evaluate_policy(FixedSpeedPolicy(level), cfg, 100_000, 4)
        rates.append(rep.avg_throughput / (1 - rep.charging_fraction))
    # binomial standard error of the per-working-slot rate, ~6e4 working slots or more
    assert max(rates) - min(rates) < 3 * np.sqrt(2 * 0.21 / 60_000)
    assert all(abs(r - 0.3) < 0.01 for r in rates)


def test_moving_average_matches_brute_force():
    x = np.random.default_rng(0).normal(size=57)
    got = moving_average(x, 10)
    want = [x[max(0, t - 10):t].mean() for t in range(1, 58)]
    np.testing.assert_allclose(got, want)


def _read(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_convergence_csv(tmp_path):
    spec = tiny_spec(tmp_path, "convergence", output=str(tmp_path / "conv.csv"))
    curves = run_convergence(spec)
    rows = _read(spec.output)
    assert rows[0] == ["algorithm", "seed", "step", "window_avg_reward"]
    assert len(rows) - 1 == 300 * 2 * 2
    # the first slot is always a working slot: reward within [Omega - w2*4, Omega + w1 - w2*2]
    for key, curve in curves.items():
        assert 13.0 <= curve[0] <= 15.0
    assert (tmp_path / "ckpt" / "d3ql_seed1.bin").is_file()
    first = (tmp_path / "conv.csv").read_bytes()
    run_convergence(spec)
    assert (tmp_path / "conv.csv").read_bytes() == first


def test_policy_trace(tmp_path):
    run_convergence(tiny_spec(tmp_path, "convergence"))
    spec = tiny_spec(tmp_path, "policy-trace", trace_horizon=250, output=str(tmp_path / "trace.csv"))
    rows = run_policy_trace(spec)
    assert _read(spec.output)[0] == ["seed", "slot", "cell", "location", "energy", "speed", "charging"]
    assert len(rows) == 500
    for seed in (0, 1):
        trace = [r for r in rows if r[0] == seed]
        assert any(r[6] for r in trace), "expected at least one charging slot"
        for prev, nxt in zip(trace, trace[1:]):
            if not prev[6] and not nxt[6]:
                cost = DEFAULT_CONFIG.energy_cost[prev[5] - 1]
                assert nxt[4] == prev[4] - cost


def test_policy_trace_missing_checkpoint(tmp_path):
    spec = tiny_spec(tmp_path, "policy-trace")
    with pytest.raises(FileNotFoundError):
        run_policy_trace(spec)
    with pytest.raises(FileNotFoundError):
        run_policy_trace(spec, tmp_path / "missing.bin")


def test_charging_sweep_rows(tmp_path):
    spec = tiny_spec(tmp_path, "charging-sweep", sweep=(5, 30), output=str(tmp_path / "sweep.csv"))
    rows = run_charging_sweep(spec)
    assert len(rows) == 2 * 5 * 2
    assert _read(spec.output)[0] == ["policy", "z", "seed", "avg_reward", "avg_throughput", "avg_energy"]
    assert {r[0] for r in rows} == set(harness.SWEEP_POLICIES)
    assert rows == sorted(rows, key=lambda r: (r[1], r[0], r[2]))


def test_spec_validation():
    with pytest.raises(ValueError):
        ExperimentSpec(seeds=())
    with pytest.raises(ValueError):
        ExperimentSpec(sweep=(0.5,))
    with pytest.raises(ValueError):
        ExperimentSpec(kind="bogus")


def test_parse_policy(tmp_path):
    assert harness.parse_policy("fixed:2", DEFAULT_CONFIG).level == 2
    with pytest.raises(ValueError):
        harness.parse_policy("fixed:7", DEFAULT_CONFIG)
    with pytest.raises(ValueError):
        harness.parse_policy("oracle:1", DEFAULT_CONFIG)
