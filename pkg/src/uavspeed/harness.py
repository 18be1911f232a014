"""Experiment driver: fixed-speed baselines, policy evaluation and the three studies
(learning curves, greedy policy traces, charging-time sweep)."""
from __future__ import annotations

import csv
import json
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import d3ql, tabular
from .env import CHARGING, EnvConfig, UavEnv, state_index
from .network import load_params, q_values, save_params

OUTPUT_ENV_VAR = "UAVSPEED_OUT"
DEFAULT_SWEEP = (5, 10, 15, 20, 25, 30)
SWEEP_POLICIES = ("d3ql", "qlearning", "fixed1", "fixed2", "fixed3")


# ---------------------------------------------------------------- policies

class FixedSpeedPolicy:
    def __init__(self, level: int):
        self.level = level
        self.name = f"fixed{level}"

    def __call__(self, state) -> int:
        return self.level


class _TablePolicy:
    """Greedy policy cached as one speed level per state index."""

    name = "greedy"

    def __init__(self, levels: np.ndarray, config: EnvConfig):
        self.levels = levels
        self.config = config

    def __call__(self, state) -> int:
        return int(self.levels[state_index(state, self.config)])


class GreedyTablePolicy(_TablePolicy):
    name = "qlearning"

    def __init__(self, table: tabular.QTable, config: EnvConfig):
        super().__init__(np.argmax(table.values, axis=1) + 1, config)


class GreedyNetPolicy(_TablePolicy):
    name = "d3ql"

    def __init__(self, params, config: EnvConfig):
        feats = d3ql.feature_table(config)
        levels = np.argmax(q_values(params, feats), axis=1) + 1
        super().__init__(levels, config)


class UniformRandomPolicy:
    name = "random"

    def __init__(self, num_actions: int, seed: int = 0):
        self.num_actions = num_actions
        self.rng = np.random.default_rng(seed)

    def __call__(self, state) -> int:
        return int(self.rng.integers(1, self.num_actions + 1))


def parse_policy(spec: str, config: EnvConfig):
    """``fixed:K``, ``d3ql:<checkpoint>`` or ``tabular:<csv>``."""
    kind, _, arg = spec.partition(":")
    if kind == "fixed":
        level = int(arg)
        if not 1 <= level <= config.num_actions:
            raise ValueError(f"speed level {level} outside 1..{config.num_actions}")
        return FixedSpeedPolicy(level)
    if kind == "d3ql":
        return GreedyNetPolicy(load_params(arg)[0], config)
    if kind in ("tabular", "qlearning"):
        return GreedyTablePolicy(tabular.QTable.load_csv(arg), config)
    raise ValueError(f"unknown policy spec {spec!r}")


# -------------------------------------------------------------- evaluation

@dataclass(frozen=True)
class EvalReport:
    avg_reward: float
    avg_throughput: float
    avg_energy: float
    horizon: int
    seed: int
    charging_fraction: float = 0.0


def evaluate_policy(policy, config: EnvConfig, horizon: int, seed: int,
                    fixed_charging_slots: int | None = None) -> EvalReport:
    """Run a frozen policy for ``horizon`` slots and average per slot.

    Charging slots count in the denominator.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    env = UavEnv(config, fixed_charging_slots)
    state = env.reset(seed)
    reward = packets = energy = charging = 0
    for _ in range(horizon):
        level = 1 if state.charging else policy(state)
        out = env.step(level)
        reward += out.reward
        packets += out.packets
        energy += out.energy_spent
        charging += not out.was_working
        state = out.next_state
    return EvalReport(reward / horizon, packets / horizon, energy / horizon, horizon, seed,
                      charging / horizon)


# ------------------------------------------------------------- experiments

@dataclass
class ExperimentSpec:
    kind: str = "convergence"
    env: EnvConfig = field(default_factory=EnvConfig)
    tabular: tabular.QLConfig = field(default_factory=tabular.QLConfig)
    d3ql: d3ql.D3QLConfig = field(default_factory=d3ql.D3QLConfig)
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    sweep: tuple[float, ...] = DEFAULT_SWEEP
    output: str | None = None
    window: int = 1_000
    eval_horizon: int = 20_000
    trace_horizon: int = 300
    checkpoint_dir: str | None = None
    workers: int = 1

    def __post_init__(self):
        self.seeds = tuple(self.seeds)
        self.sweep = tuple(self.sweep)
        if self.kind not in ("convergence", "policy-trace", "charging-sweep"):
            raise ValueError(f"unknown experiment kind {self.kind!r}")
        if not self.seeds:
            raise ValueError("at least one seed is required")
        if any(z < 1 for z in self.sweep):
            raise ValueError("sweep values must be >= 1")


def load_config(path) -> dict:
    """Read the experiment JSON (sections ``env``, ``tabular``, ``d3ql``, ``experiment``)."""
    data = json.loads(Path(path).read_text())
    unknown = set(data) - {"env", "tabular", "d3ql", "experiment"}
    if unknown:
        raise ValueError(f"unknown config sections: {', '.join(sorted(unknown))}")
    return data


def spec_from_config(data: dict, kind: str | None = None, **overrides) -> ExperimentSpec:
    exp = dict(data.get("experiment", {}))
    if kind is not None:
        exp["kind"] = kind
    exp.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentSpec(
        env=EnvConfig.from_dict(data.get("env", {})),
        tabular=tabular.QLConfig.from_dict(data.get("tabular", {})),
        d3ql=d3ql.D3QLConfig.from_dict(data.get("d3ql", {})),
        **exp,
    )


def default_output_dir() -> Path:
    return Path(os.environ.get(OUTPUT_ENV_VAR, "results"))


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, header, rows) -> Path:
    """Write atomically so a failed run never leaves a partial file behind."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise
    return path


def moving_average(x: np.ndarray, window: int) -> np.ndarray:
    """Trailing mean over the last ``min(t, window)`` values at every step t."""
    c = np.concatenate(([0.0], np.cumsum(x)))
    t = np.arange(1, len(x) + 1)
    lo = np.maximum(t - window, 0)
    return (c[t] - c[lo]) / (t - lo)


def _convergence_job(args):
    spec, seed = args
    _, tab_rewards = tabular.train(UavEnv(spec.env), spec.tabular, seed)
    params, hist = d3ql.train(UavEnv(spec.env), spec.d3ql, seed)
    if spec.checkpoint_dir:
        Path(spec.checkpoint_dir).mkdir(parents=True, exist_ok=True)
        save_params(params, checkpoint_path(spec.checkpoint_dir, seed),
                    {"seed": seed, "env": spec.env.to_dict()})
    return seed, moving_average(hist.reward, spec.window), moving_average(tab_rewards, spec.window)


def checkpoint_path(directory, seed: int) -> Path:
    return Path(directory) / f"d3ql_seed{seed}.bin"


def _map(fn, jobs, workers: int):
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            return list(pool.map(fn, jobs))
    return [fn(j) for j in jobs]


def run_convergence(spec: ExperimentSpec):
    """Train both learners on the same environment seeds and emit moving-average rewards.

    Returns ``{(algorithm, seed): window-average array}``; writes
    ``algorithm,seed,step,window_avg_reward`` rows when ``spec.output`` is set.
    """
    results = _map(_convergence_job, [(spec, s) for s in spec.seeds], spec.workers)
    curves = {}
    for seed, d_avg, q_avg in sorted(results, key=lambda r: r[0]):
        curves[("d3ql", seed)] = d_avg
        curves[("qlearning", seed)] = q_avg
    if spec.output:
        def rows():
            for (alg, seed), avg in sorted(curves.items()):
                for t, v in enumerate(avg, 1):
                    yield alg, seed, t, v
        write_csv(spec.output, ["algorithm", "seed", "step", "window_avg_reward"], rows())
    return curves


def rollout_trace(policy, config: EnvConfig, horizon: int, seed: int) -> list[tuple]:
    """Per-slot log of the state at the start of the slot and the speed chosen.

    Rows are ``(slot, cell, location, energy, speed, charging)``; speed is 0
    while charging.
    """
    env = UavEnv(config)
    state = env.reset(seed)
    rows = []
    for slot in range(1, horizon + 1):
        level = 0 if state.charging else policy(state)
        rows.append((slot, state.cell, state.location, state.energy, level, int(state.charging)))
        state = env.step(max(level, 1)).next_state
    return rows


def run_policy_trace(spec: ExperimentSpec, checkpoints=None):
    """Roll out greedy D3QL policies from checkpoints.

    ``checkpoints`` is a single path, a ``{seed: path}`` mapping, or ``None``
    to use ``spec.checkpoint_dir``.
    """
    rows = []
    for seed in spec.seeds:
        if checkpoints is None:
            if not spec.checkpoint_dir:
                raise FileNotFoundError("no checkpoint given for the policy trace")
            path = checkpoint_path(spec.checkpoint_dir, seed)
        elif isinstance(checkpoints, dict):
            path = checkpoints[seed]
        else:
            path = checkpoints
        if not Path(path).is_file():
            raise FileNotFoundError(f"checkpoint {path} not found")
        policy = GreedyNetPolicy(load_params(path)[0], spec.env)
        rows += [(seed, *r) for r in rollout_trace(policy, spec.env, spec.trace_horizon, seed)]
    if spec.output:
        write_csv(spec.output, ["seed", "slot", "cell", "location", "energy", "speed", "charging"], rows)
    return rows


def eval_seed(seed: int) -> int:
    """Evaluation runs use a seed disjoint from the training one."""
    return 1_000_003 + seed


def _sweep_job(args):
    spec, z, seed = args
    cfg = spec.env.replace(mean_charging_slots=float(z))
    params, _ = d3ql.train(UavEnv(cfg), spec.d3ql, seed)
    table, _ = tabular.train(UavEnv(cfg), spec.tabular, seed)
    policies = [GreedyNetPolicy(params, cfg), GreedyTablePolicy(table, cfg)]
    policies += [FixedSpeedPolicy(k) for k in range(1, cfg.num_actions + 1)]
    out = []
    for pol in policies:
        rep = evaluate_policy(pol, cfg, spec.eval_horizon, eval_seed(seed))
        out.append((pol.name, z, seed, rep.avg_reward, rep.avg_throughput, rep.avg_energy))
    return out


def run_charging_sweep(spec: ExperimentSpec):
    """Train and evaluate every policy at each mean charging time.

    Returns rows ``(policy, z, seed, avg_reward, avg_throughput, avg_energy)``
    sorted by (z, policy, seed).
    """
    jobs = [(spec, z, s) for z in spec.sweep for s in spec.seeds]
    rows = [r for chunk in _map(_sweep_job, jobs, spec.workers) for r in chunk]
    rows.sort(key=lambda r: (r[1], r[0], r[2]))
    if spec.output:
        write_csv(spec.output, ["policy", "z", "seed", "avg_reward", "avg_throughput", "avg_energy"], rows)
    return rows
