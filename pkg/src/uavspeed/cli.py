"""Command-line entry point: ``python -m uavspeed <command> ...``."""
from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from . import d3ql, harness, tabular
from .env import UavEnv
from .network import NetArchitecture, grad_check, save_params


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="uavspeed", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="experiment JSON (sections env, tabular, d3ql, experiment)")
        sp.add_argument("--seed", type=int, action="append",
                        help="seed; repeat for several (default: config or 0..4)")
        sp.add_argument("--out", help=f"output directory (default ${harness.OUTPUT_ENV_VAR} or ./results)")
        return sp

    sp = common(sub.add_parser("train", help="train one agent, write checkpoint and history"))
    sp.add_argument("--agent", choices=["d3ql", "tabular"], default="d3ql")

    sp = common(sub.add_parser("evaluate", help="evaluate a policy and write an EvalReport CSV"))
    sp.add_argument("--policy", required=True, help="fixed:K | d3ql:<checkpoint> | tabular:<csv>")
    sp.add_argument("--horizon", type=int)

    common(sub.add_parser("convergence", help="learning curves of both learners"))
    sp = common(sub.add_parser("trace", help="greedy D3QL rollouts from checkpoints"))
    sp.add_argument("--checkpoint", help="checkpoint file (default: <out>/d3ql_seed<seed>.bin)")
    common(sub.add_parser("sweep", help="charging-time sweep over all five policies"))

    sp = sub.add_parser("grad-check", help="finite-difference check of the network gradient")
    sp.add_argument("--draws", type=int, default=20)
    sp.add_argument("--batch", type=int, default=4)
    sp.add_argument("--hidden", type=int, nargs="+", default=[64, 64])
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--tol", type=float, default=1e-4)
    return p


def _spec(args, kind):
    data = harness.load_config(args.config) if args.config else {}
    out = Path(args.out) if args.out else harness.default_output_dir()
    spec = harness.spec_from_config(data, kind=kind, seeds=args.seed)
    return spec, out


def _cmd_train(args):
    spec, out = _spec(args, "convergence")
    out.mkdir(parents=True, exist_ok=True)
    for seed in spec.seeds:
        if args.agent == "d3ql":
            params, hist = d3ql.train(UavEnv(spec.env), spec.d3ql, seed)
            save_params(params, harness.checkpoint_path(out, seed), {"seed": seed, "env": spec.env.to_dict()})
            hist.write_csv(out / f"d3ql_history_seed{seed}.csv")
        else:
            table, rewards = tabular.train(UavEnv(spec.env), spec.tabular, seed)
            table.save_csv(out / f"qtable_seed{seed}.csv")
            harness.write_csv(out / f"tabular_history_seed{seed}.csv", ["step", "reward", "epsilon"],
                              ((t + 1, r, spec.tabular.epsilon(t)) for t, r in enumerate(rewards)))
    print(f"wrote {args.agent} results for seeds {list(spec.seeds)} to {out}")


def _cmd_evaluate(args):
    spec, out = _spec(args, "charging-sweep")
    policy = harness.parse_policy(args.policy, spec.env)
    horizon = args.horizon or spec.eval_horizon
    rows = []
    for seed in spec.seeds:
        rep = harness.evaluate_policy(policy, spec.env, horizon, seed)
        rows.append((args.policy, spec.env.mean_charging_slots, seed, rep.avg_reward,
                     rep.avg_throughput, rep.avg_energy, horizon))
    harness.write_csv(out / "evaluate.csv", ["policy", "z", "seed", "avg_reward", "avg_throughput",
                                            "avg_energy", "horizon"], rows)
    for r in rows:
        print(f"seed {r[2]}: avg_reward={r[3]:.6g} throughput={r[4]:.6g} energy={r[5]:.6g}")


def _cmd_convergence(args):
    spec, out = _spec(args, "convergence")
    spec.output = str(out / "convergence.csv")
    spec.checkpoint_dir = spec.checkpoint_dir or str(out)
    harness.run_convergence(spec)
    print(f"wrote {spec.output}")


def _cmd_trace(args):
    spec, out = _spec(args, "policy-trace")
    spec.output = str(out / "trace.csv")
    spec.checkpoint_dir = spec.checkpoint_dir or str(out)
    harness.run_policy_trace(spec, args.checkpoint)
    print(f"wrote {spec.output}")


def _cmd_sweep(args):
    spec, out = _spec(args, "charging-sweep")
    spec.output = str(out / "sweep.csv")
    harness.run_charging_sweep(spec)
    print(f"wrote {spec.output}")


def _cmd_grad_check(args):
    arch = NetArchitecture(hidden=tuple(args.hidden))
    t0 = time.perf_counter()
    errors = grad_check(arch, draws=args.draws, batch_size=args.batch, seed=args.seed)
    worst = max(errors)
    ok = worst < args.tol
    print(f"grad-check draws={args.draws} max_rel_error={worst:.3e} "
          f"time={time.perf_counter() - t0:.2f}s {'PASS' if ok else 'FAIL'}")
    return 0 if ok else 1


COMMANDS = {
    "train": _cmd_train,
    "evaluate": _cmd_evaluate,
    "convergence": _cmd_convergence,
    "trace": _cmd_trace,
    "sweep": _cmd_sweep,
    "grad-check": _cmd_grad_check,
}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args) or 0
    except (OSError, ValueError, KeyError) as exc:
        print(f"uavspeed {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
