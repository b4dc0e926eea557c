"""Command-line interface: single runs and multi-seed policy sweeps."""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .config import default_config, load_config
from .episode import POLICIES, run_episode
from .io import summarize, write_run

__all__ = ["main", "run_sweep"]


def _load(path):
    return load_config(path) if path else default_config()


def _run_one(args):
    config, policy = args
    trace = run_episode(config, policy)
    return trace, summarize(trace, config)


def run_sweep(config, policies, seeds, out_dir=None, jobs=1):
    """Run every (policy, seed) pair; returns {policy: [summary, ...]}.

    Episodes are independent, so they can run in worker processes; results
    are keyed deterministically regardless of completion order.
    """
    tasks = [(config.replace(seed=s), p) for p in policies for s in seeds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_one, tasks))
    else:
        results = [_run_one(t) for t in tasks]
    out = {p: [] for p in policies}
    for (cfg, policy), (trace, summary) in zip(tasks, results):
        out[policy].append(summary)
        if out_dir is not None:
            write_run(trace, cfg, Path(out_dir) / f"{policy}_seed{cfg.seed}")
    return out


def _aggregate(sweep) -> dict:
    agg = {}
    for policy, summaries in sweep.items():
        terms = {k: float(np.mean([s["terminal"][k] for s in summaries]))
                 for k in ("uav_energy_J", "ue_queue_bits", "system_energy_J")}
        agg[policy] = {"seeds": [s["seed"] for s in summaries], "mean_terminal": terms}
    if "joint" in agg:
        je = agg["joint"]["mean_terminal"]["system_energy_J"]
        for other in ("go", "ge"):
            if other in agg:
                oe = agg[other]["mean_terminal"]["system_energy_J"]
                agg[f"joint_saves_vs_{other}_pct"] = 100.0 * (oe - je) / oe if oe > 0 else 0.0
    return agg


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="uavmec",
                                     description="UAV edge-computing control simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one episode and write its artifacts")
    p_run.add_argument("--config", default=None, help="scenario file (defaults used when omitted)")
    p_run.add_argument("--policy", required=True, choices=POLICIES)
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.add_argument("--sca-log", action="store_true",
                       help="also write per-slot subproblem objective sequences")

    p_sweep = sub.add_parser("sweep", help="comparative multi-seed experiment")
    p_sweep.add_argument("--config", default=None)
    p_sweep.add_argument("--policies", default="joint,go,ge")
    p_sweep.add_argument("--seeds", type=int, default=10, help="number of seeds (0..k-1)")
    p_sweep.add_argument("--out", required=True)
    p_sweep.add_argument("--jobs", type=int, default=1)

    args = parser.parse_args(argv)

    if args.command == "run":
        config = _load(args.config)
        if args.seed is not None:
            config = config.replace(seed=args.seed)
        trace = run_episode(config, args.policy, collect_sca=args.sca_log)
        out = write_run(trace, config, args.out)
        if args.sca_log:
            with open(out / "sca_log.json", "w") as fh:
                json.dump(trace.sca_histories, fh)
        term = trace.terminal_averages()
        print(f"{args.policy} seed={config.seed}: "
              f"avg UAV energy {term['uav_energy_J']:.2f} J, "
              f"avg queue {term['ue_queue_bits'] / 1e6:.3f} Mbit, "
              f"avg system energy {term['system_energy_J']:.4f} J")
        return 0

    if args.command == "sweep":
        config = _load(args.config)
        policies = [p.strip() for p in args.policies.split(",") if p.strip()]
        bad = [p for p in policies if p not in POLICIES]
        if bad:
            parser.error(f"unknown policies: {bad}")
        sweep = run_sweep(config, policies, range(args.seeds),
                          out_dir=args.out, jobs=args.jobs)
        agg = _aggregate(sweep)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "comparison.json", "w") as fh:
            json.dump(agg, fh, indent=2)
            fh.write("\n")
        for policy in policies:
            t = agg[policy]["mean_terminal"]
            print(f"{policy:6s} avg UAV {t['uav_energy_J']:7.2f} J   "
                  f"queue {t['ue_queue_bits'] / 1e6:7.3f} Mbit   "
                  f"system {t['system_energy_J']:.4f} J")
        return 0

    return 1


if __name__ == "__main__":
    sys.exit(main())
