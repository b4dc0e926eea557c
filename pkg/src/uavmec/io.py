"""Run artifacts: trace/positions CSV files and the run summary JSON.

``trace.csv`` has the fixed header ``n,Qu,Q1..QK,E_uav,E_sys,x_u,y_u,
x_1,y_1,...,sca_iters`` with one row per slot; ``positions.csv`` additionally
carries the post-horizon row so trajectory plots close at the destination.
All floats are written with 17 significant digits so downstream consumers can
reproduce summary statistics exactly.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .episode import EpisodeTrace
from .lyapunov import drift_bound_check

__all__ = ["trace_header", "write_trace_csv", "write_positions_csv",
           "write_summary", "write_run", "read_trace_csv"]


def _fmt(x) -> str:
    return format(float(x), ".17g")


def trace_header(K: int) -> list[str]:
    cols = ["n", "Qu"] + [f"Q{k}" for k in range(1, K + 1)]
    cols += ["E_uav", "E_sys", "x_u", "y_u"]
    for k in range(1, K + 1):
        cols += [f"x_{k}", f"y_{k}"]
    cols.append("sca_iters")
    return cols


def write_trace_csv(trace: EpisodeTrace, path):
    K = trace.K
    with open(path, "w") as fh:
        fh.write(",".join(trace_header(K)) + "\n")
        for i in range(trace.N):
            row = [str(i + 1), _fmt(trace.Q_u_joule[i])]
            row += [_fmt(v) for v in trace.Q_bits[i]]
            row += [_fmt(trace.E_uav[i]), _fmt(trace.E_sys[i])]
            row += [_fmt(trace.uav_pos[i, 0]), _fmt(trace.uav_pos[i, 1])]
            for k in range(K):
                row += [_fmt(trace.ue_pos[i, k, 0]), _fmt(trace.ue_pos[i, k, 1])]
            row.append(str(int(trace.sca_iters[i])))
            fh.write(",".join(row) + "\n")


def write_positions_csv(trace: EpisodeTrace, path):
    K = trace.K
    cols = ["n", "x_u", "y_u"]
    for k in range(1, K + 1):
        cols += [f"x_{k}", f"y_{k}"]
    with open(path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for i in range(trace.N + 1):
            row = [str(i + 1), _fmt(trace.uav_pos[i, 0]), _fmt(trace.uav_pos[i, 1])]
            for k in range(K):
                row += [_fmt(trace.ue_pos[i, k, 0]), _fmt(trace.ue_pos[i, k, 1])]
            fh.write(",".join(row) + "\n")


def summarize(trace: EpisodeTrace, config) -> dict:
    term = trace.terminal_averages()
    return {
        "policy": trace.policy,
        "seed": trace.seed,
        "N": trace.N,
        "K": trace.K,
        "terminal": term,
        "totals": {
            "uav_energy_J": float(np.sum(trace.E_uav)),
            "system_energy_J": float(np.sum(trace.E_sys)),
            "bits_local": float(np.sum(trace.l_local_bits)),
            "bits_offloaded": float(np.sum(trace.l_offload_bits)),
            "bits_arrived": float(np.sum(trace.arrivals_bits)),
        },
        "final": {
            "uav_position_m": [float(v) for v in trace.uav_pos[-1]],
            "distance_to_goal_m": float(np.linalg.norm(trace.uav_pos[-1] - config.p_F)),
            "queue_bits": [float(v) for v in trace.final_Q_bits],
            "virtual_queue_J": float(trace.final_Q_u_joule),
        },
        "sca": {
            "mean_iters": float(np.mean(trace.sca_iters)),
            "max_iters": int(np.max(trace.sca_iters)),
        },
        "drift_bound": drift_bound_check(trace, config),
    }


def write_summary(trace: EpisodeTrace, config, path):
    with open(path, "w") as fh:
        json.dump(summarize(trace, config), fh, indent=2)
        fh.write("\n")


def write_run(trace: EpisodeTrace, config, out_dir) -> Path:
    """Write trace.csv, positions.csv, and summary.json into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_trace_csv(trace, out / "trace.csv")
    write_positions_csv(trace, out / "positions.csv")
    write_summary(trace, config, out / "summary.json")
    return out


def read_trace_csv(path) -> dict:
    """Read a trace written by write_trace_csv into column arrays."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if data.shape[1] != len(header):
        raise ValueError(f"{path}: {data.shape[1]} columns but {len(header)} header fields")
    return {name: data[:, j] for j, name in enumerate(header)}
