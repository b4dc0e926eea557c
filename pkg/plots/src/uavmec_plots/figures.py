"""Render trajectory and moving-average comparison figures from run CSVs.

Four figure kinds: ``trajectory`` draws the UAV path and user paths from
positions files; ``uav_energy``, ``queue``, and ``sys_energy`` draw prefix
means (``mean of the first n samples``) of the corresponding trace columns,
one curve per policy.  Curve labels come from the ``summary.json`` sitting
next to each CSV when present, else from the directory name.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

KINDS = ("trajectory", "uav_energy", "queue", "sys_energy")


class SchemaError(ValueError):
    """A CSV does not match the expected run-artifact layout."""


@dataclass
class PlotSpec:
    traces: list            # one CSV path per policy
    out: str                # image file; format from the extension
    kind: str               # one of KINDS

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown kind {self.kind!r}; expected one of {KINDS}")
        if not self.traces:
            raise ValueError("need at least one input file")


def read_csv(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"{path}: no such file")
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if data.size == 0 or data.shape[1] != len(header):
        raise SchemaError(f"{path}: column count does not match header")
    return {name: data[:, j] for j, name in enumerate(header)}


def _n_users(cols, path):
    k = 0
    while f"x_{k + 1}" in cols and f"y_{k + 1}" in cols:
        k += 1
    if k == 0:
        raise SchemaError(f"{path}: no user position columns found")
    return k


def _check_trace_schema(cols, path):
    k = 0
    while f"Q{k + 1}" in cols:
        k += 1
    needed = ["n", "Qu", "E_uav", "E_sys", "x_u", "y_u", "sca_iters"]
    missing = [c for c in needed if c not in cols]
    if missing or k == 0:
        raise SchemaError(f"{path}: missing columns {missing or ['Q1..QK']}")
    return k


def running_mean(values) -> np.ndarray:
    """Prefix means: entry n-1 is the mean of the first n values."""
    values = np.asarray(values, dtype=float)
    return np.cumsum(values) / np.arange(1, len(values) + 1)


def _label_for(path) -> str:
    path = Path(path)
    summary = path.parent / "summary.json"
    if summary.exists():
        try:
            with open(summary) as fh:
                return str(json.load(fh)["policy"])
        except (KeyError, json.JSONDecodeError):
            pass
    return path.parent.name or path.stem


def _series(kind, cols, path):
    if kind == "uav_energy":
        return running_mean(cols["E_uav"]), "moving average UAV energy [J]"
    if kind == "sys_energy":
        return running_mean(cols["E_sys"]), "moving average system energy [J]"
    k = _check_trace_schema(cols, path)
    queues = np.stack([cols[f"Q{i}"] for i in range(1, k + 1)], axis=1)
    return running_mean(queues.mean(axis=1)) / 1e6, "moving average queue [Mbit]"


def render(spec: PlotSpec) -> str:
    """Draw the figure described by ``spec`` and write it to ``spec.out``.

    Returns the output path.  Raises SchemaError for malformed inputs and
    ValueError when the inputs disagree on the horizon length.
    """
    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    try:
        if spec.kind == "trajectory":
            _render_trajectory(ax, spec)
        else:
            _render_series(ax, spec)
        fig.tight_layout()
        fig.savefig(spec.out, dpi=150)
    finally:
        plt.close(fig)
    return str(spec.out)


def _render_trajectory(ax, spec):
    seen_users = False
    lengths = []
    for path in spec.traces:
        cols = read_csv(path)
        for col in ("x_u", "y_u"):
            if col not in cols:
                raise SchemaError(f"{path}: missing column {col}")
        lengths.append(len(cols["x_u"]))
        label = _label_for(path)
        ax.plot(cols["x_u"], cols["y_u"], linewidth=1.4, label=f"UAV ({label})")
        ax.plot(cols["x_u"][0], cols["y_u"][0], "k^", markersize=6)
        ax.plot(cols["x_u"][-1], cols["y_u"][-1], "kv", markersize=6)
        if not seen_users:
            k = _n_users(cols, path)
            for i in range(1, k + 1):
                ax.plot(cols[f"x_{i}"], cols[f"y_{i}"], "--", linewidth=0.9,
                        label=f"user {i}")
            seen_users = True
    if len(set(lengths)) > 1:
        raise ValueError(f"inputs disagree on length: {lengths}")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_title("trajectories")
    ax.legend(fontsize=8)
    ax.set_aspect("equal", adjustable="datalim")


def _render_series(ax, spec):
    lengths = []
    for path in spec.traces:
        cols = read_csv(path)
        _check_trace_schema(cols, path)
        series, ylabel = _series(spec.kind, cols, path)
        lengths.append(len(series))
        ax.plot(np.arange(1, len(series) + 1), series, label=_label_for(path))
    if len(set(lengths)) > 1:
        raise ValueError(f"inputs disagree on horizon: {lengths}")
    if spec.kind == "uav_energy":
        ax.axhline(170.0, color="gray", linestyle=":", linewidth=1.0)
    ax.set_xlabel("slot")
    ax.set_ylabel(ylabel)
    ax.set_title(spec.kind.replace("_", " "))
    ax.legend()


def terminal_moving_averages(trace_path) -> dict:
    """Recompute the terminal prefix means of one trace CSV."""
    cols = read_csv(trace_path)
    k = _check_trace_schema(cols, trace_path)
    queues = np.stack([cols[f"Q{i}"] for i in range(1, k + 1)], axis=1)
    return {
        "uav_energy_J": float(running_mean(cols["E_uav"])[-1]),
        "ue_queue_bits": float(running_mean(queues.mean(axis=1))[-1]),
        "system_energy_J": float(running_mean(cols["E_sys"])[-1]),
    }
