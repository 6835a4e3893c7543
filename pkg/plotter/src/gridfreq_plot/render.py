"""Figure construction for frequency traces and discharge-duration sweeps."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .csvio import read_columns  # noqa: E402

KINDS = ("traces", "nadir_sweep", "nadirtime_sweep")


@dataclass
class PlotSpec:
    inputs: List[str]
    kind: str
    out: str
    labels: Optional[List[str]] = None
    ufls_threshold_hz: Optional[float] = 59.3
    title: Optional[str] = None


def _trace_labels(spec: PlotSpec) -> List[str]:
    if spec.labels:
        if len(spec.labels) != len(spec.inputs):
            raise ValueError(
                f"{len(spec.labels)} labels for {len(spec.inputs)} inputs")
        return list(spec.labels)
    return [Path(p).stem for p in spec.inputs]


def _build_traces(spec: PlotSpec):
    fig, ax = plt.subplots(figsize=(8, 4.5))
    for path, label in zip(spec.inputs, _trace_labels(spec)):
        cols = read_columns(path, required=["t_s", "f_coi_hz"])
        ax.plot(cols["t_s"], cols["f_coi_hz"], label=label, linewidth=1.2)
    if spec.ufls_threshold_hz is not None:
        ax.axhline(spec.ufls_threshold_hz, color="crimson", linestyle="--",
                   linewidth=1.0, label=f"UFLS {spec.ufls_threshold_hz:g} Hz")
    ax.set_xlabel("time [s]")
    ax.set_ylabel("COI frequency [Hz]")
    ax.grid(True, alpha=0.3)
    ax.legend(loc="best", fontsize=8)
    return fig


def _build_sweep(spec: PlotSpec, value_col: str, ylabel: str):
    if len(spec.inputs) != 1:
        raise ValueError(f"{spec.kind} takes exactly one sweep CSV, "
                         f"got {len(spec.inputs)}")
    cols = read_columns(spec.inputs[0],
                        required=["duration_s", "energy_mws", value_col])
    fig, ax = plt.subplots(figsize=(7, 4.5))
    groups = sorted(set(cols["energy_mws"]))
    for energy in groups:
        pts = sorted((d, v) for d, e, v in zip(cols["duration_s"],
                                               cols["energy_mws"],
                                               cols[value_col])
                     if e == energy)
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o",
                markersize=3, linewidth=1.2, label=f"{energy:g} MWs")
    ax.set_xlabel("discharge duration [s]")
    ax.set_ylabel(ylabel)
    ax.grid(True, alpha=0.3)
    ax.legend(title="energy limit", fontsize=8)
    return fig


def build_figure(spec: PlotSpec):
    """Build the matplotlib figure for a spec without touching the disk."""
    if spec.kind == "traces":
        fig = _build_traces(spec)
    elif spec.kind == "nadir_sweep":
        fig = _build_sweep(spec, "nadir_hz", "frequency nadir [Hz]")
    elif spec.kind == "nadirtime_sweep":
        fig = _build_sweep(spec, "nadir_time_s", "nadir time [s]")
    else:
        raise ValueError(f"unknown plot kind '{spec.kind}' "
                         f"(expected one of {', '.join(KINDS)})")
    if spec.title:
        fig.axes[0].set_title(spec.title)
    fig.tight_layout()
    return fig


def render(spec: PlotSpec) -> Path:
    """Validate inputs, build the figure, and write the image.

    The inputs are read-only; on any input error no output file is written.
    """
    fig = build_figure(spec)
    out = Path(spec.out)
    try:
        fig.savefig(out, dpi=150)
    finally:
        plt.close(fig)
    return out
