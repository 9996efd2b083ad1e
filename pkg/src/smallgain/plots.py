"""SVG plots from trajectory CSV files; a pure function of the file."""

from __future__ import annotations

from pathlib import Path
from typing import List

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .sim.trajectory import read_csv

__all__ = ["plot_trajectory_csv"]


def plot_trajectory_csv(csv_path, out_dir) -> List[str]:
    """One SVG per recorded series plus a phase plot for 2-state runs.

    Sampling instants (event column) are marked on every series plot.
    Returns the written file paths.
    """
    traj = read_csv(csv_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    ev_times = traj.times[traj.events == 1]

    names = list(traj.state_names)
    for name in names:
        fig, ax = plt.subplots(figsize=(6, 3.5))
        ax.plot(traj.times, traj.column(name), lw=1.0)
        if ev_times.size and ev_times.size <= 400:
            for t in ev_times:
                ax.axvline(t, color="0.85", lw=0.4, zorder=0)
        ax.set_xlabel("t")
        ax.set_ylabel(name)
        ax.grid(True, alpha=0.3)
        fig.tight_layout()
        path = out / f"{name}.svg"
        fig.savefig(path)
        plt.close(fig)
        written.append(str(path))

    # the first two series are the model states by the CSV convention
    if len(names) >= 2:
        fig, ax = plt.subplots(figsize=(4.5, 4.5))
        ax.plot(traj.column(names[0]), traj.column(names[1]), lw=0.8)
        ax.plot(
            [traj.column(names[0])[0]], [traj.column(names[1])[0]], "o", ms=4
        )
        ax.set_xlabel(names[0])
        ax.set_ylabel(names[1])
        ax.grid(True, alpha=0.3)
        fig.tight_layout()
        path = out / "phase.svg"
        fig.savefig(path)
        plt.close(fig)
        written.append(str(path))
    return written
