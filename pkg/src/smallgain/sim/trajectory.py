"""Trajectory container and its CSV serialization."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Sequence

import numpy as np

__all__ = ["Trajectory", "write_csv", "read_csv", "CsvFormatError"]


class CsvFormatError(ValueError):
    """Malformed trajectory CSV; carries the offending line number."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass
class Trajectory:
    """Time-stamped samples of one closed-loop run.

    states holds one row per sample; inputs maps input names to series
    of the same length; events flags sampling instants; aux carries
    derived series (transformed coordinates, history prefixes) that are
    not part of the CSV contract; meta records scenario id, step size
    and seed.
    """

    times: np.ndarray
    states: np.ndarray
    state_names: Sequence[str]
    inputs: Dict[str, np.ndarray] = field(default_factory=dict)
    events: np.ndarray = None
    aux: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.atleast_2d(np.asarray(self.states, dtype=float))
        if self.states.shape[0] != self.times.shape[0]:
            raise ValueError("times and states must have equal length")
        if self.states.shape[1] != len(self.state_names):
            raise ValueError("state_names must match the state dimension")
        for name, series in self.inputs.items():
            if len(series) != len(self.times):
                raise ValueError(f"input series {name!r} length mismatch")
        if self.events is None:
            self.events = np.zeros(len(self.times), dtype=np.int64)
        if np.any(np.diff(self.times) <= 0.0):
            raise ValueError("times must be strictly increasing")

    def column(self, name: str) -> np.ndarray:
        if name in self.state_names:
            return self.states[:, list(self.state_names).index(name)]
        if name in self.inputs:
            return np.asarray(self.inputs[name])
        raise KeyError(name)

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]


def _fmt(v: float) -> str:
    # shortest decimal that round-trips to the same double
    return repr(float(v))


def write_csv(traj: Trajectory, path) -> None:
    names = list(traj.state_names) + list(traj.inputs.keys())
    cols = [traj.states[:, i] for i in range(traj.states.shape[1])]
    cols += [np.asarray(traj.inputs[k], dtype=float) for k in traj.inputs]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t," + ",".join(names) + ",event\n")
        for i, t in enumerate(traj.times):
            row = [_fmt(t)] + [_fmt(c[i]) for c in cols] + [str(int(traj.events[i]))]
            fh.write(",".join(row) + "\n")


def read_csv(path) -> Trajectory:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise CsvFormatError(1, "empty file")
    header = lines[0].split(",")
    if len(header) < 3 or header[0] != "t" or header[-1] != "event":
        raise CsvFormatError(1, "header must be t,<series...>,event")
    names = header[1:-1]
    rows = []
    events = []
    times = []
    for ln, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != len(header):
            raise CsvFormatError(ln, f"expected {len(header)} fields, got {len(parts)}")
        try:
            vals = [float(x) for x in parts[:-1]]
            ev = int(parts[-1])
        except ValueError as exc:
            raise CsvFormatError(ln, str(exc)) from None
        times.append(vals[0])
        rows.append(vals[1:])
        events.append(ev)
    if not rows:
        raise CsvFormatError(2, "no data rows")
    return Trajectory(
        times=np.array(times),
        states=np.array(rows),
        state_names=names,
        events=np.array(events, dtype=np.int64),
    )
