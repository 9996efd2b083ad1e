"""Uniformly sampled state history over a sliding delay window."""

from __future__ import annotations

from typing import Callable, Union

import numpy as np

__all__ = ["HistoryBuffer"]


class HistoryBuffer:
    """Ring of uniformly spaced state samples covering [t - r, t].

    The step h must divide the window r exactly (or r = 0, a single
    slot).  Lookups interpolate linearly between stored samples and
    refuse to extrapolate outside the covered window.
    """

    def __init__(
        self,
        r: float,
        h: float,
        init: Union[Callable[[float], np.ndarray], np.ndarray],
        t0: float = 0.0,
    ):
        if h <= 0.0:
            raise ValueError("step h must be positive")
        if r < 0.0:
            raise ValueError("window r must be nonnegative")
        m = int(round(r / h)) if r > 0.0 else 0
        if r > 0.0 and abs(m * h - r) > 1e-9 * max(1.0, r):
            raise ValueError(f"step h={h} must divide the window r={r} exactly")
        self.r = r
        self.h = h
        self.m = m
        if callable(init):
            samples = [np.atleast_1d(np.asarray(init(-r + j * h), dtype=float))
                       for j in range(m + 1)]
        else:
            v = np.atleast_1d(np.asarray(init, dtype=float))
            samples = [v.copy() for _ in range(m + 1)]
        self.dim = samples[0].shape[0]
        if any(s.shape != (self.dim,) for s in samples):
            raise ValueError("history samples must share one dimension")
        self._ring = np.stack(samples)  # row (head) is the oldest sample
        self._head = 0
        self.t_latest = t0

    def push(self, state: np.ndarray) -> None:
        """Append the sample at t_latest + h, dropping the oldest."""
        state = np.asarray(state, dtype=float)
        if state.shape != (self.dim,):
            raise ValueError("state dimension mismatch")
        self._ring[self._head] = state
        self._head = (self._head + 1) % (self.m + 1)
        self.t_latest += self.h

    def latest(self) -> np.ndarray:
        return self._ring[(self._head - 1) % (self.m + 1)].copy()

    def window(self) -> np.ndarray:
        """All stored samples ordered oldest to newest, shape (m+1, dim)."""
        idx = (np.arange(self.m + 1) + self._head) % (self.m + 1)
        return self._ring[idx].copy()

    def component_window(self, i: int) -> np.ndarray:
        return self.window()[:, i]

    def value_at(self, t: float) -> np.ndarray:
        """Linearly interpolated state at time t in [t_latest - r, t_latest]."""
        lag = self.t_latest - t
        if lag < -1e-9 * max(1.0, self.h) or lag > self.r + 1e-9 * max(1.0, self.r):
            raise ValueError(
                f"lookup at t={t} outside the window "
                f"[{self.t_latest - self.r}, {self.t_latest}]"
            )
        if self.m == 0:
            return self.latest()
        q = lag / self.h
        q = min(max(q, 0.0), float(self.m))
        j = int(q)
        w = q - j
        win = self.window()
        if j >= self.m:
            return win[0].copy()
        # index m is the newest sample, lag counts backwards
        a = win[self.m - j]
        b = win[self.m - j - 1]
        return a * (1.0 - w) + b * w
