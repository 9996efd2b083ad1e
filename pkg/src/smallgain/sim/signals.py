"""Deterministic disturbance signals and perturbed sampling schedules."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

__all__ = ["DisturbanceSignal", "make_schedule", "GENERATORS"]

# 64-bit counter-based generators accepted in configs; splittable and
# random-access friendly, so signals are reproducible by seed alone.
GENERATORS = ("philox", "pcg64")


def _make_bitgen(name: str, seed: int):
    if name == "philox":
        return np.random.Philox(seed)
    if name == "pcg64":
        return np.random.PCG64(seed)
    raise ValueError(f"unknown generator {name!r}; known: {GENERATORS}")


@dataclass
class DisturbanceSignal:
    """Piecewise signal of time, deterministic given its parameters.

    kinds:
      constant          value
      bang_bang         low on the first half period, high on the second
      piecewise_random  constant on dwell intervals, values drawn
                        uniformly from [low, high] by a seeded
                        counter-based generator
    """

    kind: str
    value: float = 0.0
    period: float = 1.0
    low: float = 0.0
    high: float = 1.0
    dwell: float = 1.0
    seed: int = 0
    generator: str = "philox"
    _cache: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.kind == "constant":
            pass
        elif self.kind == "bang_bang":
            if not self.period > 0.0:
                raise ValueError("bang-bang period must be positive")
        elif self.kind == "piecewise_random":
            if not self.dwell > 0.0:
                raise ValueError("dwell must be positive")
            if self.high < self.low:
                raise ValueError("range must satisfy low <= high")
            if self.generator not in GENERATORS:
                raise ValueError(f"unknown generator {self.generator!r}")
        else:
            raise ValueError(f"unknown disturbance kind {self.kind!r}")

    def bounds(self) -> tuple:
        if self.kind == "constant":
            return (self.value, self.value)
        return (self.low, self.high)

    def _values_up_to(self, k: int) -> np.ndarray:
        # draw one batch covering index k; redrawing a longer batch
        # reproduces the same prefix, so query order never matters
        if self._cache is None or len(self._cache) <= k:
            n = max(k + 1, 64)
            rng = np.random.Generator(_make_bitgen(self.generator, self.seed))
            self._cache = self.low + (self.high - self.low) * rng.random(n)
        return self._cache

    def __call__(self, t: float) -> float:
        if t < 0.0:
            raise ValueError("signal time must be nonnegative")
        if self.kind == "constant":
            return self.value
        if self.kind == "bang_bang":
            phase = math.fmod(t, self.period)
            return self.low if phase < 0.5 * self.period else self.high
        k = int(t / self.dwell)
        return float(self._values_up_to(k)[k])

    def sample(self, times: np.ndarray) -> np.ndarray:
        return np.array([self(float(t)) for t in np.asarray(times)])


def make_schedule(r: float, w: DisturbanceSignal, t_end: float) -> np.ndarray:
    """Sampling instants tau_0 = 0 < tau_1 < ... < t_end generated by
    tau_{i+1} = tau_i + exp(-w(tau_i)) * r.

    The signal w must be nonnegative, so gaps never exceed r.
    """
    if not r > 0.0:
        raise ValueError("nominal sampling period must be positive")
    lo, hi = w.bounds()
    if lo < 0.0:
        raise ValueError("schedule perturbation w must be nonnegative")
    events = [0.0]
    t = 0.0
    while True:
        gap = math.exp(-w(t)) * r
        t = t + gap
        if t >= t_end - 1e-12:
            break
        events.append(t)
    return np.array(events)
