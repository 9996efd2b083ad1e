"""Specific growth rate and yield coefficient models for the bioreactor."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

__all__ = ["GrowthModel", "YieldModel"]


def _table_eval(ks: np.ndarray, vs: np.ndarray, s: float) -> float:
    return float(np.interp(s, ks, vs))


@dataclass(frozen=True)
class GrowthModel:
    """Substrate-dependent specific growth rate mu(S) on [0, S_i].

    kinds:
      monod    mu(S) = mu_max * S / (k_S + S)
      haldane  mu(S) = mu_max * S / (k_S + S + S**2 / k_I)
      table    linear interpolation through knots, first knot (0, 0)

    mu(0) = 0 and mu(S) > 0 for S > 0 in all kinds.
    """

    kind: str
    mu_max: float = 0.0
    k_s: float = 0.0
    k_i: float = 0.0
    knots: Tuple[Tuple[float, float], ...] = ()

    def __post_init__(self):
        if self.kind in ("monod", "haldane"):
            if not (self.mu_max > 0.0 and self.k_s > 0.0):
                raise ValueError("growth model needs mu_max > 0 and k_s > 0")
            if self.kind == "haldane" and not self.k_i > 0.0:
                raise ValueError("haldane growth model needs k_i > 0")
        elif self.kind == "table":
            if len(self.knots) < 2:
                raise ValueError("table growth model needs at least two knots")
            ss = [k[0] for k in self.knots]
            vs = [k[1] for k in self.knots]
            if ss[0] != 0.0 or vs[0] != 0.0:
                raise ValueError("growth table must start at (0, 0)")
            if any(b <= a for a, b in zip(ss, ss[1:])):
                raise ValueError("growth table abscissae must be strictly increasing")
            if any(v <= 0.0 for v in vs[1:]):
                raise ValueError("growth table values must be positive for S > 0")
        else:
            raise ValueError(f"unknown growth kind {self.kind!r}")

    @staticmethod
    def monod(mu_max: float, k_s: float) -> "GrowthModel":
        return GrowthModel("monod", mu_max=mu_max, k_s=k_s)

    @staticmethod
    def haldane(mu_max: float, k_s: float, k_i: float) -> "GrowthModel":
        return GrowthModel("haldane", mu_max=mu_max, k_s=k_s, k_i=k_i)

    @staticmethod
    def table(knots) -> "GrowthModel":
        return GrowthModel("table", knots=tuple((float(a), float(b)) for a, b in knots))

    def __call__(self, s: float) -> float:
        if self.kind == "monod":
            return self.mu_max * s / (self.k_s + s)
        if self.kind == "haldane":
            return self.mu_max * s / (self.k_s + s + s * s / self.k_i)
        ks = np.array([k[0] for k in self.knots])
        vs = np.array([k[1] for k in self.knots])
        return _table_eval(ks, vs, s)

    def bound(self) -> float:
        """Upper bound of mu over its domain."""
        if self.kind == "monod":
            return self.mu_max
        if self.kind == "haldane":
            # interior maximum at S = sqrt(k_s * k_i)
            return self(math.sqrt(self.k_s * self.k_i))
        return max(k[1] for k in self.knots)

    def min_on(self, lo: float, hi: float, n_grid: int = 10_000) -> float:
        """Minimum of mu over [lo, hi], grid scan plus exact shortcuts.

        Monod is increasing so the minimum sits at lo; haldane has a
        single interior critical point so the minimum sits at an
        endpoint; tables attain extrema at knots or endpoints.  The
        grid scan is kept as a uniform safety net.
        """
        if hi < lo:
            raise ValueError("empty interval")
        candidates = [lo, hi]
        if self.kind == "table":
            candidates += [s for s, _ in self.knots if lo < s < hi]
        grid = np.linspace(lo, hi, n_grid)
        vals = [self(float(s)) for s in candidates]
        if self.kind == "monod":
            return self(lo)
        grid_min = min(self(float(s)) for s in grid)
        return min(min(vals), grid_min)


@dataclass(frozen=True)
class YieldModel:
    """Biomass yield coefficient K(S) > 0 on [0, S_i]."""

    kind: str
    value: float = 0.0
    knots: Tuple[Tuple[float, float], ...] = ()

    def __post_init__(self):
        if self.kind == "constant":
            if not self.value > 0.0:
                raise ValueError("constant yield must be positive")
        elif self.kind == "table":
            if len(self.knots) < 2:
                raise ValueError("yield table needs at least two knots")
            ss = [k[0] for k in self.knots]
            vs = [k[1] for k in self.knots]
            if any(b <= a for a, b in zip(ss, ss[1:])):
                raise ValueError("yield table abscissae must be strictly increasing")
            if any(v <= 0.0 for v in vs):
                raise ValueError("yield values must be positive")
        else:
            raise ValueError(f"unknown yield kind {self.kind!r}")

    @staticmethod
    def constant(value: float) -> "YieldModel":
        return YieldModel("constant", value=value)

    @staticmethod
    def table(knots) -> "YieldModel":
        return YieldModel("table", knots=tuple((float(a), float(b)) for a, b in knots))

    def __call__(self, s: float) -> float:
        if self.kind == "constant":
            return self.value
        ks = np.array([k[0] for k in self.knots])
        vs = np.array([k[1] for k in self.knots])
        return _table_eval(ks, vs, s)
