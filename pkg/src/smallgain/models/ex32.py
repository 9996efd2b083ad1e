"""Planar plant under sampled-data linear feedback with zero-order hold.

    dx/dt = -(1 + y^2) x + y
    dy/dt = -M y(tau_i) + f(x) + g(x) y      on [tau_i, tau_{i+1})

The controller value -M y is frozen between sampling instants; the
schedule may shrink the nominal period r through a nonnegative signal
w, tau_{i+1} = tau_i + exp(-w(tau_i)) r.  With the gain M large enough
and the period r small enough the loop tolerates every such schedule
perturbation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Tuple

import numpy as np

__all__ = [
    "PlanarSampledParams",
    "ScalarFn",
    "default_instance",
    "select_constants",
    "ex32_rhs",
    "x_subsystem_gain",
    "REGION_RADIUS",
    "EPS_LIMIT",
]

# radius of the ball on which the x-subsystem estimate confines x
REGION_RADIUS = 1.0 + math.sqrt(2.0) / 2.0
# the x/y gain cycle contracts only for target gains below 1/sqrt(2)
EPS_LIMIT = 1.0 / math.sqrt(2.0)


@dataclass(frozen=True)
class ScalarFn:
    """Named scalar function so configs can declare f and g.

    kinds: zero, linear (coef * x), square (coef * x**2)
    """

    kind: str
    coef: float = 1.0

    def __post_init__(self):
        if self.kind not in ("zero", "linear", "square"):
            raise ValueError(f"unknown scalar function kind {self.kind!r}")

    def __call__(self, x: float) -> float:
        if self.kind == "zero":
            return 0.0
        if self.kind == "linear":
            return self.coef * x
        return self.coef * x * x


@dataclass(frozen=True)
class PlanarSampledParams:
    f: ScalarFn
    g: ScalarFn
    M: float
    r: float
    eps: float
    a: float = REGION_RADIUS

    def __post_init__(self):
        if not self.eps < EPS_LIMIT:
            raise ValueError(
                f"target gain eps={self.eps} must be below 1/sqrt(2)={EPS_LIMIT:.6f}"
            )
        if not (self.M > 0.0 and self.r > 0.0):
            raise ValueError("gain M and period r must be positive")


def default_instance(eps: float = 0.5) -> PlanarSampledParams:
    """f(x) = x**2, g(x) = x with constants derived for the given eps."""
    f = ScalarFn("square")
    g = ScalarFn("linear")
    _, _, m, r = select_constants(f, g, eps)
    return PlanarSampledParams(f=f, g=g, M=m, r=r, eps=eps)


def select_constants(
    f: Callable[[float], float],
    g: Callable[[float], float],
    eps: float,
    a: float = REGION_RADIUS,
    n_grid: int = 20_001,
    m_round: float = 10.0,
    r_start: float = 0.08,
) -> Tuple[float, float, float, float]:
    """Bounds and admissible controller constants (P, Q, M, r).

    P and Q are tight grid bounds of |f(x)| / |x| and g(x) on the ball
    of radius a.  M is the smallest multiple of m_round with
    M >= 2 + 2 Q + 9 P^2 / (2 eps^2), and r is found by halving from
    r_start until 3 (M + Q) r exp(Q r) <= 1.
    """
    if not eps < EPS_LIMIT:
        raise ValueError(
            f"target gain eps={eps} must be below 1/sqrt(2)={EPS_LIMIT:.6f}"
        )
    xs = np.linspace(-a, a, n_grid)
    p_bound = 0.0
    q_bound = 0.0
    for x in xs:
        x = float(x)
        if x != 0.0:
            p_bound = max(p_bound, abs(f(x)) / abs(x))
        q_bound = max(q_bound, g(x))
    m_min = 2.0 + 2.0 * q_bound + 9.0 * p_bound**2 / (2.0 * eps**2)
    m = m_round * math.ceil(m_min / m_round)
    r = r_start
    while 3.0 * (m + q_bound) * r * math.exp(q_bound * r) > 1.0:
        r *= 0.5
        if r < 1e-12:
            raise RuntimeError("halving search for the sampling period failed")
    return p_bound, q_bound, m, r


def check_constants(p: PlanarSampledParams, p_bound: float, q_bound: float) -> Tuple[bool, bool]:
    """Re-substitute (P, Q, M, r) into the two selection inequalities."""
    left = p.M >= 2.0 + 2.0 * q_bound + 9.0 * p_bound**2 / (2.0 * p.eps**2)
    right = 3.0 * (p.M + q_bound) * p.r * math.exp(q_bound * p.r) <= 1.0
    return left, right


def ex32_rhs(
    p: PlanarSampledParams, t: float, x: float, y: float, y_held: float
) -> Tuple[float, float]:
    """Plant derivatives with the control value -M y_held frozen since
    the last sampling instant."""
    dx = -(1.0 + y * y) * x + y
    dy = -p.M * y_held + p.f(x) + p.g(x) * y
    return dx, dy


def x_subsystem_gain(s: float) -> float:
    """Input gain of the x block from |y|: sqrt(2) s / sqrt(1 + 4 s^2)."""
    return math.sqrt(2.0) * s / math.sqrt(1.0 + 4.0 * s * s)
