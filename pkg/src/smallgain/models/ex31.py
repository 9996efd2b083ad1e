"""Planar interconnection whose second block is only integral-ISS.

Two levels are provided.  The comparison system propagates the
worst-case Lyapunov bounds directly,

    dv/dt = -2 v / (1 + v) + w / ((1 + v)(1 + w))
    dw/dt = -2 w / (1 + w) + v

on the nonnegative quadrant.  The concrete instance is one vector field
certified (on a grid, see certification_margins) to satisfy those
bounds with V = x**2 and W = y**2:

    dx/dt = -x/(1 + x^2) + d * x y^2 / (2 (1 + x^2)^2 (1 + y^2))
    dy/dt = -y/(1 + y^2) + d * y x^2 / (2 (1 + y^2))

with disturbance d in [-1, 1].
"""

from __future__ import annotations

from typing import Tuple

import numpy as np

__all__ = [
    "comparison_rhs",
    "concrete_rhs",
    "certification_margins",
    "comparison_w_gain",
]


def comparison_rhs(v: float, w: float) -> Tuple[float, float]:
    """Worst-case comparison dynamics; the nonnegative quadrant is
    forward invariant (v = 0 gives dv/dt >= 0, likewise for w)."""
    if v < 0.0 or w < 0.0:
        raise ValueError(f"comparison state must be nonnegative, got ({v}, {w})")
    dv = -2.0 * v / (1.0 + v) + w / ((1.0 + v) * (1.0 + w))
    dw = -2.0 * w / (1.0 + w) + v
    return dv, dw


def concrete_rhs(d: float, x: float, y: float) -> Tuple[float, float]:
    """Concrete disturbed vector field certified against the comparison
    bounds with V = x**2, W = y**2."""
    x2, y2 = x * x, y * y
    fx = -x / (1.0 + x2) + d * x * y2 / (2.0 * (1.0 + x2) ** 2 * (1.0 + y2))
    fy = -y / (1.0 + y2) + d * y * x2 / (2.0 * (1.0 + y2))
    return fx, fy


def certification_margins(n: int = 200, box: float = 10.0) -> Tuple[float, float]:
    """Worst slack of the two certification inequalities on an
    n-by-n grid over [-box, box]^2 with extreme disturbances d = +/-1.

    Returns (worst_v, worst_w) where each value is the maximum of
    lhs - rhs; nonpositive values certify the instance on the grid.
    """
    xs = np.linspace(-box, box, n)
    ys = np.linspace(-box, box, n)
    x, y = np.meshgrid(xs, ys, indexing="ij")
    x2, y2 = x * x, y * y
    worst_v = -np.inf
    worst_w = -np.inf
    for d in (-1.0, 1.0):
        fx = -x / (1.0 + x2) + d * x * y2 / (2.0 * (1.0 + x2) ** 2 * (1.0 + y2))
        fy = -y / (1.0 + y2) + d * y * x2 / (2.0 * (1.0 + y2))
        lhs_v = 2.0 * x * fx
        rhs_v = -2.0 * x2 / (1.0 + x2) + y2 / ((1.0 + x2) * (1.0 + y2))
        lhs_w = 2.0 * y * fy
        rhs_w = -2.0 * y2 / (1.0 + y2) + x2
        worst_v = max(worst_v, float(np.max(lhs_v - rhs_v)))
        worst_w = max(worst_w, float(np.max(lhs_w - rhs_w)))
    return worst_v, worst_w


def comparison_w_gain(eps: float):
    """Gain of the w-channel into the v-estimate,
    s -> (1 + eps)/2 * s / (1 + s)."""
    from ..gains import SaturatingRationalGain

    return SaturatingRationalGain(alpha=(1.0 + eps) / 2.0, beta=1.0, delta=1.0)
