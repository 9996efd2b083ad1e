"""Drive the fused kernels for the canonical scenarios and wrap the
results into Trajectory objects (with transformed-coordinate series in
the aux slot where the verification checks need them)."""

from __future__ import annotations

import math
from typing import Callable, Optional

import numpy as np

from ..models.chemostat import (
    ChemostatParams,
    DelayFunctional,
    derived_constants,
)
from ..models.ex32 import PlanarSampledParams
from ..models.growth import GrowthModel, YieldModel
from . import kernels
from .integrators import ConstraintExitError, DivergenceError
from .signals import DisturbanceSignal, make_schedule
from .trajectory import Trajectory

__all__ = [
    "run_chemostat",
    "run_chemostat_transformed",
    "run_ex31_comparison",
    "run_ex31_concrete",
    "run_ex32",
    "sampled_grid",
]

_EMPTY = np.zeros(0)


def _growth_args(mu: GrowthModel):
    if mu.kind == "monod":
        return kernels.GROWTH_MONOD, mu.mu_max, mu.k_s, 0.0, _EMPTY, _EMPTY
    if mu.kind == "haldane":
        return kernels.GROWTH_HALDANE, mu.mu_max, mu.k_s, mu.k_i, _EMPTY, _EMPTY
    ks = np.array([k[0] for k in mu.knots], dtype=float)
    vs = np.array([k[1] for k in mu.knots], dtype=float)
    return kernels.GROWTH_TABLE, 0.0, 0.0, 0.0, ks, vs


def _yield_args(K: YieldModel):
    if K.kind == "constant":
        return kernels.YIELD_CONSTANT, K.value, _EMPTY, _EMPTY
    ks = np.array([k[0] for k in K.knots], dtype=float)
    vs = np.array([k[1] for k in K.knots], dtype=float)
    return kernels.YIELD_TABLE, 0.0, ks, vs


def _functional_args(p: ChemostatParams, functional: DelayFunctional, m: int, h: float):
    if functional.kind == "point_delay":
        if functional.tau > p.r + 1e-12:
            raise ValueError(
                f"point delay tau={functional.tau} exceeds the window r={p.r}"
            )
        return kernels.P_POINT_DELAY, functional.tau, 1.0, _EMPTY, _EMPTY, np.zeros(1)
    if functional.kind == "window_min":
        return kernels.P_WINDOW_MIN, 0.0, 1.0, _EMPTY, _EMPTY, np.zeros(1)
    if functional.kind == "window_max":
        return kernels.P_WINDOW_MAX, 0.0, 1.0, _EMPTY, _EMPTY, np.zeros(1)
    wts = np.array(functional.weights, dtype=float)
    dels = np.array(functional.delays, dtype=float)
    if dels.size and np.max(dels) > p.r + 1e-12:
        raise ValueError("convex mix delays must stay within the window")
    ker = (
        functional.kernel_on_grid(p.r, h)
        if functional.lam < 1.0
        else np.zeros(m + 1 if m > 0 else 1)
    )
    return kernels.P_CONVEX_MIX, 0.0, functional.lam, wts, dels, ker


def _steps(t_end: float, h: float) -> int:
    n = int(round(t_end / h))
    if abs(n * h - t_end) > 1e-9 * max(1.0, t_end):
        raise ValueError(f"t_end={t_end} must be a multiple of the step h={h}")
    return n


def _window_steps(r: float, h: float) -> int:
    if r == 0.0:
        return 0
    m = int(round(r / h))
    if abs(m * h - r) > 1e-9 * max(1.0, r):
        raise ValueError(f"step h={h} must divide the delay window r={r}")
    return m


def _raise_on_status(status: int, n_done: int, h: float, state_desc: str):
    t_fail = (n_done + 1) * h
    if status == kernels.STATUS_DIVERGED:
        raise DivergenceError(t_fail, state_desc)
    if status == kernels.STATUS_CONSTRAINT:
        raise ConstraintExitError(t_fail, state_desc, "state left its invariant region")


def run_chemostat(
    params: ChemostatParams,
    functional: DelayFunctional,
    d_signal: DisturbanceSignal,
    x0: float,
    s_history: Callable[[float], float],
    h: float,
    t_end: float,
    feedback: bool = True,
    d_const: float = 0.0,
) -> Trajectory:
    """Closed- or open-loop run in the original (X, S) coordinates.

    s_history(theta) supplies the substrate on [-r, 0]; X has no delayed
    channel so a scalar initial value suffices.  The aux slot carries
    the transformed series (x, y and the y history prefix) for the
    trajectory checks.
    """
    lo, hi = d_signal.bounds()
    if lo < 0.0 or hi > 1.0:
        raise ValueError("uncertainty signal d must take values in [0, 1]")
    if not x0 > 0.0:
        raise ValueError("initial biomass must be positive")
    m = _window_steps(params.r, h)
    n = _steps(t_end, h)
    s_full = np.zeros(m + n + 1)
    for j in range(m + 1):
        s_full[j] = s_history(-params.r + j * h)
    if np.any(s_full[: m + 1] <= 0.0) or np.any(s_full[: m + 1] >= params.S_i):
        raise ValueError("initial substrate history must stay inside (0, S_i)")
    mu_full = np.zeros_like(s_full)
    for j in range(m + 1):
        mu_full[j] = params.mu(float(s_full[j]))
    d_half = d_signal.sample(0.5 * h * np.arange(2 * n + 1))

    der = derived_constants(params)
    gk = _growth_args(params.mu)
    yk = _yield_args(params.K)
    pk = _functional_args(params, functional, m, h)
    x_arr, dil_arr, status, n_done = kernels.chemostat_loop(
        h, n, m, float(x0), s_full, mu_full,
        gk[0], gk[1], gk[2], gk[3], gk[4], gk[5],
        yk[0], yk[1], yk[2], yk[3],
        params.S_i, params.b, params.a, der["D_s"], params.S_s,
        pk[0], pk[1], pk[2], pk[3], pk[4], pk[5],
        d_half, feedback, float(d_const),
    )
    _raise_on_status(status, n_done, h, "chemostat run")

    times = h * np.arange(n + 1)
    s_states = s_full[m:]
    g_big = der["G"]
    y_full = np.log(g_big * s_full / (params.S_i - s_full))
    x_trans = np.log(x_arr / der["X_s"])
    return Trajectory(
        times=times,
        states=np.column_stack([x_arr, s_states]),
        state_names=("X", "S"),
        inputs={"D": dil_arr, "d": d_half[::2]},
        aux={
            "y_full": y_full,
            "x_transformed": x_trans,
            "m": m,
            "h": h,
            "s_full": s_full,
            "derived": der,
        },
        meta={"model": "chemostat", "h": h, "t_end": t_end, "r": params.r},
    )


def run_chemostat_transformed(
    params: ChemostatParams,
    functional: DelayFunctional,
    d_signal: DisturbanceSignal,
    x0: float,
    y_history: Callable[[float], float],
    h: float,
    t_end: float,
) -> Trajectory:
    """Closed-loop run in the transformed plane coordinates."""
    lo, hi = d_signal.bounds()
    if lo < 0.0 or hi > 1.0:
        raise ValueError("uncertainty signal d must take values in [0, 1]")
    m = _window_steps(params.r, h)
    n = _steps(t_end, h)
    y_full = np.zeros(m + n + 1)
    for j in range(m + 1):
        y_full[j] = y_history(-params.r + j * h)
    der = derived_constants(params)
    g_big = der["G"]
    s_full = np.zeros_like(y_full)
    mu_full = np.zeros_like(y_full)
    for j in range(m + 1):
        ey = math.exp(y_full[j])
        s_full[j] = params.S_i * ey / (g_big + ey)
        mu_full[j] = params.mu(float(s_full[j]))
    d_half = d_signal.sample(0.5 * h * np.arange(2 * n + 1))

    gk = _growth_args(params.mu)
    yk = _yield_args(params.K)
    pk = _functional_args(params, functional, m, h)
    x_arr, u_arr, status, n_done = kernels.transformed_loop(
        h, n, m, float(x0), y_full, s_full, mu_full,
        gk[0], gk[1], gk[2], gk[3], gk[4], gk[5],
        yk[0], yk[1], yk[2], yk[3],
        params.S_i, params.b, params.a, der["D_s"], der["X_s"], g_big,
        pk[0], pk[1], pk[2], pk[3], pk[4], pk[5],
        d_half,
    )
    _raise_on_status(status, n_done, h, "transformed chemostat run")

    times = h * np.arange(n + 1)
    return Trajectory(
        times=times,
        states=np.column_stack([x_arr, y_full[m:]]),
        state_names=("x", "y"),
        inputs={"u": u_arr, "d": d_half[::2]},
        aux={
            "y_full": y_full,
            "x_transformed": x_arr,
            "m": m,
            "h": h,
            "derived": der,
        },
        meta={"model": "chemostat_transformed", "h": h, "t_end": t_end, "r": params.r},
    )


def run_ex31_comparison(v0: float, w0: float, h: float, t_end: float) -> Trajectory:
    if v0 < 0.0 or w0 < 0.0:
        raise ValueError("comparison state must start in the nonnegative quadrant")
    n = _steps(t_end, h)
    vs, ws, status, n_done = kernels.ex31_comparison_loop(float(v0), float(w0), h, n)
    _raise_on_status(status, n_done, h, "comparison run")
    times = h * np.arange(n + 1)
    return Trajectory(
        times=times,
        states=np.column_stack([vs, ws]),
        state_names=("v", "w"),
        meta={"model": "ex31_comparison", "h": h, "t_end": t_end},
    )


def run_ex31_concrete(
    x0: float, y0: float, d_signal: DisturbanceSignal, h: float, t_end: float
) -> Trajectory:
    lo, hi = d_signal.bounds()
    if lo < -1.0 or hi > 1.0:
        raise ValueError("disturbance d must take values in [-1, 1]")
    n = _steps(t_end, h)
    d_half = d_signal.sample(0.5 * h * np.arange(2 * n + 1))
    xs, ys, status, n_done = kernels.ex31_concrete_loop(
        float(x0), float(y0), d_half, h, n
    )
    _raise_on_status(status, n_done, h, "concrete planar run")
    times = h * np.arange(n + 1)
    return Trajectory(
        times=times,
        states=np.column_stack([xs, ys]),
        state_names=("x", "y"),
        inputs={"d": d_half[::2]},
        meta={"model": "ex31_concrete", "h": h, "t_end": t_end},
    )


def sampled_grid(events: np.ndarray, t_end: float, h: float):
    """Event-aligned time grid: every sampling instant is a grid point
    and every inter-event gap is carved into uniform substeps <= h."""
    times = [0.0]
    flags = [1]
    ev = list(np.asarray(events, dtype=float)) + [t_end]
    for k in range(len(ev) - 1):
        gap = ev[k + 1] - ev[k]
        n_sub = max(1, int(math.ceil(gap / h - 1e-12)))
        dt = gap / n_sub
        for j in range(1, n_sub + 1):
            times.append(ev[k] + j * dt)
            flags.append(0)
        if k + 1 < len(ev) - 1:
            flags[-1] = 1
    return np.array(times), np.array(flags, dtype=np.int64)


def run_ex32(
    params: PlanarSampledParams,
    w_signal: DisturbanceSignal,
    x0: float,
    y0: float,
    h: Optional[float],
    t_end: float,
) -> Trajectory:
    """Sampled-data loop under a perturbed schedule.

    h defaults to a tenth of the nominal period; it must stay below a
    quarter of the smallest realized gap so events are resolved.
    """
    if h is None:
        h = params.r / 10.0
    events = make_schedule(params.r, w_signal, t_end)
    # the constraint concerns the schedule gaps; the final fragment up
    # to t_end may be arbitrarily short and gets its own substep
    if len(events) > 1:
        min_gap = float(np.min(np.diff(events)))
        if h > min_gap / 4.0 + 1e-12:
            raise ValueError(
                f"step h={h} must be at most a quarter of the smallest "
                f"sampling gap {min_gap:.6g}"
            )
    times, flags = sampled_grid(events, t_end, h)
    fk = {"zero": kernels.FN_ZERO, "linear": kernels.FN_LINEAR, "square": kernels.FN_SQUARE}
    xs, ys, us, status, n_done = kernels.ex32_loop(
        times, flags, float(x0), float(y0), params.M,
        fk[params.f.kind], params.f.coef, fk[params.g.kind], params.g.coef,
    )
    if status != kernels.STATUS_OK:
        raise DivergenceError(times[min(n_done + 1, len(times) - 1)], "sampled run")
    w_series = w_signal.sample(times)
    return Trajectory(
        times=times,
        states=np.column_stack([xs, ys]),
        state_names=("x", "y"),
        inputs={"u": us, "w": w_series},
        events=flags,
        meta={
            "model": "ex32_sampled",
            "h": h,
            "t_end": t_end,
            "n_events": len(events),
        },
    )
