"""Fixed-step integrators: classical one-step RK4, method of steps for
delayed systems, and event-aligned stepping for sampled-data loops.

These are the generic, callable-driven paths.  The canonical scenarios
run through the fused kernels in kernels.py; the functions here dominate
the test oracles and accept arbitrary Python right-hand sides.
"""

from __future__ import annotations

import math
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from .history import HistoryBuffer
from .trajectory import Trajectory

__all__ = [
    "DivergenceError",
    "ConstraintExitError",
    "integrate_ode",
    "integrate_dde",
    "integrate_sampled",
    "DIVERGENCE_LIMIT",
]

# any state component beyond this magnitude (or non-finite) aborts a run
DIVERGENCE_LIMIT = 1e12


class DivergenceError(RuntimeError):
    def __init__(self, t: float, state):
        super().__init__(f"state diverged at t={t}: {state}")
        self.t = t
        self.state = state


class ConstraintExitError(RuntimeError):
    def __init__(self, t: float, state, message: str):
        super().__init__(f"constraint violated at t={t}: {message} (state {state})")
        self.t = t
        self.state = state


def _check_state(t: float, x: np.ndarray) -> None:
    if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > DIVERGENCE_LIMIT:
        raise DivergenceError(t, x)


def _rk4_step(rhs, t, x, h):
    k1 = rhs(t, x)
    k2 = rhs(t + 0.5 * h, x + 0.5 * h * k1)
    k3 = rhs(t + 0.5 * h, x + 0.5 * h * k2)
    k4 = rhs(t + h, x + h * k3)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _grid(t0: float, t_end: float, h: float) -> np.ndarray:
    if not h > 0.0:
        raise ValueError("step h must be positive")
    if not t_end > t0:
        raise ValueError("t_end must exceed t0")
    n = int(round((t_end - t0) / h))
    if abs(t0 + n * h - t_end) > 1e-9 * max(1.0, abs(t_end)):
        n = int(math.ceil((t_end - t0) / h - 1e-12))
        times = t0 + h * np.arange(n + 1)
        times[-1] = t_end
        return times
    return t0 + h * np.arange(n + 1)


def integrate_ode(
    rhs: Callable[[float, np.ndarray], np.ndarray],
    x0,
    t_span: Tuple[float, float],
    h: float,
    state_names: Optional[Sequence[str]] = None,
) -> Trajectory:
    """Classical fixed-step fourth-order trajectory of dx/dt = rhs(t, x)."""
    t0, t_end = t_span
    times = _grid(t0, t_end, h)
    x = np.atleast_1d(np.asarray(x0, dtype=float))
    states = np.empty((len(times), x.shape[0]))
    states[0] = x

    def f(t, v):
        return np.asarray(rhs(t, v), dtype=float)

    for i in range(len(times) - 1):
        x = _rk4_step(f, times[i], x, times[i + 1] - times[i])
        _check_state(times[i + 1], x)
        states[i + 1] = x
    names = state_names or [f"x{i}" for i in range(x.shape[0])]
    return Trajectory(times=times, states=states, state_names=names, meta={"h": h})


def integrate_dde(
    rhs: Callable[[float, np.ndarray, HistoryBuffer], np.ndarray],
    r: float,
    init_history,
    t_span: Tuple[float, float],
    h: float,
    state_names: Optional[Sequence[str]] = None,
    monitor: Optional[Callable[[float, np.ndarray], Optional[str]]] = None,
) -> Trajectory:
    """Method of steps for dx/dt = rhs(t, x, history).

    The history buffer holds samples up to the current step start; the
    intermediate stage lookups interpolate the stored grid, so delayed
    arguments must lag by at least one step.  r = 0 reduces to
    integrate_ode with the degenerate single-slot buffer.  A monitor may
    flag state-constraint exits; its message is raised with the time and
    state attached.
    """
    t0, t_end = t_span
    if r == 0.0:
        hist = HistoryBuffer(0.0, h, init_history, t0=t0)

        def ode_rhs(t, x):
            return np.asarray(rhs(t, x, hist), dtype=float)

        x0 = hist.latest()
        times = _grid(t0, t_end, h)
        states = np.empty((len(times), x0.shape[0]))
        states[0] = x0
        x = x0
        for i in range(len(times) - 1):
            x = _rk4_step(ode_rhs, times[i], x, times[i + 1] - times[i])
            _check_state(times[i + 1], x)
            if monitor is not None:
                msg = monitor(times[i + 1], x)
                if msg:
                    raise ConstraintExitError(times[i + 1], x, msg)
            hist.push(x)
            states[i + 1] = x
        names = state_names or [f"x{i}" for i in range(x.shape[0])]
        return Trajectory(times=times, states=states, state_names=names, meta={"h": h})

    hist = HistoryBuffer(r, h, init_history, t0=t0)
    times = _grid(t0, t_end, h)
    if np.max(np.abs(np.diff(times) - h)) > 1e-9 * max(1.0, h):
        raise ValueError("delayed integration needs t_end - t0 divisible by h")
    x = hist.latest()
    states = np.empty((len(times), x.shape[0]))
    states[0] = x

    def f(t, v):
        return np.asarray(rhs(t, v, hist), dtype=float)

    for i in range(len(times) - 1):
        x = _rk4_step(f, times[i], x, h)
        _check_state(times[i + 1], x)
        if monitor is not None:
            msg = monitor(times[i + 1], x)
            if msg:
                raise ConstraintExitError(times[i + 1], x, msg)
        hist.push(x)
        states[i + 1] = x
    names = state_names or [f"x{i}" for i in range(x.shape[0])]
    return Trajectory(times=times, states=states, state_names=names, meta={"h": h})


def integrate_sampled(
    plant_rhs: Callable[[float, np.ndarray, np.ndarray], np.ndarray],
    controller: Callable[[float, np.ndarray], np.ndarray],
    events: np.ndarray,
    x0,
    t_span: Tuple[float, float],
    h: float,
    state_names: Optional[Sequence[str]] = None,
    input_name: str = "u",
) -> Trajectory:
    """Zero-order-hold loop: the controller output is sampled at each
    event and held constant until the next one.

    Integration steps never straddle an event; each inter-event gap is
    carved into uniform substeps no longer than h.  The step bound must
    satisfy h <= min gap / 4 so every interval is resolved.
    """
    t0, t_end = t_span
    events = np.asarray(events, dtype=float)
    if events.size == 0 or abs(events[0] - t0) > 1e-12:
        raise ValueError("the first sampling instant must be t0")
    gaps = np.diff(np.append(events, t_end))
    if np.any(gaps <= 0.0):
        raise ValueError("sampling instants must be strictly increasing below t_end")
    # the bound concerns the inter-event gaps; the final fragment up to
    # t_end may be arbitrarily short and gets its own substeps
    if events.size > 1:
        min_gap = float(np.min(np.diff(events)))
        if h > min_gap / 4.0 + 1e-12:
            raise ValueError(
                f"step h={h} must be at most a quarter of the smallest gap "
                f"{min_gap:.6g}"
            )

    x = np.atleast_1d(np.asarray(x0, dtype=float))
    times = [t0]
    states = [x.copy()]
    ev_flags = [1]
    held_series = [None]

    for k, tau in enumerate(events):
        u = np.atleast_1d(np.asarray(controller(tau, x), dtype=float))
        held_series[-1] = u.copy()
        seg_end = events[k + 1] if k + 1 < len(events) else t_end
        gap = seg_end - tau
        n_sub = max(1, int(math.ceil(gap / h - 1e-12)))
        dt = gap / n_sub

        def f(t, v, u=u):
            return np.asarray(plant_rhs(t, v, u), dtype=float)

        t = tau
        for j in range(n_sub):
            x = _rk4_step(f, t, x, dt)
            t = tau + (j + 1) * dt
            _check_state(t, x)
            times.append(t)
            states.append(x.copy())
            ev_flags.append(0)
            held_series.append(u.copy())
        ev_flags[-1] = 1 if k + 1 < len(events) else ev_flags[-1]

    held = np.array([np.atleast_1d(v)[0] for v in held_series])
    names = state_names or [f"x{i}" for i in range(x.shape[0])]
    return Trajectory(
        times=np.array(times),
        states=np.array(states),
        state_names=names,
        inputs={input_name: held},
        events=np.array(ev_flags, dtype=np.int64),
        meta={"h": h, "n_events": len(events)},
    )
