"""Empirical verification of trajectory inequalities.

Everything here consumes recorded trajectories and produces CheckReport
values: monotone-bound checks, transient entry times, running-sup
small-gain estimates, transient-plus-gain output envelopes, and
convergence reports.  Transient envelopes of the form
a1(exp(-t) a2(s)) may be fitted by a single scale factor at the start
time of a check; every later sample is then a genuine inequality test.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple, Union

import numpy as np

from .gains import (
    GainFunction,
    KLFunction,
    MaxPreservingMap,
    PiecewiseLinearGain,
    apply_map,
)
from .models.chemostat import ChemostatParams, derived_constants, transformed_aux

__all__ = [
    "CheckReport",
    "TrajectoryCheckSpec",
    "check_monotone_abs",
    "transient_entry_time",
    "check_small_gain_estimate",
    "check_ios_envelope",
    "chemostat_gain_g1_g2",
    "gamma21_gain_table",
    "convergence_report",
    "weighted_square_history",
    "fit_scale_at_start",
]

# default residual tolerance on normalized functionals: well above the
# integrator error at default steps, well below meaningful violations
DEFAULT_TOL = 1e-6


@dataclass
class CheckReport:
    name: str
    passed: bool
    worst_residual: float
    worst_time: float
    details: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": bool(self.passed),
            "worst_residual": float(self.worst_residual),
            "worst_time": float(self.worst_time),
            "details": self.details,
        }


@dataclass
class TrajectoryCheckSpec:
    """Bundle for the running-sup small-gain estimate on one run.

    The component functionals and the start-magnitude functional are
    realized as series precomputed from the trajectory (V row i and
    L[i] at sample i).  The optional zeta/input pair adds the
    input-gain term to the right-hand side.
    """

    V: np.ndarray  # shape (n_samples, n_components)
    L: np.ndarray  # scalar series
    gamma_map: MaxPreservingMap
    sigma: KLFunction
    sigma_fit: bool = True
    zeta: Optional[GainFunction] = None
    input_sup: Optional[np.ndarray] = None  # running sup of the input norm


def check_monotone_abs(
    times: np.ndarray,
    values: np.ndarray,
    tol: float,
    init_sup: Optional[float] = None,
    name: str = "monotone_abs",
) -> CheckReport:
    """Pass iff |values| never exceeds its initial window supremum by
    more than tol.  init_sup defaults to the first sample."""
    times = np.asarray(times, dtype=float)
    vals = np.abs(np.asarray(values, dtype=float))
    sup0 = float(vals[0]) if init_sup is None else float(init_sup)
    resid = vals - sup0
    worst = int(np.argmax(resid))
    return CheckReport(
        name=name,
        passed=bool(resid[worst] <= tol),
        worst_residual=float(resid[worst]),
        worst_time=float(times[worst]),
        details={"initial_sup": sup0, "tol": tol},
    )


def transient_entry_time(
    times: np.ndarray, region_ok: np.ndarray
) -> Optional[float]:
    """Smallest sample time from which the region predicate holds at
    every later sample; None if the trajectory keeps leaving it."""
    ok = np.asarray(region_ok, dtype=bool)
    if not ok[-1]:
        return None
    # first index of the trailing all-true block
    bad = np.nonzero(~ok)[0]
    idx = 0 if bad.size == 0 else int(bad[-1]) + 1
    return float(np.asarray(times)[idx])


def fit_scale_at_start(
    v0: np.ndarray, gamma_v0: np.ndarray, sigma0: float
) -> float:
    """Smallest multiplier lam such that every component of v0 is
    covered by max(lam * sigma0, gamma_v0)."""
    lam = 0.0
    for vi, gi in zip(np.atleast_1d(v0), np.atleast_1d(gamma_v0)):
        if vi > gi:
            if sigma0 <= 0.0:
                return math.inf
            lam = max(lam, vi / sigma0)
    return lam


def check_small_gain_estimate(
    times: np.ndarray,
    spec: TrajectoryCheckSpec,
    from_time: float,
    tol: float = DEFAULT_TOL,
    name: str = "small_gain_estimate",
) -> CheckReport:
    """Running-sup vector estimate from the entry time onward.

    With t0 the entry time, each component must satisfy

        V(t) <= MAX{ 1 sigma(L(t0), t - t0),
                     Gamma([V] sup over [t0, t]),
                     1 zeta(input sup) }         (input term optional)

    If sigma_fit is set the envelope is scaled once so the estimate
    holds with equality margin at t0; all later samples are genuine.
    """
    times = np.asarray(times, dtype=float)
    if not (times[0] - 1e-12 <= from_time <= times[-1] + 1e-12):
        raise ValueError(f"from_time {from_time} outside the trajectory range")
    i0 = int(np.searchsorted(times, from_time - 1e-12))
    v = np.asarray(spec.V, dtype=float)
    n = v.shape[1]
    l0 = float(spec.L[i0])

    sigma = spec.sigma
    sigma0 = sigma(l0, 0.0)
    running = v[i0].copy()
    gamma_term0 = apply_map(spec.gamma_map, running)
    scale = 1.0
    if spec.sigma_fit:
        scale = fit_scale_at_start(v[i0], gamma_term0, sigma0)
        if not math.isfinite(scale):
            return CheckReport(name, False, math.inf, float(times[i0]),
                               {"reason": "zero envelope cannot cover V(t0)"})

    worst = -math.inf
    worst_t = float(times[i0])
    running = v[i0].copy()
    for i in range(i0, len(times)):
        np.maximum(running, v[i], out=running)
        rhs = np.full(n, scale * sigma(l0, float(times[i] - times[i0])))
        np.maximum(rhs, apply_map(spec.gamma_map, running), out=rhs)
        if spec.zeta is not None and spec.input_sup is not None:
            np.maximum(rhs, spec.zeta(float(spec.input_sup[i])), out=rhs)
        resid = float(np.max(v[i] - rhs))
        if resid > worst:
            worst = resid
            worst_t = float(times[i])
    return CheckReport(
        name=name,
        passed=bool(worst <= tol),
        worst_residual=worst,
        worst_time=worst_t,
        details={"fitted_scale": scale, "from_time": float(times[i0]), "tol": tol},
    )


def check_ios_envelope(
    times: np.ndarray,
    output: np.ndarray,
    x0_norm: float,
    sigma: KLFunction,
    beta: float,
    gamma: Union[GainFunction, Callable[[float], float], None],
    input_series: Optional[np.ndarray],
    tol: float = DEFAULT_TOL,
    combine: str = "sum",
    fit: bool = True,
    name: str = "ios_envelope",
) -> CheckReport:
    """Transient-plus-gain envelope on an output series.

    Pass iff output(t) <= sigma(beta * x0_norm, t - t0) (+ or max)
    running sup of gamma(|input|) within tol, for every sample.  With a
    zero gain this degenerates to a pure transient-envelope check.
    """
    times = np.asarray(times, dtype=float)
    out = np.asarray(output, dtype=float)
    if combine not in ("sum", "max"):
        raise ValueError("combine must be 'sum' or 'max'")
    gain_sup = np.zeros_like(out)
    if gamma is not None and input_series is not None:
        g = 0.0
        for i, w in enumerate(np.asarray(input_series, dtype=float)):
            g = max(g, float(gamma(abs(float(w)))))
            gain_sup[i] = g
    s0 = beta * x0_norm
    scale = 1.0
    if fit:
        env0 = sigma(s0, 0.0)
        base0 = gain_sup[0]
        need = out[0] - base0 if combine == "sum" else (out[0] if out[0] > base0 else 0.0)
        if need > 0.0:
            if env0 <= 0.0:
                return CheckReport(name, False, math.inf, float(times[0]),
                                   {"reason": "zero envelope cannot cover output(t0)"})
            scale = max(1.0, need / env0)

    worst = -math.inf
    worst_t = float(times[0])
    for i, t in enumerate(times):
        env = scale * sigma(s0, float(t - times[0]))
        rhs = env + gain_sup[i] if combine == "sum" else max(env, gain_sup[i])
        resid = float(out[i] - rhs)
        if resid > worst:
            worst = resid
            worst_t = float(t)
    return CheckReport(
        name=name,
        passed=bool(worst <= tol),
        worst_residual=worst,
        worst_time=worst_t,
        details={"fitted_scale": scale, "combine": combine, "tol": tol},
    )


# -- gain pair of the delayed bioreactor proof --------------------------------


def _z_range_extrema(
    p: ChemostatParams, radius: float, n_grid: int
) -> Tuple[float, float, float, float]:
    """Extrema of mu_t and of the auxiliary g over y = c(exp(z) - 1),
    |z| <= radius."""
    c = derived_constants(p)["c"]
    zs = np.linspace(-radius, radius, n_grid)
    mu_lo = math.inf
    mu_hi = -math.inf
    g_lo = math.inf
    g_hi = -math.inf
    for z in zs:
        y = c * (math.exp(float(z)) - 1.0)
        mu_v, g_v = transformed_aux(p, y)
        mu_lo = min(mu_lo, mu_v)
        mu_hi = max(mu_hi, mu_v)
        g_lo = min(g_lo, g_v)
        g_hi = max(g_hi, g_v)
    return mu_lo, mu_hi, g_lo, g_hi


def chemostat_gain_g1_g2(
    p: ChemostatParams,
    sigma_rate: float,
    eps: float,
    s: float,
    n_grid: int = 801,
) -> Tuple[float, float, float]:
    """Gain ingredients (g1(s), g2(s), gamma21(s)) of the x-descent
    implication for the closed-loop bioreactor.

    The g-extrema are taken over |z| <= sqrt(s) and the growth extrema
    over the wider window |z| <= exp(sigma_rate * r) sqrt(s), matching
    the exponentially weighted history functional.  The log of the
    large ratio is evaluated stably, so very large s degrade gracefully
    instead of overflowing.
    """
    if s < 0.0:
        raise ValueError("argument s must be nonnegative")
    if not eps > 0.0:
        raise ValueError("eps must be positive")
    der = derived_constants(p)
    c = der["c"]
    d_s = der["D_s"]
    g_big = der["G"]
    rad_g = math.sqrt(s)
    rad_mu = math.exp(sigma_rate * p.r) * math.sqrt(s)
    _, _, g_lo, g_hi = _z_range_extrema(p, rad_g, n_grid)
    mu_lo, mu_hi, _, _ = _z_range_extrema(p, rad_mu, n_grid)

    # A = c (exp(sqrt(s)) - 1) may be huge; ln(G + exp(A)) ~ A then
    big_a = c * math.expm1(rad_g)
    if big_a > 700.0:
        log_g_plus = big_a
    else:
        log_g_plus = math.log(g_big + math.exp(big_a))
    e_low = math.exp(c * math.expm1(-rad_g))  # exp(c(exp(-sqrt(s)) - 1)) <= 1

    den1 = mu_lo - p.b - p.a * d_s / (g_big + 1.0) * (1.0 - e_low)
    if not den1 > 0.0:
        raise ValueError(
            f"growth margin exhausted at s={s}: the descent denominator "
            f"{den1:.6g} is not positive (out of domain)"
        )
    log_g1 = log_g_plus + math.log(d_s * g_hi) - math.log(den1)
    g1 = math.exp(log_g1) if log_g1 < 700.0 else math.inf

    num2 = mu_hi - p.b
    den2 = (g_big + e_low) * d_s * g_lo
    g2 = num2 / den2
    if s == 0.0:
        # both ratios collapse to exactly one at the setpoint (the
        # numerators and denominators are the same equilibrium balance),
        # so the squared log vanishes identically
        return g1, g2, 0.0
    log_gmax = max(log_g1, math.log(g2) if g2 > 0.0 else -math.inf)
    # gains below one contribute nothing to the squared log
    log_gmax = max(log_gmax, 0.0)
    gamma21 = (1.0 + eps) ** 2 * log_gmax**2
    return g1, g2, gamma21


def gamma21_gain_table(
    p: ChemostatParams,
    sigma_rate: float,
    eps: float,
    s_max: float,
    n_knots: int = 241,
    n_grid: int = 801,
) -> PiecewiseLinearGain:
    """Sample gamma21 on a log-dense grid into a piecewise-linear gain.

    The sampled values are nondecreasing analytically; tiny grid-scan
    wiggle is flattened by a running maximum and asserted small.
    """
    ss = np.concatenate([[0.0], np.geomspace(s_max * 1e-8, s_max, n_knots - 1)])
    vals = np.array(
        [chemostat_gain_g1_g2(p, sigma_rate, eps, float(s), n_grid)[2] for s in ss]
    )
    flat = np.maximum.accumulate(vals)
    if np.max(flat - vals) > 1e-9 * max(1.0, float(np.max(vals))):
        raise AssertionError("gamma21 samples decreased beyond grid-scan noise")
    return PiecewiseLinearGain(tuple(zip(map(float, ss), map(float, flat))))


def convergence_report(
    times: np.ndarray,
    states: np.ndarray,
    target: np.ndarray,
    tol_rel: float,
    settle_fraction: float,
    name: str = "convergence",
) -> CheckReport:
    """Pass iff the relative distance to the target stays below tol_rel
    over the last settle_fraction of the run.

    Distances are relative to the target norm; a zero target falls back
    to the plain norm.  The reported settling time is the first time
    after which the distance never exceeds tol_rel again.
    """
    if not (0.0 < settle_fraction < 1.0):
        raise ValueError("settle_fraction must lie in (0, 1)")
    times = np.asarray(times, dtype=float)
    states = np.atleast_2d(np.asarray(states, dtype=float))
    target = np.atleast_1d(np.asarray(target, dtype=float))
    denom = float(np.linalg.norm(target))
    if denom == 0.0:
        denom = 1.0
    dist = np.linalg.norm(states - target, axis=1) / denom

    t_tail = times[-1] - settle_fraction * (times[-1] - times[0])
    tail = times >= t_tail - 1e-12
    worst_tail = float(np.max(dist[tail]))
    i_worst = int(np.argmax(np.where(tail, dist, -np.inf)))

    above = np.nonzero(dist > tol_rel)[0]
    settling = float(times[0]) if above.size == 0 else (
        float(times[above[-1] + 1]) if above[-1] + 1 < len(times) else math.inf
    )
    return CheckReport(
        name=name,
        passed=bool(worst_tail <= tol_rel),
        worst_residual=worst_tail - tol_rel,
        worst_time=float(times[i_worst]),
        details={
            "settling_time": settling,
            "tol_rel": tol_rel,
            "final_distance": float(dist[-1]),
        },
    )


def weighted_square_history(
    y_full: np.ndarray, m: int, h: float, weight_rate: float, transform=None
) -> np.ndarray:
    """Series max over the window of exp(2 * rate * theta) * f(y)^2.

    y_full includes the m-sample history prefix; the output is indexed
    like the trajectory (entry i at time i * h).  transform maps the
    stored series before squaring (identity by default)."""
    vals = np.asarray(y_full, dtype=float)
    if transform is not None:
        vals = np.array([transform(float(v)) for v in vals])
    sq = vals * vals
    n = len(vals) - m
    weights = np.exp(2.0 * weight_rate * h * (np.arange(m + 1) - m))
    out = np.empty(n)
    for i in range(n):
        out[i] = float(np.max(weights * sq[i : i + m + 1]))
    return out
