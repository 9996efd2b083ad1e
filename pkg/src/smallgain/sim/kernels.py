"""Fused integration loops for the canonical closed-loop systems.

Each loop advances a whole trajectory with the classical fixed-step
fourth-order scheme, keeping the delay window, the stage-time delayed
lookups and the feedback law inside one compiled function.  The loops
carry numba's nopython JIT by default; setting the environment variable
SMALLGAIN_DISABLE_NJIT=1 before import selects the plain NumPy/Python
path instead (same code, no compilation).  The *_py references always
point at the uncompiled implementations so the two paths can be
compared directly (see benchmarks/bench_kernels.py).

Conventions shared by the delayed loops:

- state histories are stored on the uniform grid, oldest first; index m
  corresponds to the initial time, so sample i sits at t = (i - m) h;
- window statistics for a stage at time t' use the stored samples of
  [t - r, t] plus the stage's own value (for r = 0 the stage value
  alone), an O(h)-wide superset of [t' - r, t'];
- point-delay lookups interpolate the substrate linearly on the stored
  grid, and between the newest stored sample and the stage value when
  the target time falls inside the current step.

Status codes: 0 ok, 1 divergence (non-finite or magnitude beyond 1e12),
2 state-constraint exit.
"""

from __future__ import annotations

import math
import os

import numpy as np

__all__ = [
    "NUMBA_ENABLED",
    "STATUS_OK",
    "STATUS_DIVERGED",
    "STATUS_CONSTRAINT",
    "GROWTH_MONOD",
    "GROWTH_HALDANE",
    "GROWTH_TABLE",
    "YIELD_CONSTANT",
    "YIELD_TABLE",
    "P_POINT_DELAY",
    "P_WINDOW_MIN",
    "P_WINDOW_MAX",
    "P_CONVEX_MIX",
    "FN_ZERO",
    "FN_LINEAR",
    "FN_SQUARE",
    "chemostat_loop",
    "transformed_loop",
    "ex31_comparison_loop",
    "ex31_concrete_loop",
    "ex32_loop",
]

NUMBA_ENABLED = os.environ.get("SMALLGAIN_DISABLE_NJIT", "").lower() not in (
    "1",
    "true",
    "yes",
)

if NUMBA_ENABLED:
    from numba import njit as _njit

    def _maybe_njit(fn):
        return _njit(cache=True)(fn)

else:

    def _maybe_njit(fn):
        return fn


STATUS_OK = 0
STATUS_DIVERGED = 1
STATUS_CONSTRAINT = 2

GROWTH_MONOD = 0
GROWTH_HALDANE = 1
GROWTH_TABLE = 2

YIELD_CONSTANT = 0
YIELD_TABLE = 1

P_POINT_DELAY = 0
P_WINDOW_MIN = 1
P_WINDOW_MAX = 2
P_CONVEX_MIX = 3

FN_ZERO = 0
FN_LINEAR = 1
FN_SQUARE = 2

_LIMIT = 1e12
# log-plane states beyond this are unambiguous divergence, and keeping
# them inside the exp range makes overflow behave identically in the
# compiled and interpreted paths
_LOG_LIMIT = 600.0


def _table_interp_py(ks, vs, s):
    n = ks.shape[0]
    if s <= ks[0]:
        return vs[0]
    if s >= ks[n - 1]:
        return vs[n - 1]
    lo = 0
    hi = n - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ks[mid] <= s:
            lo = mid
        else:
            hi = mid
    w = (s - ks[lo]) / (ks[hi] - ks[lo])
    return vs[lo] * (1.0 - w) + vs[hi] * w


_table_interp = _maybe_njit(_table_interp_py)


def _mu_eval_impl(kind, p1, p2, p3, ks, vs, s):
    if kind == GROWTH_MONOD:
        return p1 * s / (p2 + s)
    if kind == GROWTH_HALDANE:
        return p1 * s / (p2 + s + s * s / p3)
    return _table_interp(ks, vs, s)


def _yield_eval_impl(kind, val, ks, vs, s):
    if kind == YIELD_CONSTANT:
        return val
    return _table_interp(ks, vs, s)


def _scalar_fn_impl(kind, coef, x):
    if kind == FN_ZERO:
        return 0.0
    if kind == FN_LINEAR:
        return coef * x
    return coef * x * x


_mu_eval = _maybe_njit(_mu_eval_impl)
_yield_eval = _maybe_njit(_yield_eval_impl)
_scalar_fn = _maybe_njit(_scalar_fn_impl)


def _chemostat_loop_py(
    h,
    n_steps,
    m,
    x0,
    s_full,
    mu_full,
    gkind,
    gp1,
    gp2,
    gp3,
    gks,
    gvs,
    ykind,
    yval,
    yks,
    yvs,
    s_i,
    b_mort,
    a_fb,
    d_s,
    s_s,
    p_kind,
    p_tau,
    p_lam,
    p_wts,
    p_del,
    p_ker,
    d_half,
    use_feedback,
    d_const,
):
    """Closed-loop biomass/substrate integration in the original
    coordinates.  s_full and mu_full must hold the initial history in
    their first m + 1 slots; both are filled in place.  Returns
    (x_arr, dil_arr, status, n_done)."""
    x_arr = np.zeros(n_steps + 1)
    dil_arr = np.zeros(n_steps + 1)
    x_arr[0] = x0
    status = STATUS_OK
    n_done = 0
    r_win = m * h

    for k in range(n_steps):
        i = m + k
        # window extremes of mu over the stored samples [t - r, t]
        base_lo = mu_full[i - m]
        base_hi = base_lo
        for j in range(i - m + 1, i + 1):
            v = mu_full[j]
            if v < base_lo:
                base_lo = v
            if v > base_hi:
                base_hi = v

        def s_lagged(tau, t_off, s_stage):
            # substrate at stage time minus tau, linear interpolation
            tgt = t_off - tau  # relative to the newest stored sample
            if tgt >= 0.0:
                if t_off <= 0.0:
                    return s_full[i]
                w = tgt / t_off
                return s_full[i] * (1.0 - w) + s_stage * w
            q = (r_win + tgt) / h
            if q <= 0.0:
                return s_full[i - m]
            j = int(q)
            if j >= m:
                return s_full[i]
            w = q - j
            return s_full[i - m + j] * (1.0 - w) + s_full[i - m + j + 1] * w

        def deriv(ci, x_c, s_c):
            mu_c = _mu_eval(gkind, gp1, gp2, gp3, gks, gvs, s_c)
            if m == 0:
                lo = mu_c
                hi = mu_c
            else:
                lo = base_lo if base_lo < mu_c else mu_c
                hi = base_hi if base_hi > mu_c else mu_c
            t_off = 0.5 * h * ci
            if m == 0:
                pv = mu_c
            elif p_kind == P_WINDOW_MIN:
                pv = lo
            elif p_kind == P_WINDOW_MAX:
                pv = hi
            elif p_kind == P_POINT_DELAY:
                pv = _mu_eval(gkind, gp1, gp2, gp3, gks, gvs, s_lagged(p_tau, t_off, s_c))
            else:
                pv = 0.0
                if p_lam > 0.0:
                    acc = 0.0
                    for jj in range(p_wts.shape[0]):
                        acc += p_wts[jj] * _mu_eval(
                            gkind, gp1, gp2, gp3, gks, gvs,
                            s_lagged(p_del[jj], t_off, s_c),
                        )
                    pv += p_lam * acc
                if p_lam < 1.0:
                    acc = 0.0
                    for jj in range(m):
                        acc += 0.5 * (
                            p_ker[jj] * mu_full[i - m + jj]
                            + p_ker[jj + 1] * mu_full[i - m + jj + 1]
                        )
                    pv += (1.0 - p_lam) * acc * h
            d_c = d_half[2 * k + ci]
            growth = (1.0 - d_c) * pv + d_c * hi
            k_c = _yield_eval(ykind, yval, yks, yvs, s_c)
            if use_feedback:
                s_min = s_c if s_c < s_s else s_s
                dil = (k_c * mu_c * x_c + a_fb * d_s * (s_s - s_min)) / (s_i - s_min)
            else:
                dil = d_const
            dx = (growth - dil - b_mort) * x_c
            ds = dil * (s_i - s_c) - k_c * mu_c * x_c
            return dx, ds, dil

        x_k = x_arr[k]
        s_k = s_full[i]
        dx1, ds1, dil1 = deriv(0, x_k, s_k)
        dx2, ds2, _ = deriv(1, x_k + 0.5 * h * dx1, s_k + 0.5 * h * ds1)
        dx3, ds3, _ = deriv(1, x_k + 0.5 * h * dx2, s_k + 0.5 * h * ds2)
        dx4, ds4, _ = deriv(2, x_k + h * dx3, s_k + h * ds3)
        x_new = x_k + (h / 6.0) * (dx1 + 2.0 * dx2 + 2.0 * dx3 + dx4)
        s_new = s_k + (h / 6.0) * (ds1 + 2.0 * ds2 + 2.0 * ds3 + ds4)
        dil_arr[k] = dil1

        if (
            not (math.isfinite(x_new) and math.isfinite(s_new))
            or abs(x_new) > _LIMIT
            or abs(s_new) > _LIMIT
        ):
            status = STATUS_DIVERGED
            n_done = k
            break
        if x_new <= 0.0 or s_new <= 0.0 or s_new >= s_i:
            status = STATUS_CONSTRAINT
            n_done = k
            break

        x_arr[k + 1] = x_new
        s_full[i + 1] = s_new
        mu_full[i + 1] = _mu_eval(gkind, gp1, gp2, gp3, gks, gvs, s_new)
        n_done = k + 1

    if status == STATUS_OK:
        x_f = x_arr[n_steps]
        s_f = s_full[m + n_steps]
        mu_f = _mu_eval(gkind, gp1, gp2, gp3, gks, gvs, s_f)
        k_f = _yield_eval(ykind, yval, yks, yvs, s_f)
        if use_feedback:
            s_min = s_f if s_f < s_s else s_s
            dil_arr[n_steps] = (k_f * mu_f * x_f + a_fb * d_s * (s_s - s_min)) / (
                s_i - s_min
            )
        else:
            dil_arr[n_steps] = d_const
    return x_arr, dil_arr, status, n_done


def _transformed_loop_py(
    h,
    n_steps,
    m,
    xc0,
    y_full,
    s_full,
    mu_full,
    gkind,
    gp1,
    gp2,
    gp3,
    gks,
    gvs,
    ykind,
    yval,
    yks,
    yvs,
    s_i,
    b_mort,
    a_fb,
    d_s,
    x_s_eq,
    g_big,
    p_kind,
    p_tau,
    p_lam,
    p_wts,
    p_del,
    p_ker,
    d_half,
):
    """Closed-loop integration in the transformed plane coordinates.

    The growth channel is evaluated through the substrate images of the
    y-history (same interpolation rules as the original loop), so the
    two loops are exact pushforwards of each other.  Returns
    (x_arr, u_arr, status, n_done)."""
    x_arr = np.zeros(n_steps + 1)
    u_arr = np.zeros(n_steps + 1)
    x_arr[0] = xc0
    status = STATUS_OK
    n_done = 0
    r_win = m * h

    def s_of_y(y):
        ey = math.exp(y)
        return s_i * ey / (g_big + ey)

    def u_feedback(x_c, y_c):
        ey = math.exp(y_c)
        s_c = s_i * ey / (g_big + ey)
        mu_c = _mu_eval(gkind, gp1, gp2, gp3, gks, gvs, s_c)
        k_c = _yield_eval(ykind, yval, yks, yvs, s_c)
        g_y = x_s_eq * k_c * mu_c / (d_s * s_i * g_big)
        cap = g_big + ey if ey < 1.0 else g_big + 1.0
        lift = 1.0 - ey if ey < 1.0 else 0.0
        return math.log(g_y * math.exp(x_c) * cap + a_fb / (g_big + 1.0) * lift)

    for k in range(n_steps):
        i = m + k
        base_lo = mu_full[i - m]
        base_hi = base_lo
        for j in range(i - m + 1, i + 1):
            v = mu_full[j]
            if v < base_lo:
                base_lo = v
            if v > base_hi:
                base_hi = v

        def s_lagged(tau, t_off, s_stage):
            tgt = t_off - tau
            if tgt >= 0.0:
                if t_off <= 0.0:
                    return s_full[i]
                w = tgt / t_off
                return s_full[i] * (1.0 - w) + s_stage * w
            q = (r_win + tgt) / h
            if q <= 0.0:
                return s_full[i - m]
            j = int(q)
            if j >= m:
                return s_full[i]
            w = q - j
            return s_full[i - m + j] * (1.0 - w) + s_full[i - m + j + 1] * w

        def deriv(ci, x_c, y_c):
            if abs(x_c) > _LOG_LIMIT or abs(y_c) > _LOG_LIMIT:
                return np.nan, np.nan
            ey = math.exp(y_c)
            s_c = s_i * ey / (g_big + ey)
            mu_c = _mu_eval(gkind, gp1, gp2, gp3, gks, gvs, s_c)
            if m == 0:
                lo = mu_c
                hi = mu_c
            else:
                lo = base_lo if base_lo < mu_c else mu_c
                hi = base_hi if base_hi > mu_c else mu_c
            t_off = 0.5 * h * ci
            if m == 0:
                pv = mu_c
            elif p_kind == P_WINDOW_MIN:
                pv = lo
            elif p_kind == P_WINDOW_MAX:
                pv = hi
            elif p_kind == P_POINT_DELAY:
                pv = _mu_eval(gkind, gp1, gp2, gp3, gks, gvs, s_lagged(p_tau, t_off, s_c))
            else:
                pv = 0.0
                if p_lam > 0.0:
                    acc = 0.0
                    for jj in range(p_wts.shape[0]):
                        acc += p_wts[jj] * _mu_eval(
                            gkind, gp1, gp2, gp3, gks, gvs,
                            s_lagged(p_del[jj], t_off, s_c),
                        )
                    pv += p_lam * acc
                if p_lam < 1.0:
                    acc = 0.0
                    for jj in range(m):
                        acc += 0.5 * (
                            p_ker[jj] * mu_full[i - m + jj]
                            + p_ker[jj + 1] * mu_full[i - m + jj + 1]
                        )
                    pv += (1.0 - p_lam) * acc * h
            d_c = d_half[2 * k + ci]
            growth = (1.0 - d_c) * pv + d_c * hi
            k_c = _yield_eval(ykind, yval, yks, yvs, s_c)
            g_y = x_s_eq * k_c * mu_c / (d_s * s_i * g_big)
            cap = g_big + ey if ey < 1.0 else g_big + 1.0
            lift = 1.0 - ey if ey < 1.0 else 0.0
            eu = g_y * math.exp(x_c) * cap + a_fb / (g_big + 1.0) * lift
            dx = growth - d_s * eu - b_mort
            dy = d_s * (g_big / ey + 1.0) * (eu - (g_big + ey) * g_y * math.exp(x_c))
            return dx, dy

        x_k = x_arr[k]
        y_k = y_full[i]
        dx1, dy1 = deriv(0, x_k, y_k)
        dx2, dy2 = deriv(1, x_k + 0.5 * h * dx1, y_k + 0.5 * h * dy1)
        dx3, dy3 = deriv(1, x_k + 0.5 * h * dx2, y_k + 0.5 * h * dy2)
        dx4, dy4 = deriv(2, x_k + h * dx3, y_k + h * dy3)
        x_new = x_k + (h / 6.0) * (dx1 + 2.0 * dx2 + 2.0 * dx3 + dx4)
        y_new = y_k + (h / 6.0) * (dy1 + 2.0 * dy2 + 2.0 * dy3 + dy4)
        u_arr[k] = u_feedback(x_k, y_k)

        if (
            not (math.isfinite(x_new) and math.isfinite(y_new))
            or abs(x_new) > _LOG_LIMIT
            or abs(y_new) > _LOG_LIMIT
        ):
            status = STATUS_DIVERGED
            n_done = k
            break

        x_arr[k + 1] = x_new
        y_full[i + 1] = y_new
        s_new = s_of_y(y_new)
        s_full[i + 1] = s_new
        mu_full[i + 1] = _mu_eval(gkind, gp1, gp2, gp3, gks, gvs, s_new)
        n_done = k + 1

    if status == STATUS_OK:
        u_arr[n_steps] = u_feedback(x_arr[n_steps], y_full[m + n_steps])
    return x_arr, u_arr, status, n_done


def _ex31_comparison_loop_py(v0, w0, h, n_steps):
    """Worst-case comparison pair on the nonnegative quadrant."""
    vs = np.zeros(n_steps + 1)
    ws = np.zeros(n_steps + 1)
    vs[0] = v0
    ws[0] = w0
    status = STATUS_OK
    n_done = 0
    for k in range(n_steps):
        v = vs[k]
        w = ws[k]

        def deriv(v_c, w_c):
            dv = -2.0 * v_c / (1.0 + v_c) + w_c / ((1.0 + v_c) * (1.0 + w_c))
            dw = -2.0 * w_c / (1.0 + w_c) + v_c
            return dv, dw

        dv1, dw1 = deriv(v, w)
        dv2, dw2 = deriv(v + 0.5 * h * dv1, w + 0.5 * h * dw1)
        dv3, dw3 = deriv(v + 0.5 * h * dv2, w + 0.5 * h * dw2)
        dv4, dw4 = deriv(v + h * dv3, w + h * dw3)
        v_new = v + (h / 6.0) * (dv1 + 2.0 * dv2 + 2.0 * dv3 + dv4)
        w_new = w + (h / 6.0) * (dw1 + 2.0 * dw2 + 2.0 * dw3 + dw4)
        if not (math.isfinite(v_new) and math.isfinite(w_new)) or abs(v_new) > _LIMIT:
            status = STATUS_DIVERGED
            n_done = k
            break
        vs[k + 1] = v_new
        ws[k + 1] = w_new
        n_done = k + 1
    return vs, ws, status, n_done


def _ex31_concrete_loop_py(x0, y0, d_half, h, n_steps):
    """Concrete certified planar instance under disturbance d in [-1, 1]."""
    xs = np.zeros(n_steps + 1)
    ys = np.zeros(n_steps + 1)
    xs[0] = x0
    ys[0] = y0
    status = STATUS_OK
    n_done = 0
    for k in range(n_steps):
        x = xs[k]
        y = ys[k]

        def deriv(ci, x_c, y_c):
            d_c = d_half[2 * k + ci]
            x2 = x_c * x_c
            y2 = y_c * y_c
            fx = -x_c / (1.0 + x2) + d_c * x_c * y2 / (
                2.0 * (1.0 + x2) * (1.0 + x2) * (1.0 + y2)
            )
            fy = -y_c / (1.0 + y2) + d_c * y_c * x2 / (2.0 * (1.0 + y2))
            return fx, fy

        dx1, dy1 = deriv(0, x, y)
        dx2, dy2 = deriv(1, x + 0.5 * h * dx1, y + 0.5 * h * dy1)
        dx3, dy3 = deriv(1, x + 0.5 * h * dx2, y + 0.5 * h * dy2)
        dx4, dy4 = deriv(2, x + h * dx3, y + h * dy3)
        x_new = x + (h / 6.0) * (dx1 + 2.0 * dx2 + 2.0 * dx3 + dx4)
        y_new = y + (h / 6.0) * (dy1 + 2.0 * dy2 + 2.0 * dy3 + dy4)
        if not (math.isfinite(x_new) and math.isfinite(y_new)) or abs(x_new) > _LIMIT:
            status = STATUS_DIVERGED
            n_done = k
            break
        xs[k + 1] = x_new
        ys[k + 1] = y_new
        n_done = k + 1
    return xs, ys, status, n_done


def _ex32_loop_py(times, ev_flags, x0, y0, m_gain, fkind, fcoef, gkind, gcoef):
    """Sampled-data planar loop on a precomputed, event-aligned grid.

    ev_flags[j] = 1 marks a sampling instant: the held control value is
    refreshed from the state at that sample before stepping on.
    """
    n = times.shape[0]
    xs = np.zeros(n)
    ys = np.zeros(n)
    us = np.zeros(n)
    xs[0] = x0
    ys[0] = y0
    y_held = y0
    status = STATUS_OK
    n_done = 0
    for j in range(n - 1):
        if ev_flags[j] == 1:
            y_held = ys[j]
        us[j] = -m_gain * y_held
        dt = times[j + 1] - times[j]
        x = xs[j]
        y = ys[j]

        def deriv(x_c, y_c):
            dx = -(1.0 + y_c * y_c) * x_c + y_c
            dy = (
                -m_gain * y_held
                + _scalar_fn(fkind, fcoef, x_c)
                + _scalar_fn(gkind, gcoef, x_c) * y_c
            )
            return dx, dy

        dx1, dy1 = deriv(x, y)
        dx2, dy2 = deriv(x + 0.5 * dt * dx1, y + 0.5 * dt * dy1)
        dx3, dy3 = deriv(x + 0.5 * dt * dx2, y + 0.5 * dt * dy2)
        dx4, dy4 = deriv(x + dt * dx3, y + dt * dy3)
        x_new = x + (dt / 6.0) * (dx1 + 2.0 * dx2 + 2.0 * dx3 + dx4)
        y_new = y + (dt / 6.0) * (dy1 + 2.0 * dy2 + 2.0 * dy3 + dy4)
        if (
            not (math.isfinite(x_new) and math.isfinite(y_new))
            or abs(x_new) > _LIMIT
            or abs(y_new) > _LIMIT
        ):
            status = STATUS_DIVERGED
            n_done = j
            break
        xs[j + 1] = x_new
        ys[j + 1] = y_new
        n_done = j + 1
    if status == STATUS_OK and n >= 1:
        if ev_flags[n - 1] == 1:
            y_held = ys[n - 1]
        us[n - 1] = -m_gain * y_held
    return xs, ys, us, status, n_done


chemostat_loop = _maybe_njit(_chemostat_loop_py)
transformed_loop = _maybe_njit(_transformed_loop_py)
ex31_comparison_loop = _maybe_njit(_ex31_comparison_loop_py)
ex31_concrete_loop = _maybe_njit(_ex31_concrete_loop_py)
ex32_loop = _maybe_njit(_ex32_loop_py)
