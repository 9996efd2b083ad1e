import math
from dataclasses import replace

import numpy as np
import pytest

from smallgain.gains import (
    KLFunction,
    LinearGain,
    MaxPreservingMap,
    ZeroGain,
    check_cyclic_small_gain,
)
from smallgain.models.chemostat import default_params
from smallgain.verify import (
    TrajectoryCheckSpec,
    check_ios_envelope,
    check_monotone_abs,
    check_small_gain_estimate,
    chemostat_gain_g1_g2,
    convergence_report,
    gamma21_gain_table,
    transient_entry_time,
    weighted_square_history,
)


class TestMonotoneAbs:
    def test_constant_series(self):
        times = np.linspace(0.0, 10.0, 101)
        rep = check_monotone_abs(times, np.full(101, 2.0), tol=1e-8)
        assert rep.passed
        assert rep.worst_residual == 0.0

    def test_decaying_with_initial_sup(self):
        times = np.linspace(0.0, 10.0, 101)
        vals = 3.0 * np.exp(-times)
        rep = check_monotone_abs(times, vals, tol=1e-8, init_sup=3.5)
        assert rep.passed

    def test_increasing_series_fails(self):
        times = np.linspace(0.0, 10.0, 101)
        rep = check_monotone_abs(times, 1.0 + 0.1 * times, tol=1e-8)
        assert not rep.passed
        assert rep.worst_residual == pytest.approx(1.0)
        assert rep.worst_time == pytest.approx(10.0)


class TestTransientEntry:
    def test_always_inside(self):
        times = np.linspace(0.0, 5.0, 51)
        assert transient_entry_time(times, np.ones(51, dtype=bool)) == 0.0

    def test_entry_after_transient(self):
        times = np.linspace(0.0, 5.0, 51)
        ok = times >= 2.0
        assert transient_entry_time(times, ok) == pytest.approx(2.0)

    def test_oscillating_never_settles(self):
        times = np.linspace(0.0, 5.0, 51)
        ok = (np.arange(51) % 2).astype(bool)
        ok[-1] = False
        assert transient_entry_time(times, ok) is None

    def test_idempotent_on_truncated_tail(self):
        times = np.linspace(0.0, 5.0, 51)
        ok = times >= 2.0
        xi = transient_entry_time(times, ok)
        keep = times >= xi
        assert transient_entry_time(times[keep], ok[keep]) == xi


def decaying_spec(v, gamma_map=None, rate=1.0):
    return TrajectoryCheckSpec(
        V=v,
        L=np.sum(v, axis=1),
        gamma_map=gamma_map or MaxPreservingMap.zero(v.shape[1]),
        sigma=KLFunction.exponential(scale=1.0, rate=rate),
        sigma_fit=True,
    )


class TestSmallGainEstimate:
    def test_equilibrium_run_zero_residual(self):
        times = np.linspace(0.0, 10.0, 101)
        v = np.zeros((101, 2))
        rep = check_small_gain_estimate(times, decaying_spec(v), 0.0)
        assert rep.passed
        assert rep.worst_residual <= 0.0

    def test_decaying_components_pass(self):
        times = np.linspace(0.0, 20.0, 201)
        v = np.column_stack([2.0 * np.exp(-times), 0.5 * np.exp(-0.8 * times)])
        rep = check_small_gain_estimate(times, decaying_spec(v, rate=0.5), 0.0)
        assert rep.passed

    def test_doubling_series_fails(self):
        """Negative control: growth with a silent map and a decaying
        envelope must be flagged."""
        times = np.linspace(0.0, 10.0, 101)
        v = np.column_stack([np.exp(0.07 * times), np.exp(0.07 * times)])
        rep = check_small_gain_estimate(times, decaying_spec(v), 0.0)
        assert not rep.passed
        assert rep.worst_residual > 0.1

    def test_gain_covered_component_needs_no_envelope(self):
        times = np.linspace(0.0, 10.0, 101)
        # component 1 sits forever under the gain of component 2's
        # running sup, so only component 2 leans on the envelope
        v = np.column_stack([np.full(101, 0.4), np.exp(-times)])
        gmap = MaxPreservingMap.from_rows(
            [[ZeroGain(), LinearGain(0.5)], [LinearGain(0.0), ZeroGain()]]
        )
        spec = TrajectoryCheckSpec(
            V=v, L=np.sum(v, axis=1), gamma_map=gmap,
            sigma=KLFunction.exponential(scale=1.0, rate=0.5), sigma_fit=True,
        )
        rep = check_small_gain_estimate(times, spec, 0.0)
        assert rep.passed

    def test_weakening_gains_preserves_pass(self):
        """Scaling the map up cannot turn a pass into a fail."""
        times = np.linspace(0.0, 20.0, 201)
        v = np.column_stack([2.0 * np.exp(-times), 0.5 * np.exp(-0.8 * times)])
        base = MaxPreservingMap.from_rows(
            [[ZeroGain(), LinearGain(0.2)], [LinearGain(0.2), ZeroGain()]]
        )
        stronger = MaxPreservingMap.from_rows(
            [[ZeroGain(), LinearGain(0.4)], [LinearGain(0.4), ZeroGain()]]
        )
        rep_a = check_small_gain_estimate(
            times, decaying_spec(v, base, rate=0.5), 0.0
        )
        rep_b = check_small_gain_estimate(
            times, decaying_spec(v, stronger, rate=0.5), 0.0
        )
        assert rep_a.passed
        assert rep_b.passed
        assert rep_b.worst_residual <= rep_a.worst_residual + 1e-15

    def test_out_of_range_start(self):
        times = np.linspace(0.0, 1.0, 11)
        v = np.zeros((11, 1))
        with pytest.raises(ValueError):
            check_small_gain_estimate(times, decaying_spec(v), 5.0)

    def test_input_channel_covers_floor(self):
        """With an input channel configured, a component may sit on the
        input-gain floor instead of decaying."""
        times = np.linspace(0.0, 20.0, 201)
        v = np.column_stack([
            np.maximum(2.0 * np.exp(-times), 0.3),
            np.exp(-0.8 * times),
        ])
        spec = TrajectoryCheckSpec(
            V=v, L=np.sum(v, axis=1),
            gamma_map=MaxPreservingMap.zero(2),
            sigma=KLFunction.exponential(scale=1.0, rate=0.5),
            sigma_fit=True,
            zeta=LinearGain(0.5),
            input_sup=np.full(201, 0.6),
        )
        rep = check_small_gain_estimate(times, spec, 0.0)
        assert rep.passed
        # without the input channel the floor breaks the estimate
        bare = TrajectoryCheckSpec(
            V=v, L=np.sum(v, axis=1),
            gamma_map=MaxPreservingMap.zero(2),
            sigma=KLFunction.exponential(scale=1.0, rate=0.5),
            sigma_fit=True,
        )
        assert not check_small_gain_estimate(times, bare, 0.0).passed


class TestIosEnvelope:
    def test_zero_state_zero_input(self):
        times = np.linspace(0.0, 5.0, 51)
        rep = check_ios_envelope(
            times, np.zeros(51), 0.0, KLFunction.exponential(), 1.0,
            None, None,
        )
        assert rep.passed

    def test_max_combine_with_gain_floor(self):
        times = np.linspace(0.0, 30.0, 301)
        out = np.maximum(2.0 * np.exp(-0.5 * times), 0.3)
        gain = LinearGain(0.5)
        inputs = np.full(301, 0.6)
        rep = check_ios_envelope(
            times, out, 2.0, KLFunction.exponential(scale=1.0, rate=0.3), 1.0,
            gain, inputs, combine="max",
        )
        assert rep.passed

    def test_doubling_beta_only_helps(self):
        times = np.linspace(0.0, 10.0, 101)
        out = 3.0 * np.exp(-0.05 * times)
        args = dict(
            times=times, output=out, x0_norm=1.0,
            sigma=KLFunction.exponential(scale=1.0, rate=0.2),
            gamma=None, input_series=None, fit=False,
        )
        rep1 = check_ios_envelope(beta=1.0, **args)
        rep2 = check_ios_envelope(beta=20.0, **args)
        assert rep2.worst_residual <= rep1.worst_residual
        assert (not rep1.passed) and rep2.passed

    def test_violating_series_fails(self):
        times = np.linspace(0.0, 10.0, 101)
        rep = check_ios_envelope(
            times, np.exp(0.2 * times), 1.0,
            KLFunction.exponential(), 1.0, None, None,
        )
        assert not rep.passed


class TestChemostatGainPair:
    def test_values_at_zero(self):
        p = default_params(r=5.0)
        g1, g2, gamma21 = chemostat_gain_g1_g2(p, 0.1, 0.1, 0.0)
        assert g1 == pytest.approx(1.0, rel=1e-12)
        assert g2 == pytest.approx(1.0, rel=1e-12)
        assert gamma21 == 0.0

    def test_monotone_per_sample(self):
        p = default_params(r=5.0)
        ss = np.linspace(0.0, 8.0, 33)
        vals = [chemostat_gain_g1_g2(p, 0.1, 0.1, float(s))[2] for s in ss]
        assert all(b >= a - 1e-10 for a, b in zip(vals, vals[1:]))

    def test_table_gain_continuous_and_zero_at_zero(self):
        p = default_params(r=5.0)
        g = gamma21_gain_table(p, 0.1, 0.1, s_max=10.0, n_knots=61)
        assert g(0.0) == 0.0
        # continuity on the sampled domain: small steps, small increments
        prev = 0.0
        for s in np.linspace(0.0, 10.0, 400):
            v = g(float(s))
            assert v >= prev - 1e-12
            prev = v

    def test_cycle_with_small_linear_partner(self):
        p = default_params(r=5.0)
        gamma21 = gamma21_gain_table(p, 0.1, 0.1, s_max=10.0)
        gmap = MaxPreservingMap.from_rows(
            [[ZeroGain(), LinearGain(0.001)], [gamma21, ZeroGain()]]
        )
        grid = np.geomspace(1e-6, 10.0, 60)
        rep = check_cyclic_small_gain(gmap, grid)
        assert rep.satisfied
        assert rep.margin > 0.0

    def test_domain_exhaustion_reported(self):
        # an inadmissible feedback constant (far beyond the supremum)
        # exhausts the descent denominator at large window radii
        p = replace(default_params(r=5.0), a=5.0)
        with pytest.raises(ValueError, match="out of domain"):
            chemostat_gain_g1_g2(p, 0.1, 0.1, 9.0)


class TestConvergenceReport:
    def test_equilibrium_start(self):
        times = np.linspace(0.0, 10.0, 101)
        states = np.tile([1.0, 2.0], (101, 1))
        rep = convergence_report(times, states, np.array([1.0, 2.0]), 1e-3, 0.2)
        assert rep.passed
        assert rep.details["settling_time"] == 0.0

    def test_settling_time_detection(self):
        times = np.linspace(0.0, 100.0, 1001)
        dist = np.exp(-0.2 * times)
        states = np.column_stack([1.0 + dist, np.full(1001, 2.0)])
        rep = convergence_report(times, states, np.array([1.0, 2.0]), 1e-3, 0.2)
        assert rep.passed
        # distance is measured relative to the target norm sqrt(5)
        expected = math.log(1.0 / (math.sqrt(5.0) * 1e-3)) / 0.2
        assert rep.details["settling_time"] == pytest.approx(expected, abs=0.5)

    def test_oscillation_fails(self):
        times = np.linspace(0.0, 100.0, 1001)
        states = np.column_stack([np.sin(times), np.cos(times)])
        rep = convergence_report(times, states, np.zeros(2), 1e-3, 0.2)
        assert not rep.passed

    def test_zero_target_uses_plain_norm(self):
        times = np.linspace(0.0, 10.0, 101)
        states = np.column_stack([np.full(101, 1e-4), np.zeros(101)])
        rep = convergence_report(times, states, np.zeros(2), 1e-3, 0.5)
        assert rep.passed


class TestWeightedSquareHistory:
    def test_constant_series(self):
        y = np.full(20, 2.0)
        v = weighted_square_history(y, m=4, h=0.5, weight_rate=0.1)
        assert v.shape == (16,)
        assert np.allclose(v, 4.0)

    def test_window_max_with_weights(self):
        # a single spike decays through the window by the weight factor
        m, h, rate = 4, 1.0, 0.25
        y = np.zeros(10)
        y[3] = 2.0
        v = weighted_square_history(y, m=m, h=h, weight_rate=rate)
        # at index i (trajectory time i), the spike sits at lag i + m - 3
        for i in range(len(v)):
            lag = (i + m) - 3
            if 0 <= lag <= m:
                assert v[i] == pytest.approx(4.0 * math.exp(-2 * rate * h * lag))
            else:
                assert v[i] == 0.0

    def test_transform_applied(self):
        y = np.linspace(0.5, 2.0, 12)
        v = weighted_square_history(y, m=2, h=1.0, weight_rate=0.0,
                                    transform=lambda t: 2.0 * t)
        assert v[-1] == pytest.approx((2.0 * y[-1]) ** 2)
