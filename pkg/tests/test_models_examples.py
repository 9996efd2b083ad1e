import math

import numpy as np
import pytest

from smallgain.models import ex31, ex32
from smallgain.models.growth import GrowthModel, YieldModel


class TestGrowthModels:
    def test_monod_values(self):
        mu = GrowthModel.monod(1.0, 0.5)
        assert mu(0.0) == 0.0
        assert mu(2.0) == pytest.approx(0.8)
        assert mu.bound() == 1.0

    def test_haldane_peak(self):
        mu = GrowthModel.haldane(1.0, 0.5, 2.0)
        s_peak = math.sqrt(0.5 * 2.0)
        assert mu.bound() == pytest.approx(mu(s_peak))
        assert mu(s_peak - 0.1) < mu(s_peak)
        assert mu(s_peak + 0.1) < mu(s_peak)

    def test_table_interpolation(self):
        mu = GrowthModel.table([(0.0, 0.0), (1.0, 0.4), (10.0, 0.9)])
        assert mu(0.5) == pytest.approx(0.2)
        assert mu(10.0) == pytest.approx(0.9)

    def test_table_must_start_at_zero(self):
        with pytest.raises(ValueError):
            GrowthModel.table([(0.5, 0.1), (1.0, 0.4)])

    def test_min_on_shortcuts(self):
        monod = GrowthModel.monod(1.0, 0.5)
        assert monod.min_on(0.1, 10.0) == pytest.approx(monod(0.1), rel=1e-12)
        hald = GrowthModel.haldane(1.0, 0.5, 2.0)
        assert hald.min_on(0.2, 10.0) == pytest.approx(
            min(hald(0.2), hald(10.0)), rel=1e-6
        )

    def test_yield_models(self):
        k = YieldModel.constant(0.5)
        assert k(3.0) == 0.5
        kt = YieldModel.table([(0.0, 0.4), (10.0, 0.6)])
        assert kt(5.0) == pytest.approx(0.5)
        with pytest.raises(ValueError):
            YieldModel.constant(0.0)


class TestComparisonSystem:
    def test_origin_equilibrium(self):
        assert ex31.comparison_rhs(0.0, 0.0) == (0.0, 0.0)

    def test_axis_values(self):
        # hand arithmetic: -2/2 + 0 and -0 + 1
        assert ex31.comparison_rhs(1.0, 0.0) == pytest.approx((-1.0, 1.0))
        # 0 + 1/(1*2) and -2/2 + 0
        assert ex31.comparison_rhs(0.0, 1.0) == pytest.approx((0.5, -1.0))

    def test_quadrant_forward_invariant(self):
        for w in np.linspace(0.0, 20.0, 21):
            dv, _ = ex31.comparison_rhs(0.0, float(w))
            assert dv >= 0.0
        for v in np.linspace(0.0, 20.0, 21):
            _, dw = ex31.comparison_rhs(float(v), 0.0)
            assert dw >= 0.0

    def test_negative_state_rejected(self):
        with pytest.raises(ValueError):
            ex31.comparison_rhs(-0.1, 1.0)


class TestConcreteInstance:
    def test_origin_for_every_disturbance(self):
        for d in (-1.0, -0.2, 0.0, 0.7, 1.0):
            assert ex31.concrete_rhs(d, 0.0, 0.0) == (0.0, 0.0)

    def test_certification_grids_pass(self):
        worst_v, worst_w = ex31.certification_margins(n=200, box=10.0)
        assert worst_v <= 1e-12
        assert worst_w <= 1e-12

    def test_w_gain_shape(self):
        g = ex31.comparison_w_gain(0.5)
        assert g(0.0) == 0.0
        assert g(1.0) == pytest.approx(0.75 / 2.0)


class TestSampledConstants:
    def test_default_instance_constants(self):
        p_bound, q_bound, m, r = ex32.select_constants(
            ex32.ScalarFn("square"), ex32.ScalarFn("linear"), 0.5
        )
        a = ex32.REGION_RADIUS
        assert p_bound == pytest.approx(a, rel=1e-9)
        assert q_bound == pytest.approx(a, rel=1e-9)
        assert m == 60.0
        assert r == 0.005

    def test_resubstitution(self):
        p = ex32.default_instance(0.5)
        p_bound, q_bound, _, _ = ex32.select_constants(p.f, p.g, p.eps)
        left, right = ex32.check_constants(p, p_bound, q_bound)
        assert left and right

    def test_degenerate_functions(self):
        p_bound, q_bound, m, r = ex32.select_constants(
            ex32.ScalarFn("zero"), ex32.ScalarFn("zero"), 0.5
        )
        assert p_bound == 0.0 and q_bound == 0.0
        assert m >= 2.0
        assert 3.0 * m * r <= 1.0

    def test_gain_target_limit(self):
        with pytest.raises(ValueError):
            ex32.select_constants(
                ex32.ScalarFn("square"), ex32.ScalarFn("linear"), 0.8
            )
        with pytest.raises(ValueError):
            ex32.PlanarSampledParams(
                f=ex32.ScalarFn("zero"), g=ex32.ScalarFn("zero"),
                M=10.0, r=0.01, eps=0.8,
            )


class TestSampledRhs:
    def test_origin_with_zero_hold(self):
        p = ex32.default_instance(0.5)
        assert ex32.ex32_rhs(p, 0.0, 0.0, 0.0, 0.0) == (0.0, 0.0)

    def test_hand_values(self):
        p = ex32.default_instance(0.5)
        dx, dy = ex32.ex32_rhs(p, 0.0, 0.0, 1.0, 1.0)
        assert dx == pytest.approx(1.0)
        assert dy == pytest.approx(-60.0)

    def test_x_gain_curve(self):
        assert ex32.x_subsystem_gain(0.0) == 0.0
        s = 1.0
        assert ex32.x_subsystem_gain(s) == pytest.approx(
            math.sqrt(2.0) / math.sqrt(5.0)
        )
        # saturates below 1/sqrt(2) * ... the large-s limit
        assert ex32.x_subsystem_gain(1e9) == pytest.approx(
            math.sqrt(2.0) / 2.0, rel=1e-6
        )
