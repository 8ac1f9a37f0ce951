import csv
import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import trapezoid

from analog_zne.ensemble import EnsembleSpec, NoisyEstimator, ensemble_average, noisy_expectation, sweep
from analog_zne.noise import Gaussian, PointMass, Thermal
from analog_zne.operators import all_down, build_rabi, p_up
from analog_zne.zne import (
    BoundReport,
    loocv_residual,
    loocv_select,
    richardson_extrapolate,
    richardson_weights,
    theorem1_bound,
    transpose,
    weighted_polyfit,
    write_bounds_csv,
    write_zne_csv,
    zne_series,
)

import oracles


def estimators(thetas, values, nus=None, t=0.0):
    nus = [0.0] * len(thetas) if nus is None else nus
    return [NoisyEstimator(th, float(v), float(nu), 1, t) for th, v, nu in zip(thetas, values, nus)]


node_sets = st.lists(st.floats(0.01, 1.0), min_size=2, max_size=6, unique=True).filter(
    lambda xs: min(abs(a - b) for i, a in enumerate(xs) for b in xs[i + 1 :]) > 0.02
)


class TestRichardsonWeights:
    def test_five_linear_nodes(self):
        g = richardson_weights(0.01 * np.array([1, 1.25, 1.5, 1.75, 2]))
        np.testing.assert_allclose(g, [70, -224, 280, -160, 35], rtol=1e-9)
        assert np.abs(g).sum() == pytest.approx(769, rel=1e-9)

    def test_ten_linear_nodes(self):
        g = richardson_weights(np.linspace(1, 2, 10))
        assert np.abs(g).sum() == pytest.approx(16807935, rel=1e-6)

    def test_exact_rational_oracle(self):
        exact = oracles.lagrange_weights_exact([Fraction(k, 9) for k in range(9, 19)])
        assert sum(abs(x) for x in exact) == 16807935
        exact5 = oracles.lagrange_weights_exact([Fraction(4 + k, 4) for k in range(5)])
        assert exact5 == [70, -224, 280, -160, 35]

    def test_pair(self):
        np.testing.assert_allclose(richardson_weights([0.3, 0.6]), [2, -1])

    def test_scale_invariant(self):
        np.testing.assert_allclose(richardson_weights([1, 2, 3]), richardson_weights([1e-4, 2e-4, 3e-4]))

    @pytest.mark.parametrize(
        "bad", [[0.1], [0.1, 0.1], [0.1, 0.1 + 1e-15], [0.0, 0.1], [-0.1, 0.2], [0.1, float("nan")]]
    )
    def test_rejects_bad_nodes(self, bad):
        with pytest.raises(ValueError):
            richardson_weights(bad)

    @given(node_sets)
    def test_moment_sum_rules(self, nodes):
        g = richardson_weights(nodes)
        th = np.asarray(nodes)
        assert g.sum() == pytest.approx(1.0, rel=1e-8)
        scale = np.abs(g).sum()
        for k in range(1, len(nodes)):
            assert abs(g @ th**k) <= 1e-8 * scale * th.max() ** k

    @given(node_sets, st.lists(st.floats(-2, 2), min_size=6, max_size=6))
    def test_polynomial_exactness(self, nodes, coeffs):
        r = len(nodes) - 1
        c = coeffs[: r + 1]
        values = np.polynomial.polynomial.polyval(np.asarray(nodes), c)
        res = richardson_extrapolate(estimators(nodes, values))
        scale = np.abs(richardson_weights(nodes)).sum() * max(1.0, np.abs(values).max())
        assert res.estimate == pytest.approx(c[0], abs=1e-9 * scale)


class TestRichardsonExtrapolate:
    def test_linear_two_points(self):
        res = richardson_extrapolate(estimators([0.2, 0.5], [1 + 3 * 0.2, 1 + 3 * 0.5]))
        assert res.estimate == pytest.approx(1.0, abs=1e-12)
        assert res.order == 1

    def test_constant(self):
        res = richardson_extrapolate(estimators([0.1, 0.2, 0.35, 0.5], [0.7] * 4))
        assert res.estimate == pytest.approx(0.7, abs=1e-12)

    def test_std_err_propagation(self):
        res = richardson_extrapolate(estimators([1.0, 2.0], [0.0, 0.0], [0.1, 0.2]))
        assert res.fit_std_err == pytest.approx(math.sqrt(4 * 0.01 + 0.04))

    def test_mismatched_times(self):
        es = [NoisyEstimator(0.1, 0.0, 0.0, 1, 0.0), NoisyEstimator(0.2, 0.0, 0.0, 1, 1.0)]
        with pytest.raises(ValueError):
            richardson_extrapolate(es)

    def test_gaussian_rabi_within_corollary_bound(self):
        wt = 2.0
        thetas = [0.01, 0.02, 0.03]
        values = [oracles.gaussian_rabi(wt, th) for th in thetas]
        res = richardson_extrapolate(estimators(thetas, values, t=wt))
        exact = math.sin(wt) ** 2
        rep = theorem1_bound(Gaussian(thetas[0]), wt, 1.0, 1.0, thetas)
        assert rep.remainder > 0
        assert abs(res.estimate - exact) <= rep.total


class TestWeightedPolyfit:
    def test_degree_zero_is_weighted_mean(self):
        v, nu = np.array([1.0, 2.0, 4.0]), np.array([0.1, 0.2, 0.4])
        res = weighted_polyfit([0.1, 0.2, 0.3], v, nu, 0)
        w = 1 / nu**2
        assert res.estimate == pytest.approx((w @ v) / w.sum())
        assert res.fit_std_err == pytest.approx(1 / math.sqrt(w.sum()))

    @given(node_sets, st.lists(st.floats(-1, 1), min_size=6, max_size=6))
    def test_interpolation_matches_richardson(self, nodes, vals):
        v = vals[: len(nodes)]
        nus = [0.01 * (1 + i) for i in range(len(nodes))]
        fit = weighted_polyfit(nodes, v, nus, len(nodes) - 1)
        rich = richardson_extrapolate(estimators(nodes, v, nus))
        scale = np.abs(richardson_weights(nodes)).sum()
        assert fit.estimate == pytest.approx(rich.estimate, abs=1e-9 * scale)
        assert fit.fit_std_err == pytest.approx(rich.fit_std_err, rel=1e-6)

    @given(st.lists(st.floats(-1, 1), min_size=3, max_size=3))
    def test_zero_linear_symmetric_data(self, c):
        th = np.array([0.1, 0.2, 0.3, 0.4, 0.5])
        v = c[0] + c[1] * th**2 + c[2] * th**4
        a = weighted_polyfit(th, v, None, 4, zero_linear=True)
        b = weighted_polyfit(th, v, None, 4, zero_linear=False)
        assert a.estimate == pytest.approx(b.estimate, abs=1e-9 * max(1, np.abs(v).max()) * 1e3)
        assert a.estimate == pytest.approx(c[0], abs=1e-9)

    def test_zero_linear_pins_coefficient(self):
        res = weighted_polyfit([0.1, 0.2, 0.3, 0.4], [1.0, 1.2, 1.1, 1.5], None, 2, zero_linear=True)
        assert res.coefficients[1] == 0.0
        assert res.zero_linear

    def test_unit_weights_scale_error_by_residuals(self):
        th = [0.1, 0.2, 0.3, 0.4]
        exact = weighted_polyfit(th, [1.0, 1.1, 1.2, 1.3], None, 1)
        assert exact.estimate == pytest.approx(0.9)
        assert exact.fit_std_err == pytest.approx(0.0, abs=1e-12)
        noisy = weighted_polyfit(th, [1.0, 1.15, 1.2, 1.3], None, 1)
        assert noisy.fit_std_err > 0

    def test_degree_too_high(self):
        with pytest.raises(ValueError):
            weighted_polyfit([0.1, 0.2], [1, 2], None, 2)

    def test_rank_deficient(self):
        with pytest.raises(np.linalg.LinAlgError):
            weighted_polyfit([0.1, 0.1, 0.1], [1, 2, 3], None, 1)

    def test_second_order_fit_covers_exact(self):
        # 600-trajectory Monte Carlo values at Omega t = 8.5; a degree-2 fit lands within its error bar
        t = 8.5
        models = [Gaussian(k * 0.0064) for k in (1, 2, 3, 4)]
        spec = EnsembleSpec(mode="monte_carlo", samples=600)
        hits = 0
        for seed in range(20):
            per_node = sweep(build_rabi(1.0), models, all_down(1), p_up(1, 1), [t], spec, seed=seed)
            group = transpose(per_node)[0]
            res = weighted_polyfit([e.theta for e in group], [e.value for e in group], [e.std_err for e in group], 2)
            hits += abs(res.estimate - math.sin(t) ** 2) <= 2 * res.fit_std_err
        assert hits >= 15


class TestLoocv:
    def test_quadratic_data_selects_two(self):
        th = np.array([0.1, 0.2, 0.3, 0.4, 0.5])
        data = [estimators(th, 0.5 + k * th - 3 * th**2, [0.01] * 5, t=float(k)) for k in range(6)]
        orders, raw, (slope, _) = loocv_select(data)
        assert raw == [2] * 6
        assert orders == [2] * 6
        assert slope == pytest.approx(0.0, abs=1e-12)

    def test_constant_noisy_data_prefers_zero(self):
        th = np.array([0.1, 0.2, 0.3, 0.4, 0.5])
        picks = []
        for seed in range(100):
            rng = np.random.default_rng(seed)
            v = 0.3 + 0.01 * rng.standard_normal(5)
            picks.append(loocv_select([estimators(th, v, [0.01] * 5)])[1][0])
        counts = np.bincount(picks)
        assert counts.argmax() == 0
        assert counts[0] > 50

    def test_tie_goes_to_lower_degree(self):
        # linear data: degrees 1, 2, 3 all reproduce left-out points exactly
        th = np.array([0.1, 0.2, 0.3, 0.4, 0.5])
        _, raw, _ = loocv_select([estimators(th, 1 + th, [0.01] * 5)])
        assert raw == [1]

    def test_unit_weights_when_errors_vanish(self):
        th = np.array([0.1, 0.2, 0.3, 0.4])
        y = np.array([1.0, 1.1, 1.3, 1.2])
        assert loocv_residual(th, y, np.zeros(4), 1) == pytest.approx(loocv_residual(th, y, np.ones(4), 1))

    def test_trend_is_ceiling_of_linear_fit(self):
        th = np.array([0.1, 0.2, 0.3, 0.4, 0.5])
        lin = [estimators(th, 1 + th, [0.01] * 5, t=0.0)]
        quad = [estimators(th, 1 + th**2 * 5, [0.01] * 5, t=1.0)]
        orders, raw, (slope, intercept) = loocv_select(lin + quad)
        assert raw == [1, 2]
        assert (slope, intercept) == pytest.approx((1.0, 1.0))
        assert orders == [1, 2]

    def test_clamped_to_max_degree(self):
        th = np.array([0.1, 0.2, 0.3, 0.4, 0.5])
        data = [estimators(th, 1 + k * th**3, [0.01] * 5, t=float(k)) for k in (0, 1, 2)]
        orders, _, _ = loocv_select(data, max_degree=1)
        assert max(orders) <= 1

    def test_needs_three_points(self):
        with pytest.raises(ValueError):
            loocv_select([estimators([0.1, 0.2], [1, 2])])

    def test_max_degree_too_large(self):
        with pytest.raises(ValueError):
            loocv_select([estimators([0.1, 0.2, 0.3], [1, 2, 3])], max_degree=2)

    def test_zero_linear_skips_degree_one(self):
        th = np.array([0.1, 0.2, 0.3, 0.4])
        _, raw, _ = loocv_select([estimators(th, 2 - th**2, [0.01] * 4)], zero_linear=True)
        assert raw == [2]


class TestBound:
    def test_point_mass_zero(self):
        rep = theorem1_bound(PointMass(0.0), 3.0, 1.0, 1.0, [0.0])
        assert rep.total == 0.0

    def test_projection_term(self):
        from scipy.special import erfinv

        rep = theorem1_bound(Gaussian(0.01), 0.0, 1.0, 1.0, [0.01, 0.02], [0.1, 0.1], epsilon=0.1)
        c = math.sqrt(2) * 0.1 * erfinv(0.9)
        assert rep.remainder == 0.0
        assert rep.projection == pytest.approx(3 * c)
        assert rep.total == pytest.approx(rep.remainder + rep.projection)

    def test_gaussian_corollary_form(self):
        t, v, th = 1.5, 2.0, [0.01, 0.02, 0.03]
        rep = theorem1_bound(Gaussian(0.01), t, v, 1.0, th)
        r = len(th) - 1
        dfact = math.prod(range(2 * r + 2, 0, -2))
        expect = [(s * (2 * t) ** 2 * v**2) ** (r + 1) / dfact for s in th]
        np.testing.assert_allclose(rep.node_remainders, expect)
        assert rep.remainder == pytest.approx(np.abs(richardson_weights(th)) @ expect)

    def test_thermal_short_time_form(self):
        # Thermal nodes use (nbar+1)^k k! so R = (2 (nbar+1) t |V|)^(r+1)
        nbar, t = 2.0, 0.05
        thetas = [nbar, 2 * nbar]
        rep = theorem1_bound(Thermal(nbar, 1.0), t, 1.0, 1.0, thetas)
        for th, r_i in zip(thetas, rep.node_remainders):
            assert r_i == pytest.approx((2 * (th + 1) * t) ** 2)

    def test_thermal_remainder_decreases_in_order_iff_short_time(self):
        nbar = 3.0
        m = Thermal(nbar, 1.0)

        def node_r(t, order):
            thetas = [nbar * (1 + 0.1 * k) for k in range(order)]
            return theorem1_bound(m, t, 1.0, 1.0, thetas).node_remainders[0]

        short = 0.9 / (2 * (nbar + 1))
        long = 1.1 / (2 * (nbar + 1))
        assert node_r(short, 3) < node_r(short, 2) < node_r(short, 1)
        assert node_r(long, 3) > node_r(long, 2) > node_r(long, 1)

    @given(st.floats(1e-4, 10.0))
    def test_gaussian_remainder_decreases_in_order(self, x):
        # fixed sigma^2 (2t)^2 |V|^2 = x, orders beyond x/2 decrease monotonically
        vals = [x ** (r + 1) / math.prod(range(2 * r + 2, 0, -2)) for r in range(30)]
        start = int(x)
        assert all(b <= a for a, b in zip(vals[start:], vals[start + 1 :]))
        rep = theorem1_bound(Gaussian(0.01), 1.0, math.sqrt(x / 0.04), 1.0, [0.01, 0.02])
        assert rep.node_remainders[0] == pytest.approx(vals[1])

    def test_epsilon_range(self):
        with pytest.raises(ValueError):
            theorem1_bound(Gaussian(0.01), 1.0, 1.0, 1.0, [0.01, 0.02], epsilon=1.0)

    def test_bound_validity_random_instances(self):
        from analog_zne.operators import HamiltonianPair, OperatorSum, PauliString

        rng = np.random.default_rng(2024)
        for case in range(50):
            L = int(rng.integers(1, 3))
            letters = ["".join(p) for p in itertools.product("IXYZ", repeat=L)][1:]
            h0 = OperatorSum([PauliString(s, float(rng.normal())) for s in letters])
            v = OperatorSum([PauliString(s, float(rng.normal())) for s in letters])
            pair = HamiltonianPair(h0, v)
            obs = OperatorSum([PauliString(letters[int(rng.integers(len(letters)))], 1.0)])
            psi = np.zeros(2**L, dtype=complex)
            psi[int(rng.integers(2**L))] = 1.0
            t = float(rng.uniform(0.1, 2.0))
            r = int(rng.integers(1, 4))
            if case % 2 == 0:
                base = Gaussian(float(rng.uniform(0.001, 0.02)))
            else:
                base = Thermal(float(rng.uniform(0.5, 5.0)), float(rng.uniform(0.001, 0.02)))
            thetas = [base.theta * (1 + 0.5 * k) for k in range(r + 1)]
            ests = []
            for th in thetas:
                avg = ensemble_average(pair, base.with_theta(th), psi, obs, [t], EnsembleSpec(nodes=60))
                ests.append(NoisyEstimator(th, float(avg.mean[0]), 0.0, 1, t))
            exact = ensemble_average(pair, PointMass(0.0), psi, obs, [t], EnsembleSpec()).mean[0]
            rich = richardson_extrapolate(ests).estimate
            rep = theorem1_bound(base, t, v.spectral_norm(), obs.spectral_norm(), thetas)
            assert abs(rich - exact) <= rep.total + 1e-12 * np.abs(rep.weights).sum(), f"case {case}"


class TestSeries:
    def test_point_mass_series_is_noiseless(self):
        t = np.linspace(0, 5, 11)
        per_node = [
            noisy_expectation(build_rabi(1.0), PointMass(0.0), all_down(1), p_up(1, 1), t, EnsembleSpec())
            for _ in range(3)
        ]
        # relabel nodes at distinct thetas; all share the noiseless curve
        per_node = [[NoisyEstimator(0.1 * (i + 1), e.value, 0.0, 1, e.time) for e in node] for i, node in enumerate(per_node)]
        for method in ("richardson", "loocv"):
            res = zne_series(transpose(per_node), method=method)
            np.testing.assert_allclose([r.estimate for r in res], np.sin(t) ** 2, atol=1e-10)

    def test_rabi_zne_beats_lowest_node(self):
        t = np.linspace(0, 12, 121)
        models = [Gaussian(k * 0.0064) for k in (1, 2, 3, 4)]
        spec = EnsembleSpec(mode="monte_carlo", samples=600)
        per_node = sweep(build_rabi(1.0), models, all_down(1), p_up(1, 1), t, spec, seed=5)
        res = zne_series(transpose(per_node), method="loocv")
        exact = np.sin(t) ** 2
        zne_err = trapezoid(np.abs([r.estimate for r in res] - exact), t)
        base_err = trapezoid(np.abs([e.value for e in per_node[0]] - exact), t)
        assert zne_err < base_err

    def test_inconsistent_grids(self):
        a = estimators([0.1, 0.2, 0.3], [1, 1, 1], t=0.0)
        b = estimators([0.1, 0.2, 0.4], [1, 1, 1], t=1.0)
        with pytest.raises(ValueError):
            zne_series([a, b], method="richardson")

    def test_unknown_method(self):
        with pytest.raises(ValueError):
            zne_series([estimators([0.1, 0.2, 0.3], [1, 1, 1])], method="exponential")

    def test_least_squares_needs_degree(self):
        with pytest.raises(ValueError):
            zne_series([estimators([0.1, 0.2, 0.3], [1, 1, 1])], method="least_squares")

    def test_times_attached(self):
        data = [estimators([0.1, 0.2, 0.3], [1, 1, 1], [0.1] * 3, t=float(k)) for k in range(3)]
        res = zne_series(data, method="least_squares", degree=1)
        assert [r.time for r in res] == [0.0, 1.0, 2.0]


def test_zne_csv(tmp_path):
    data = [estimators([0.1, 0.2, 0.3], [1, 1.1, 1.2], [0.1] * 3, t=0.5)]
    res = zne_series(data, method="loocv", zero_linear=True)
    path = tmp_path / "zne.csv"
    write_zne_csv(path, res)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["time", "estimate", "fit_std_err", "order", "method"]
    assert rows[1][0] == "0.5"
    assert rows[1][4] == "loocv+zero_linear"


def test_bounds_csv(tmp_path):
    rep = BoundReport(0.1, 0.2, 0.3, 0.05)
    path = tmp_path / "b.csv"
    write_bounds_csv(path, [(1.0, 4, rep)], {"actual_error": [0.01]})
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["time", "theta_count", "R_total", "projection_total", "total", "epsilon", "actual_error"]
    assert rows[1] == ["1.0", "4", "0.1", "0.2", "0.3", "0.05", "0.01"]
