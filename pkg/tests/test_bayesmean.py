import math

import numpy as np
import pytest

from fedtrade.allocation import NoiseAllocation
from fedtrade.core import ClientPreference
from fedtrade import bayesmean

# Unit-precision playground: one sample of unit spread per client and a unit
# prior, so local and prior precision are both 1.
UNIT = bayesmean.BayesSetting(n_clients=5, n_samples=1, sigma=1.0, prior_precision=1.0)
PAIR = bayesmean.BayesSetting(n_clients=2, n_samples=1, sigma=1.0, prior_precision=1.0)


class TestErrLeak:
    def test_no_messages_no_leak(self):
        alloc = NoiseAllocation.from_noise_stds([math.inf] * 5, 1.0)
        pair = bayesmean.err_leak(UNIT, alloc, 0)
        assert pair.err == pytest.approx(math.sqrt(1.0 / 2.0), rel=1e-15)
        assert pair.leak == 0.0

    def test_half_informative_pair(self):
        alloc = NoiseAllocation.from_informativeness([0.5, 0.5], 1.0)
        pair = bayesmean.err_leak(PAIR, alloc, 0)
        assert pair.err == pytest.approx(0.6324555320336759, rel=1e-12)
        assert pair.leak**2 == pytest.approx(1.375, rel=1e-12)

    def test_raw_average_reveals_everything(self):
        alloc = NoiseAllocation.from_informativeness([1.0, 0.5], 1.0)
        pair = bayesmean.err_leak(PAIR, alloc, 0)
        assert pair.leak**2 == pytest.approx(2.0, rel=1e-12)  # 1/rho + 1/tau

    def test_leak_square_never_negative(self):
        rng = np.random.default_rng(0)
        for _ in range(300):
            n = int(rng.integers(1, 7))
            rho = 10 ** rng.uniform(-2, 2)
            tau = 10 ** rng.uniform(-2, 2)
            setting = bayesmean.BayesSetting(n, 1, 1.0 / math.sqrt(rho), tau)
            betas = rng.uniform(0, 1, size=n) * rho
            alloc = NoiseAllocation.from_informativeness(betas, rho)
            for i in range(n):
                assert bayesmean.err_leak(setting, alloc, i).leak >= 0.0

    def test_leak_monotone_in_everyones_informativeness(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            betas = rng.uniform(0.05, 0.8, size=5)
            alloc = NoiseAllocation.from_informativeness(betas, 1.0)
            base_leak = bayesmean.err_leak(UNIT, alloc, 0).leak
            base_err = bayesmean.err_leak(UNIT, alloc, 0).err
            for k in range(5):
                bumped = betas.copy()
                bumped[k] += 0.05
                up = NoiseAllocation.from_informativeness(bumped, 1.0)
                assert bayesmean.err_leak(UNIT, up, 0).leak >= base_leak - 1e-12
                if k != 0:
                    assert bayesmean.err_leak(UNIT, up, 0).err < base_err


class TestUtilities:
    def test_status_quo_exact(self):
        alloc = NoiseAllocation.from_noise_stds([math.inf] * 5, 1.0)
        prefs = [ClientPreference(3.0)] * 5
        report = bayesmean.utilities(UNIT, alloc, prefs)
        np.testing.assert_array_equal(report.utilities, report.baselines)
        assert report.beneficial

    def test_first_order_witness_direction_is_feasible(self):
        weights = np.full(5, 10.0)
        xi = bayesmean.first_order_coefficients(UNIT, weights)
        alloc = NoiseAllocation.from_informativeness(xi * 0.01, 1.0)
        report = bayesmean.utilities(UNIT, alloc, weights)
        assert report.beneficial
        assert np.all(report.residuals >= 0)

    def test_single_client_always_loses_by_sharing(self):
        solo = bayesmean.BayesSetting(1, 1, 1.0, 1.0)
        for beta in (0.01, 0.3, 0.9):
            alloc = NoiseAllocation.from_informativeness([beta], 1.0)
            report = bayesmean.utilities(solo, alloc, [ClientPreference(5.0)])
            assert report.violations == frozenset({0})


class TestFirstOrderExistence:
    def test_flagship_coefficients(self):
        weights = np.full(5, 10.0)
        xi = bayesmean.first_order_coefficients(UNIT, weights)
        np.testing.assert_allclose(xi, 3.0 / 11.0, rtol=1e-14)
        report = bayesmean.first_order_existence(UNIT, [ClientPreference(10.0)] * 5)
        assert report.feasible
        assert report.witness is not None
        res = bayesmean.participation_residuals(
            UNIT, report.witness.informativeness, weights
        )
        assert np.all(res >= 0)

    def test_threshold_weight_gives_zero_coefficient(self):
        # weight exactly (rho+tau)^2/tau^2 = 4 sits on the boundary.
        xi = bayesmean.first_order_coefficients(UNIT, np.full(5, 4.0))
        np.testing.assert_array_equal(xi, 0.0)
        report = bayesmean.first_order_existence(UNIT, [ClientPreference(4.0)] * 5)
        assert not report.feasible

    def test_single_negative_coefficient_vetoes(self):
        report = bayesmean.first_order_existence(
            UNIT, [ClientPreference(w) for w in (100.0, 100.0, 100.0, 100.0, 1.0)]
        )
        assert report.coefficients[-1] < 0
        assert not report.feasible

    def test_coefficients_stay_below_one(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            rho = 10 ** rng.uniform(-2, 2)
            tau = 10 ** rng.uniform(-2, 2)
            setting = bayesmean.BayesSetting(3, 1, 1.0 / math.sqrt(rho), tau)
            w = 10 ** rng.uniform(-3, 5, size=3)
            assert np.all(bayesmean.first_order_coefficients(setting, w) < 1.0)

    def test_residuals_hold_below_witness_scale_and_vanish(self):
        weights = np.full(5, 10.0)
        xi = bayesmean.first_order_coefficients(UNIT, weights)
        scales = 10.0 ** np.arange(-2, -9, -1)
        minima = []
        for b in scales:
            res = bayesmean.participation_residuals(UNIT, xi * b, weights)
            minima.append(res.min())
        b0_idx = next(i for i, v in enumerate(minima) if v >= 0)
        assert all(v >= 0 for v in minima[b0_idx:])
        res_tiny = bayesmean.participation_residuals(UNIT, xi * 1e-8, weights)
        assert np.max(np.abs(res_tiny)) <= 1e-6


class TestSymmetricOptimum:
    def test_below_lower_threshold_stays_out(self):
        opt = bayesmean.symmetric_optimum(UNIT, 2.0)  # threshold is 2.25
        assert opt.case == 5 and opt.beta_star == 0.0 and opt.gain == 0.0

    def test_above_both_thresholds_reveals_everything(self):
        opt = bayesmean.symmetric_optimum(UNIT, 10.0)  # thresholds 8 and 9
        assert opt.case == 1 and opt.beta_star == 1.0
        assert opt.gain == pytest.approx(4.0 / 3.0, rel=1e-12)
        assert opt.alpha_sq == 0.0

    def test_interior_window(self):
        opt = bayesmean.symmetric_optimum(UNIT, 8.5)
        assert opt.case == 3
        assert opt.beta_star == pytest.approx(0.9430838779252900, abs=1e-8)
        assert opt.gain == pytest.approx(0.8349420349289646, rel=1e-10)
        higher = bayesmean.symmetric_optimum(UNIT, 8.8)
        assert higher.beta_star >= opt.beta_star

    def test_classifier_matches_dense_grid(self):
        rng = np.random.default_rng(42)
        grid_points = 20001
        for _ in range(1000):
            n = int(rng.integers(2, 9))
            rho = 10 ** rng.uniform(-1, 1)
            tau = 10 ** rng.uniform(-1, 1)
            lam = 10 ** rng.uniform(-2, 4)
            setting = bayesmean.BayesSetting(n, 1, 1.0 / math.sqrt(rho), tau)
            opt = bayesmean.symmetric_optimum(setting, lam)
            assert opt.gain >= 0.0
            grid = np.linspace(0.0, rho, grid_points)
            values = bayesmean.symmetric_gain(setting, lam, grid)
            best = int(np.argmax(values))
            cell = rho / (grid_points - 1)
            assert abs(grid[best] - opt.beta_star) <= cell, (n, rho, tau, lam, opt)
            assert opt.gain >= values[best] - 1e-9 * max(1.0, abs(values[best]))

    def test_interior_optima_satisfy_cube_root_bound(self):
        rng = np.random.default_rng(9)
        seen = 0
        for _ in range(400):
            n = int(rng.integers(2, 9))
            rho = 10 ** rng.uniform(-1, 1)
            tau = 10 ** rng.uniform(-1, 1)
            # Aim between the always-profitable and full-disclosure
            # thresholds, where interior optima live, with some spill-over.
            lo = (n * rho**2 + 2 * rho * tau + tau**2) * (rho + tau) ** 2 / ((n - 1) * rho**2 * tau**2)
            hi = (n * rho + tau) ** 2 / ((n - 1) * rho**2)
            lam = (lo + rng.uniform(-0.2, 1.2) * max(hi - lo, 0.1 * lo)) if hi > lo else lo * rng.uniform(0.5, 2.0)
            if lam <= 0:
                continue
            setting = bayesmean.BayesSetting(n, 1, 1.0 / math.sqrt(rho), tau)
            opt = bayesmean.symmetric_optimum(setting, lam)
            if opt.case in (3, 4) and 0.0 < opt.beta_star < rho:
                seen += 1
                assert (n - 1) * opt.beta_star + tau >= (n - 1) ** (1.0 / 3.0) * rho - 1e-9
        assert seen > 20


class TestAsymptotics:
    def test_large_population_prediction(self):
        setting = bayesmean.BayesSetting(10**4, 1, 1.0, 1.0)
        pred = bayesmean.asymptotic_beta(setting, 5.0, "large_N")
        assert pred.collaborate is True
        assert pred.beta_approx == pytest.approx(0.02, rel=1e-12)
        assert pred.gain_approx == pytest.approx(1.5, rel=1e-12)
        exact = bayesmean.symmetric_optimum(setting, 5.0)
        assert exact.beta_star == pytest.approx(pred.beta_approx, rel=0.05)
        assert exact.gain == pytest.approx(pred.gain_approx, rel=0.05)

    def test_weak_preference_stays_out_in_the_limit(self):
        pred = bayesmean.asymptotic_beta(UNIT, 1.5, "large_N")  # threshold (rho+tau)/tau = 2
        assert pred.collaborate is False

    def test_boundary_is_undecided(self):
        pred = bayesmean.asymptotic_beta(UNIT, 2.0, "large_N")
        assert pred.collaborate is None

    def test_extreme_precision_regimes(self):
        sharp = bayesmean.BayesSetting(5, 1, 1e-3, 1.0)  # rho = 1e6
        assert bayesmean.asymptotic_beta(sharp, 50.0, "large_rho").collaborate is False
        assert bayesmean.symmetric_optimum(sharp, 50.0).beta_star == 0.0
        blunt = bayesmean.BayesSetting(5, 1, 1e3, 1.0)  # rho = 1e-6
        assert bayesmean.asymptotic_beta(blunt, 50.0, "small_rho").collaborate is False
        assert bayesmean.symmetric_optimum(blunt, 50.0).beta_star == 0.0

    def test_unknown_regime_rejected(self):
        with pytest.raises(ValueError):
            bayesmean.asymptotic_beta(UNIT, 5.0, "tiny_tau")


class TestMaximizeGamma:
    def test_all_negative_coefficients_collapse(self):
        weights = np.full(5, 0.5)  # below (rho+tau)^2/tau^2 = 4
        found = bayesmean.maximize_gamma(UNIT, weights, "personalized", 64)
        assert found.ratio == 0.0

    def test_families_reach_full_disclosure_for_huge_weights(self):
        weights = np.full(5, 1e4)
        sym = bayesmean.maximize_gamma(UNIT, weights, "symmetric", 512)
        per = bayesmean.maximize_gamma(UNIT, weights, "personalized", 512)
        assert sym.ratio == pytest.approx(1.0, abs=1e-10)
        assert per.ratio > 0.9
