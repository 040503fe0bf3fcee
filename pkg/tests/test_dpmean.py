import math

import numpy as np
import pytest

from fedtrade.allocation import NoiseAllocation
from fedtrade.core import ClientPreference
from fedtrade import dpmean

# The flagship configuration used throughout: 5 clients, 100 samples of
# spread 10 on a width-20 support, giving unit local precision.
SETTING = dpmean.DpMeanSetting(n_clients=5, n_samples=100, sigma=10.0, support_width=20.0)
DERIVED = dpmean.derive(SETTING)
KAPPA = 0.868722460779754  # sqrt(2 ln(1.25e4)) / 5, high-precision evaluation
UNIT_PREFS = [ClientPreference(1.0) for _ in range(5)]


class TestDerive:
    def test_flagship_constants(self):
        assert DERIVED.local_precision == pytest.approx(1.0, rel=1e-15)
        assert DERIVED.privacy_strength == pytest.approx(KAPPA, rel=1e-12)

    def test_zero_support_width_limit(self):
        assert dpmean.gaussian_mechanism_strength(1, 0.0) == 0.0

    def test_strength_decreasing_in_samples(self):
        values = [dpmean.gaussian_mechanism_strength(n, 20.0) for n in (10, 100, 1000, 10000)]
        assert all(a > b for a, b in zip(values, values[1:]))


class TestErrLeak:
    def test_local_training_limit(self):
        alloc = NoiseAllocation.from_noise_stds([math.inf] * 5, 1.0)
        pair = dpmean.err_leak(SETTING, DERIVED, alloc, 0)
        assert pair.err == pytest.approx(1.0)
        assert pair.leak == 0.0

    def test_half_informative_messages(self):
        alloc = NoiseAllocation.from_informativeness([0.5] * 5, 1.0)
        pair = dpmean.err_leak(SETTING, DERIVED, alloc, 2)
        assert pair.err == pytest.approx(math.sqrt(1.0 / 3.0), rel=1e-12)
        assert alloc.noise_stds[2] == pytest.approx(1.0, rel=1e-12)
        assert pair.leak == pytest.approx(KAPPA, rel=1e-12)

    def test_single_client_error_ignores_own_noise(self):
        setting = dpmean.DpMeanSetting(1, 100, 10.0, 20.0)
        derived = dpmean.derive(setting)
        for beta in (0.0, 0.5, 1.0):
            alloc = NoiseAllocation.from_informativeness([beta], 1.0)
            assert dpmean.err_leak(setting, derived, alloc, 0).err == pytest.approx(1.0)

    def test_zero_noise_leaks_everything(self):
        alloc = NoiseAllocation.from_noise_stds([0.0, 1.0, 1.0, 1.0, 1.0], 1.0)
        assert math.isinf(dpmean.err_leak(SETTING, DERIVED, alloc, 0).leak)

    def test_index_out_of_range(self):
        alloc = NoiseAllocation.from_informativeness([0.5] * 5, 1.0)
        with pytest.raises(IndexError):
            dpmean.err_leak(SETTING, DERIVED, alloc, 5)

    def test_error_improves_with_others_informativeness(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            betas = rng.uniform(0, 0.9, size=5)
            k = int(rng.integers(1, 5))
            bumped = betas.copy()
            bumped[k] += 0.05
            a0 = NoiseAllocation.from_informativeness(betas, 1.0)
            a1 = NoiseAllocation.from_informativeness(bumped, 1.0)
            assert dpmean.err_leak(SETTING, DERIVED, a1, 0).err < dpmean.err_leak(SETTING, DERIVED, a0, 0).err

    def test_leak_decreases_with_own_noise(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            stds = rng.uniform(0.1, 3.0, size=5)
            bumped = stds.copy()
            bumped[0] += 0.1
            a0 = NoiseAllocation.from_noise_stds(stds, 1.0)
            a1 = NoiseAllocation.from_noise_stds(bumped, 1.0)
            assert dpmean.err_leak(SETTING, DERIVED, a1, 0).leak < dpmean.err_leak(SETTING, DERIVED, a0, 0).leak


class TestUtilities:
    def test_status_quo_is_zero_slack(self):
        alloc = NoiseAllocation.from_noise_stds([math.inf] * 5, 1.0)
        report = dpmean.utilities(SETTING, DERIVED, alloc, UNIT_PREFS)
        assert report.beneficial
        np.testing.assert_allclose(report.utilities, report.baselines)
        np.testing.assert_allclose(report.residuals, 0.0, atol=1e-15)

    def test_witness_family_scaled_is_feasible(self):
        zeta = dpmean.feasibility_coefficients(DERIVED, np.ones(5))
        alloc = NoiseAllocation.from_informativeness(zeta * 0.3, 1.0)
        report = dpmean.utilities(SETTING, DERIVED, alloc, UNIT_PREFS)
        assert report.beneficial
        assert np.all(report.residuals >= 0)
        # The residual column must match the direct utility difference.
        np.testing.assert_allclose(report.residuals, report.utilities - report.baselines, rtol=1e-9, atol=1e-12)

    def test_weak_preferences_block_every_symmetric_level(self):
        prefs = [ClientPreference(0.01) for _ in range(5)]
        zeta_sum = dpmean.feasibility_coefficients(DERIVED, np.full(5, 0.01)).sum()
        assert zeta_sum < 1
        for b in np.linspace(1e-4, 1 - 1e-4, 1000):
            alloc = NoiseAllocation.from_informativeness([b] * 5, 1.0)
            report = dpmean.utilities(SETTING, DERIVED, alloc, prefs)
            assert not report.beneficial

    def test_full_informativeness_is_minus_infinity(self):
        alloc = NoiseAllocation.from_informativeness([1.0, 0.5, 0.5, 0.5, 0.5], 1.0)
        report = dpmean.utilities(SETTING, DERIVED, alloc, UNIT_PREFS)
        assert report.utilities[0] == -math.inf
        assert 0 in report.violations


class TestExistence:
    def test_flagship_feasible(self):
        report = dpmean.existence(SETTING, DERIVED, UNIT_PREFS)
        assert report.feasible
        np.testing.assert_allclose(report.coefficients, 0.5699049017345891, rtol=1e-12)
        assert float(report.coefficients.sum()) == pytest.approx(2.8495245086729453, rel=1e-12)
        assert report.b_max == pytest.approx(0.6490642572273537, rel=1e-12)

    def test_witness_feasible_at_interval_endpoints(self):
        report = dpmean.existence(SETTING, DERIVED, UNIT_PREFS)
        weights = np.ones(5)
        for b in (report.b_max / 2, report.b_max):
            res = dpmean.participation_residuals(DERIVED, report.coefficients * b, weights)
            assert np.all(res >= -1e-12)
        rep = dpmean.utilities(
            SETTING, DERIVED, report.witness, UNIT_PREFS
        )
        assert rep.beneficial

    def test_zero_weights_infeasible(self):
        report = dpmean.existence(SETTING, DERIVED, np.zeros(5))
        assert not report.feasible
        np.testing.assert_array_equal(report.coefficients, 0.0)

    def test_boundary_sum_exactly_one_is_infeasible(self):
        setting = dpmean.DpMeanSetting(2, 100, 10.0, 20.0)
        derived = dpmean.derive(setting)
        lam = derived.privacy_strength**2 * derived.local_precision**2
        report = dpmean.existence(setting, derived, [ClientPreference(lam)] * 2)
        assert float(report.coefficients.sum()) == pytest.approx(1.0, rel=1e-15)
        assert not report.feasible


class TestSymmetricOptimum:
    def test_flagship_closed_form(self):
        opt = dpmean.symmetric_optimum(SETTING, DERIVED, 1.0)
        assert opt.profitable
        assert opt.alpha_sq == pytest.approx(3.8395638146344584, rel=1e-12)
        assert opt.gain == pytest.approx(0.25595777414884300, rel=1e-12)

    def test_matches_dense_grid_argmax(self):
        opt = dpmean.symmetric_optimum(SETTING, DERIVED, 1.0)
        grid = np.linspace(0.0, 1.0, 10**6 + 1)[:-1]
        values = dpmean.symmetric_gain(DERIVED, 5, 1.0, grid)
        best = int(np.argmax(values))
        assert abs(grid[best] - opt.beta) <= 1e-6
        assert values[best] == pytest.approx(opt.gain, rel=1e-9)

    def test_boundary_is_unprofitable(self):
        lam = DERIVED.privacy_strength**2 / 4.0  # (N-1) lam == kappa^2 rho^2
        opt = dpmean.symmetric_optimum(SETTING, DERIVED, lam)
        assert not opt.profitable and opt.beta == 0.0 and opt.gain == 0.0

    def test_noise_decreases_with_accuracy_weight(self):
        values = [dpmean.symmetric_optimum(SETTING, DERIVED, lam).alpha_sq for lam in (1.0, 2.0, 8.0, 64.0)]
        assert all(a > b for a, b in zip(values, values[1:]))

    def test_client_count_slope_sign(self):
        # Central difference of the optimal squared noise over the client
        # count matches the predicted sign expression.
        lam = 1.0
        kr = DERIVED.privacy_strength * DERIVED.local_precision
        for n in (3, 5, 12, 80):
            lo = dpmean.symmetric_optimum(dpmean.DpMeanSetting(n - 1, 100, 10.0, 20.0), DERIVED, lam).alpha_sq
            hi = dpmean.symmetric_optimum(dpmean.DpMeanSetting(n + 1, 100, 10.0, 20.0), DERIVED, lam).alpha_sq
            predicted = (n - 2) * math.sqrt(lam) - 2 * math.sqrt(n - 1) * kr
            if abs(predicted) > 1e-6:
                assert math.copysign(1.0, hi - lo) == math.copysign(1.0, predicted)


class TestMaximizeGamma:
    def test_large_equal_weights_families_agree(self):
        prefs = [ClientPreference(100.0)] * 5
        sym = dpmean.maximize_gamma(SETTING, DERIVED, prefs, "symmetric", 512)
        per = dpmean.maximize_gamma(SETTING, DERIVED, prefs, "personalized", 512)
        assert per.ratio >= sym.ratio
        assert per.ratio == pytest.approx(sym.ratio, abs=0.01)

    def test_zero_weights_give_zero_ratio(self):
        for family in dpmean.FAMILIES:
            assert dpmean.maximize_gamma(SETTING, DERIVED, np.zeros(5), family, 64).ratio == 0.0

    def test_heterogeneous_weights_favor_personalization(self):
        weights = np.array([0.1, 0.1, 0.1, 0.1, 50.0])
        sym = dpmean.maximize_gamma(SETTING, DERIVED, weights, "symmetric", 512)
        per = dpmean.maximize_gamma(SETTING, DERIVED, weights, "personalized", 512)
        assert per.ratio > sym.ratio

    def test_found_scale_is_feasible_and_next_is_not(self):
        found = dpmean.maximize_gamma(SETTING, DERIVED, UNIT_PREFS, "symmetric", 256)
        weights = np.ones(5)
        grid = np.linspace(0.0, 1.0, 256)[1:]
        res = dpmean.participation_residuals(DERIVED, grid[:, None] * np.ones(5)[None, :], weights)
        feasible = grid[(res >= 0).all(axis=1)]
        assert found.b_star == pytest.approx(feasible.max(), rel=1e-15)
