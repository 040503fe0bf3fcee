"""Robustness to the utility shape: linear privacy charge instead of squared.

Under utility  -leak - weight * err^2  the mean protocol becomes plain
message averaging with a self-correction; this script shows the worked
feasible configuration, how growing per-client sample counts destroy
feasibility, the analogous optimization-setting check, and the numeric
verification of the decay recurrence driving the convergence rate.

Run: python demos/05_linear_leak_checks.py
"""

import numpy as np

from fedtrade import altutility
from fedtrade.allocation import NoiseAllocation
from fedtrade.dpsgd import SgdSetting

print("== Averaging mean protocol ==")
prefs = np.full(100, 100.0)
alloc = NoiseAllocation.from_noise_stds(np.ones(100), 1.0)
for n in (100, 10**4, 10**6):
    setting = altutility.AltMeanSetting(n_clients=100, n_samples=n, sigma=10.0, support_width=20.0)
    report = altutility.alt_mean_feasibility(setting, prefs, alloc)
    print(f"n={n:>8}: beneficial={report.beneficial}  worst residual={report.residuals.min():+.4f}")
print("(more local data means less to gain and a leak that shrinks too slowly)")

print("\n== Equal-weight optimization protocol ==")
base = SgdSetting(5, 1000, 5, 1.0, 0.2, 1.0, 1.0, 2.0)
for n_clients in (5, 10**6):
    setting = altutility.AltSgdSetting(
        base=SgdSetting(n_clients, 1000, 5, 1.0, 0.2, 1.0, 1.0, 2.0),
        var_const=1.0, var_slope=0.5, tail_const=1.0,
    )
    a = NoiseAllocation.from_noise_stds(np.full(n_clients, 2.0), 1.0)
    report = altutility.alt_sgd_feasibility(setting, np.full(n_clients, 1e4), a)
    print(f"N={n_clients:>7}: beneficial={report.beneficial}  worst residual={report.residuals.min():+.4f}")
print("(large populations dilute each client's noise out of the end model)")

print("\n== Decay recurrence bound ==")
report = altutility.chung_check(c=4, c1=1.0, n0=5, horizon=100000)
print(f"max violation of the closed-form bound: {report.max_violation:.2e} (constant K={report.bound_constant:.2f})")
print(f"n * b_n at the horizon: {report.final_scaled_value:.6f} -> approaches c1/(c-1) = {1/3:.6f}")
