"""When does privacy-noised collaboration beat training alone?

Walks the DP mean-estimation analysis end to end: derived constants, the
error/leak evaluations of a concrete allocation, the exact feasibility test
with its witness family, and what happens when accuracy preferences are too
weak to sustain collaboration.

Run: python demos/01_feasibility_landscape.py
"""

import numpy as np

from fedtrade import dpmean
from fedtrade.allocation import NoiseAllocation
from fedtrade.core import ClientPreference

setting = dpmean.DpMeanSetting(n_clients=5, n_samples=100, sigma=10.0, support_width=20.0)
derived = dpmean.derive(setting)

print("== Setting ==")
print(f"clients={setting.n_clients}  samples/client={setting.n_samples}  "
      f"sigma={setting.sigma}  support width={setting.support_width}")
print(f"local precision rho = {derived.local_precision:.6f}")
print(f"privacy strength kappa = {derived.privacy_strength:.6f}  (leak_i <= kappa / alpha_i)")

print("\n== One allocation, all clients at half informativeness ==")
alloc = NoiseAllocation.from_informativeness([0.5] * 5, derived.local_precision)
for i in range(setting.n_clients):
    pair = dpmean.err_leak(setting, derived, alloc, i)
    print(f"client {i}: err={pair.err:.6f}  leak={pair.leak:.6f}  (alpha={alloc.noise_stds[i]:.4f})")

prefs = [ClientPreference(1.0) for _ in range(5)]
report = dpmean.utilities(setting, derived, alloc, prefs)
print(f"mutually beneficial? {report.beneficial}  "
      f"(worst residual {report.residuals.min():+.5f} -- equal weights of 1 are not enough here)")

print("\n== Exact existence test ==")
existence = dpmean.existence(setting, derived, prefs)
print(f"coefficient per client = {existence.coefficients[0]:.6f}, sum = {existence.coefficients.sum():.6f} > 1")
print(f"feasible: {existence.feasible}; witness family valid for scale b in (0, {existence.b_max:.6f}]")
witness_report = dpmean.utilities(setting, derived, existence.witness, prefs)
print(f"witness (midpoint) residuals: {np.array2string(witness_report.residuals, precision=5)}")

print("\n== Weak preferences kill collaboration ==")
weak = [ClientPreference(0.01) for _ in range(5)]
weak_existence = dpmean.existence(setting, derived, weak)
print(f"coefficient sum = {weak_existence.coefficients.sum():.4f} <= 1 -> feasible: {weak_existence.feasible}")

print("\n== Population growth restores it ==")
for n_clients in (5, 20, 80):
    s = dpmean.DpMeanSetting(n_clients, 100, 10.0, 20.0)
    e = dpmean.existence(s, dpmean.derive(s), [ClientPreference(0.3)] * n_clients)
    print(f"N={n_clients:3d}: coefficient sum = {e.coefficients.sum():7.4f} -> feasible: {e.feasible}")
