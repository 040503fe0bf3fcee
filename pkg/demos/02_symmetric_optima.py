"""Closed-form symmetric optima versus brute numeric search, in all three settings.

For equal privacy preferences the best common noise level has a closed form
in each setting; this script prints the closed forms next to a dense-grid
argmax of the corresponding gain curve so the agreement is visible, and
walks the Bayesian five-case classifier across its thresholds.

Run: python demos/02_symmetric_optima.py
"""

import numpy as np

from fedtrade import bayesmean, dpmean, dpsgd
from fedtrade.core import ClientPreference


def grid_argmax(gain, lo, hi, skip_lo=False):
    grid = np.linspace(lo, hi, 200001)
    if skip_lo:
        grid = grid[1:-1]
    values = gain(grid)
    best = int(np.argmax(values))
    return grid[best], values[best]


print("== DP mean estimation ==")
setting = dpmean.DpMeanSetting(5, 100, 10.0, 20.0)
derived = dpmean.derive(setting)
opt = dpmean.symmetric_optimum(setting, derived, accuracy_weight=1.0)
b, v = grid_argmax(lambda x: dpmean.symmetric_gain(derived, 5, 1.0, x), 0.0, derived.local_precision * (1 - 1e-9))
print(f"closed form: beta*={opt.beta:.6f} alpha*^2={opt.alpha_sq:.6f} gain={opt.gain:.6f}")
print(f"grid argmax: beta ={b:.6f}                    gain={v:.6f}")

print("\n== DP stochastic optimization ==")
sgd_setting = dpsgd.SgdSetting(5, 1000, 10, 1.0, 0.1, 1.0, 1.0, 2.0)
sgd_derived = dpsgd.derive(sgd_setting, [ClientPreference(1.0)] * 5)
kr = sgd_derived.privacy_strength * sgd_derived.local_precision
lam = 4.0 * (4.0 * 5 * 0.1 * 10 * kr**2 / 16)  # four times the profitability boundary
opt = dpsgd.symmetric_optimum(sgd_derived, lam)
b, v = grid_argmax(lambda x: dpsgd.symmetric_gain(sgd_derived, lam, x),
                   0.0, sgd_derived.local_precision, skip_lo=True)
print(f"rounds T={sgd_derived.rounds:.4f}  batch={sgd_derived.batch_size:.4f}  kappa={sgd_derived.privacy_strength:.4f}")
print(f"closed form: beta*={opt.beta:.6f} alpha*^2={opt.alpha_sq:.8f} gain={opt.gain:.4f}")
print(f"grid argmax: beta ={b:.6f}                      gain={v:.4f}")

print("\n== Bayesian mean estimation: the five cases ==")
unit = bayesmean.BayesSetting(5, 1, 1.0, 1.0)
print("thresholds at rho=tau=1, N=5: stay-out below 2.25, always-in above 8, full disclosure at 9")
for lam in (2.0, 5.0, 8.5, 10.0):
    opt = bayesmean.symmetric_optimum(unit, lam)
    b, v = grid_argmax(lambda x: bayesmean.symmetric_gain(unit, lam, x), 0.0, 1.0)
    print(f"weight={lam:5.2f}: case {opt.case}  beta*={opt.beta_star:.6f} gain={opt.gain:.6f} "
          f"(grid: beta={b:.6f} gain={max(v, 0):.6f})")

print("\n== Large-population limit ==")
big = bayesmean.BayesSetting(10**4, 1, 1.0, 1.0)
pred = bayesmean.asymptotic_beta(big, 5.0, "large_N")
exact = bayesmean.symmetric_optimum(big, 5.0)
print(f"predicted beta ~ {pred.beta_approx:.6f}, exact {exact.beta_star:.6f}")
print(f"predicted gain ~ {pred.gain_approx:.6f}, exact {exact.gain:.6f}")
