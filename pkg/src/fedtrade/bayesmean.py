"""Bayesian collaborative mean estimation with reconstruction-loss privacy.

The estimand is drawn from a known Gaussian prior and privacy is measured as
the root gap between the prior-only reconstruction error of a client's raw
points and the error of the best reconstruction an attacker can build from
the shared messages.  Closed forms below give the posterior accuracy, the
reconstruction leak, a first-order participation test around the
no-collaboration point, the symmetric optimum via a five-case shape analysis
of the gain curve, its large-population / extreme-precision asymptotics, and
the informativeness-maximizing grid search.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .allocation import NoiseAllocation
from .core import (
    ClientPreference,
    EvalPair,
    GammaSearchResult,
    ParticipationReport,
    accuracy_weights,
    scan_scaled_family,
)

FAMILIES = ("symmetric", "personalized")

# Absolute bisection tolerance on informativeness roots; the gain curve is a
# smooth rational function, so tight brackets are cheap.
_ROOT_TOL = 1e-10


@dataclass(frozen=True)
class BayesSetting:
    """Client count, per-client sample count, sample spread, and prior precision."""

    n_clients: int
    n_samples: int
    sigma: float
    prior_precision: float

    def __post_init__(self):
        if self.n_clients < 1 or self.n_samples < 1:
            raise ValueError("n_clients and n_samples must be >= 1")
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise ValueError(f"sigma must be finite and > 0, got {self.sigma}")
        if not (self.prior_precision > 0 and math.isfinite(self.prior_precision)):
            raise ValueError(f"prior_precision must be finite and > 0, got {self.prior_precision}")

    @property
    def local_precision(self) -> float:
        return self.n_samples / self.sigma**2


@dataclass
class FeasibilityReport:
    """First-order existence verdict with the deviation coefficients.

    Feasibility means a small common scaling of ``coefficients`` benefits
    everyone: all coefficients nonnegative and their sum above 1.  ``witness``
    realizes one such deviation (validated against the exact system);
    ``witness_scale`` is its scaling.
    """

    feasible: bool
    coefficients: np.ndarray
    witness: Optional[NoiseAllocation]
    witness_scale: float


@dataclass
class BayesSymmetricOptimum:
    """Symmetric optimum with the shape case that produced it.

    Cases: 1 full revelation, 2 endpoint comparison, 3 unique interior
    optimum, 4 interior-versus-zero comparison, 5 no collaboration.
    """

    case: int
    beta_star: float
    gain: float
    alpha_sq: Optional[float]


@dataclass
class AsymptoticPrediction:
    """Limit-regime prediction; ``collaborate`` is None on the undecided boundary."""

    collaborate: Optional[bool]
    beta_approx: Optional[float]
    gain_approx: Optional[float]


_weights = accuracy_weights


def err_leak(setting: BayesSetting, alloc: NoiseAllocation, i: int) -> EvalPair:
    """Posterior root-MSE and reconstruction leak of client ``i``.

    ``err = sqrt(1/(gamma_i + rho + tau))``; the squared leak is the gap
    between the prior-only per-point reconstruction error ``1/rho + 1/tau``
    and the attacker's best error, and is zero exactly when nobody shares.
    """
    if alloc.n_clients != setting.n_clients:
        raise ValueError(f"allocation has {alloc.n_clients} clients, setting has {setting.n_clients}")
    rho = setting.local_precision
    tau = setting.prior_precision
    beta_i = float(alloc.informativeness[i])
    gamma = alloc.others(i)
    total = gamma + beta_i
    err = math.sqrt(1.0 / (gamma + rho + tau))
    # (1/alpha_i^2 + rho (gamma+tau)/(gamma+rho+tau))^-1 in pole-free form.
    attacker_var = (rho - beta_i) * (gamma + rho + tau) / (rho**2 * (total + tau))
    leak_sq = max(1.0 / rho + 1.0 / tau - attacker_var, 0.0)
    return EvalPair(err=err, leak=math.sqrt(leak_sq))


def participation_residuals(setting: BayesSetting, betas: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Per-client values of ``u_i - u0_i``; accepts one allocation or a batch."""
    b = np.atleast_2d(np.asarray(betas, dtype=float))
    rho = setting.local_precision
    tau = setting.prior_precision
    total = b.sum(axis=1, keepdims=True)
    gamma = total - b
    u = (
        (rho - b) * (gamma + rho + tau) / (rho**2 * (total + tau))
        - 1.0 / rho
        - 1.0 / tau
        - weights / (gamma + rho + tau)
    )
    res = u + weights / (rho + tau)
    return res if np.asarray(betas).ndim == 2 else res[0]


def utilities(
    setting: BayesSetting,
    alloc: NoiseAllocation,
    prefs: Sequence[ClientPreference],
) -> ParticipationReport:
    """Participation report against the nobody-shares baseline ``-w_i/(rho+tau)``."""
    w = _weights(prefs, setting.n_clients)
    rho = setting.local_precision
    tau = setting.prior_precision
    b = alloc.informativeness
    total = alloc.total
    gamma = total - b
    u = (
        (rho - b) * (gamma + rho + tau) / (rho**2 * (total + tau))
        - 1.0 / rho
        - 1.0 / tau
        - w / (gamma + rho + tau)
    )
    u0 = -w / (rho + tau)
    res = u - u0
    return ParticipationReport(
        utilities=u,
        baselines=u0,
        violations=frozenset(np.nonzero(res < 0)[0].tolist()),
        residuals=res,
    )


def first_order_coefficients(setting: BayesSetting, weights) -> np.ndarray:
    """Per-client deviation coefficients of the linearized participation system.

    Computed in the pole-free ratio form: numerator ``w/(rho+tau)^2 - 1/tau^2``
    over an always-positive denominator, so the value is 0 exactly at
    ``w = (rho+tau)^2/tau^2``, negative below, and approaches 1 from below as
    the accuracy weight grows.
    """
    w = np.asarray(weights, dtype=float)
    rho = setting.local_precision
    tau = setting.prior_precision
    num = w / (rho + tau) ** 2 - 1.0 / tau**2
    den = w / (rho + tau) ** 2 + (2.0 * rho + tau) / (rho**2 * tau)
    return num / den


def first_order_existence(
    setting: BayesSetting, prefs: Sequence[ClientPreference]
) -> FeasibilityReport:
    """Small-deviation existence test: all coefficients >= 0 and sum > 1.

    The witness scales the coefficient vector, shrinking geometrically until
    the exact (not linearized) residuals accept it.
    """
    w = _weights(prefs, setting.n_clients)
    xi = first_order_coefficients(setting, w)
    feasible = bool(np.all(xi >= 0.0) and xi.sum() > 1.0)
    witness = None
    scale = 0.0
    if feasible:
        rho = setting.local_precision
        for b in 10.0 ** np.arange(-2, -13, -1) * rho / max(xi.max(), 1e-300):
            if participation_residuals(setting, xi * b, w).min() >= 0.0:
                witness = NoiseAllocation.from_informativeness(xi * b, rho)
                scale = float(b)
                break
    return FeasibilityReport(feasible=feasible, coefficients=xi, witness=witness, witness_scale=scale)


def symmetric_gain(setting: BayesSetting, accuracy_weight: float, beta) -> np.ndarray:
    """Utility improvement over local training at a common informativeness level."""
    n = setting.n_clients
    rho = setting.local_precision
    tau = setting.prior_precision
    lam = accuracy_weight
    b = np.asarray(beta, dtype=float)
    return (
        (rho - b) * ((n - 1) * b + rho + tau) / ((n * b + tau) * rho**2)
        - lam / ((n - 1) * b + rho + tau)
        - 1.0 / rho
        - 1.0 / tau
        + lam / (rho + tau)
    )


def _gain_derivative(setting: BayesSetting, lam: float, beta: float) -> float:
    n = setting.n_clients
    rho = setting.local_precision
    tau = setting.prior_precision
    return (
        -(n - 1) / (n * rho**2)
        - (rho + tau / n) ** 2 / (n * rho**2 * (beta + tau / n) ** 2)
        + lam / ((n - 1) * (beta + (rho + tau) / (n - 1)) ** 2)
    )


def _gain_second_derivative(setting: BayesSetting, lam: float, beta: float) -> float:
    n = setting.n_clients
    rho = setting.local_precision
    tau = setting.prior_precision
    return (
        2.0 * (rho + tau / n) ** 2 / (n * rho**2 * (beta + tau / n) ** 3)
        - 2.0 * lam / ((n - 1) * (beta + (rho + tau) / (n - 1)) ** 3)
    )


def _bisect(f, lo: float, hi: float, positive_at_lo: bool) -> float:
    """Root of a single sign change of ``f`` on [lo, hi] to absolute _ROOT_TOL."""
    while hi - lo > _ROOT_TOL:
        mid = 0.5 * (lo + hi)
        if (f(mid) > 0.0) == positive_at_lo:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def symmetric_optimum(setting: BayesSetting, accuracy_weight: float) -> BayesSymmetricOptimum:
    """Symmetric optimum via the five-case shape analysis of the gain curve.

    The second derivative changes sign at most once (convex then concave), so
    the derivative's signs at the endpoints classify the shape.  Interior
    optima are roots of the derivative restricted to the concave segment;
    case 4 versus 5 is decided by the derivative's sign at the inflection
    point, and case 4 compares the interior candidate against staying out.
    """
    if setting.n_clients < 2:
        raise ValueError("the symmetric analysis needs at least 2 clients")
    if accuracy_weight <= 0:
        raise ValueError("accuracy_weight must be > 0")
    lam = float(accuracy_weight)
    rho = setting.local_precision

    def hp(b: float) -> float:
        return _gain_derivative(setting, lam, b)

    def hpp(b: float) -> float:
        return _gain_second_derivative(setting, lam, b)

    def h(b: float) -> float:
        return float(symmetric_gain(setting, lam, b))

    hp0 = hp(0.0)
    hpr = hp(rho)

    if hp0 > 0.0 and hpr > 0.0:
        beta = rho
        return BayesSymmetricOptimum(1, beta, h(beta), _alpha_sq(beta, rho))
    if hp0 <= 0.0 and hpr > 0.0:
        beta = rho if h(rho) > 0.0 else 0.0
        return BayesSymmetricOptimum(2, beta, max(h(rho), 0.0), _alpha_sq(beta, rho))
    if hp0 > 0.0 and hpr <= 0.0:
        # Single down-crossing; restrict the bracket to the concave segment.
        lo = 0.0
        if hpp(0.0) > 0.0 and hpp(rho) < 0.0:
            lo = _bisect(hpp, 0.0, rho, positive_at_lo=True)
        beta = _bisect(hp, lo, rho, positive_at_lo=True) if hp(lo) > 0.0 else lo
        return BayesSymmetricOptimum(3, beta, h(beta), _alpha_sq(beta, rho))

    # hp0 <= 0 and hpr <= 0: either a double sign change (case 4) or none (5).
    if hpp(0.0) > 0.0 and hpp(rho) < 0.0:
        flex = _bisect(hpp, 0.0, rho, positive_at_lo=True)
        if hp(flex) >= 0.0:
            beta = _bisect(hp, flex, rho, positive_at_lo=True)
            if h(beta) > 0.0:
                return BayesSymmetricOptimum(4, beta, h(beta), _alpha_sq(beta, rho))
            return BayesSymmetricOptimum(4, 0.0, 0.0, None)
    return BayesSymmetricOptimum(5, 0.0, 0.0, None)


def _alpha_sq(beta: float, rho: float) -> Optional[float]:
    if beta <= 0.0:
        return None
    return 1.0 / beta - 1.0 / rho


def asymptotic_beta(
    setting: BayesSetting, accuracy_weight: float, regime: str
) -> AsymptoticPrediction:
    """Limit predictions used as oracles against the exact symmetric optimum.

    ``large_N``: collaboration pays iff the accuracy weight exceeds
    ``(rho+tau)/tau``; the optimum then shrinks like ``sqrt((w-1)/N) rho``
    with per-client gain ``w/(rho+tau) - 1/tau``.  In both precision
    extremes (``large_rho``, ``small_rho``) collaboration stops paying.
    """
    rho = setting.local_precision
    tau = setting.prior_precision
    lam = float(accuracy_weight)
    if regime == "large_N":
        threshold = (rho + tau) / tau
        if lam == threshold:
            return AsymptoticPrediction(collaborate=None, beta_approx=None, gain_approx=None)
        if lam < threshold:
            return AsymptoticPrediction(collaborate=False, beta_approx=0.0, gain_approx=0.0)
        beta = math.sqrt((lam - 1.0) / setting.n_clients) * rho
        gain = lam / (rho + tau) - 1.0 / tau
        return AsymptoticPrediction(collaborate=True, beta_approx=beta, gain_approx=gain)
    if regime in ("large_rho", "small_rho"):
        return AsymptoticPrediction(collaborate=False, beta_approx=0.0, gain_approx=0.0)
    raise ValueError(f"unknown regime {regime!r}")


def maximize_gamma(
    setting: BayesSetting,
    prefs: Sequence[ClientPreference],
    family: str = "personalized",
    grid_points: int = 512,
) -> GammaSearchResult:
    """Largest-total-informativeness member of a one-parameter family.

    ``personalized`` scales the clipped first-order coefficients
    ``max(coefficient, 0)``; clients whose coefficient is negative simply
    stay at zero, and if nobody has a positive one the search degenerates to
    the empty protocol.
    """
    if family not in FAMILIES:
        raise ValueError(f"family must be one of {FAMILIES}")
    if grid_points < 2:
        raise ValueError("grid_points must be >= 2")
    w = _weights(prefs, setting.n_clients)
    rho = setting.local_precision
    if family == "symmetric":
        direction = np.ones(setting.n_clients)
        b_hi = rho
    else:
        direction = np.maximum(first_order_coefficients(setting, w), 0.0)
        if direction.max() <= 0.0:
            return GammaSearchResult(b_star=0.0, gamma=0.0, ratio=0.0)
        b_hi = rho / direction.max()
    return scan_scaled_family(
        direction, b_hi, grid_points, setting.n_clients, rho,
        lambda batch: participation_residuals(setting, batch, w),
    )
