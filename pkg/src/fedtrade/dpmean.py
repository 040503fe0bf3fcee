"""Differentially private collaborative mean estimation analytics.

Clients hold ``n`` bounded samples of a common mean and share their local
average plus Gaussian noise.  Closed forms below give each client's root
mean squared error and DP leakage, the participation system, an exact
feasibility test with a constructive witness family, the symmetric
utility-optimal noise level, and a grid search for the allocation that
maximizes the server's total informativeness subject to participation.
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
    SymmetricOptimum,
    accuracy_weights,
    scan_scaled_family,
)

FAMILIES = ("symmetric", "personalized")


@dataclass(frozen=True)
class DpMeanSetting:
    """Problem constants: client count, samples per client, sample spread, support width."""

    n_clients: int
    n_samples: int
    sigma: float
    support_width: float

    def __post_init__(self):
        if self.n_clients < 1 or self.n_samples < 1:
            raise ValueError("n_clients and n_samples must be >= 1")
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise ValueError(f"sigma must be finite and > 0, got {self.sigma}")
        if not (self.support_width > 0 and math.isfinite(self.support_width)):
            raise ValueError(f"support_width must be finite and > 0, got {self.support_width}")


@dataclass(frozen=True)
class DpMeanDerived:
    """Quantities derived from the setting.

    ``local_precision`` is the inverse variance of a local average;
    ``privacy_strength`` is the constant in the per-client DP bound
    ``epsilon_i <= privacy_strength / alpha_i``.
    """

    local_precision: float
    privacy_strength: float


@dataclass
class FeasibilityReport:
    """Existence verdict with the per-client coefficients and a witness.

    When feasible, scaling the coefficient vector by any ``b`` in
    ``(0, b_max]`` yields a mutually beneficial allocation; ``witness`` is
    the midpoint of that interval.
    """

    feasible: bool
    coefficients: np.ndarray
    b_max: float
    witness: Optional[NoiseAllocation]


def gaussian_mechanism_strength(n_samples: int, support_width: float) -> float:
    """DP constant of the noisy-average release: sqrt(2 ln(1.25 n^2)) * width / n.

    The failure probability is pinned at 1/n^2, so the constant shrinks like
    sqrt(log n)/n; zero support width means zero sensitivity and no leak.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if support_width < 0:
        raise ValueError("support_width must be >= 0")
    if support_width == 0.0:
        return 0.0
    return math.sqrt(2.0 * math.log(1.25 * n_samples**2)) * support_width / n_samples


def derive(setting: DpMeanSetting) -> DpMeanDerived:
    return DpMeanDerived(
        local_precision=setting.n_samples / setting.sigma**2,
        privacy_strength=gaussian_mechanism_strength(setting.n_samples, setting.support_width),
    )


def err_leak(
    setting: DpMeanSetting,
    derived: DpMeanDerived,
    alloc: NoiseAllocation,
    i: int,
) -> EvalPair:
    """Root-MSE of client ``i``'s best linear estimate and their DP leak bound.

    Error improves with the informativeness of the *other* messages only;
    leak is evaluated unconditionally (clients use the bound even when it
    exceeds 1, matching the modeling convention).
    """
    if alloc.n_clients != setting.n_clients:
        raise ValueError(f"allocation has {alloc.n_clients} clients, setting has {setting.n_clients}")
    gamma = alloc.others(i)
    err = math.sqrt(1.0 / (gamma + derived.local_precision))
    alpha = float(alloc.noise_stds[i])
    kappa = derived.privacy_strength
    if math.isinf(alpha):
        leak = 0.0
    elif alpha == 0.0:
        leak = math.inf if kappa > 0 else 0.0
    else:
        leak = kappa / alpha
    return EvalPair(err=err, leak=leak)


def participation_residuals(
    derived: DpMeanDerived,
    betas: np.ndarray,
    weights: np.ndarray,
) -> np.ndarray:
    """Per-client values of ``u_i - u0_i`` in informativeness form.

    Accepts a single allocation (1-d) or a batch (2-d, one row per
    allocation).  Clients at full informativeness have infinite leak and get
    ``-inf`` whenever the privacy constant is positive.
    """
    b = np.atleast_2d(np.asarray(betas, dtype=float))
    rho = derived.local_precision
    kappa = derived.privacy_strength
    total = b.sum(axis=1, keepdims=True)
    gamma = total - b
    gain = weights * gamma / (rho * (gamma + rho))
    if kappa == 0.0:
        cost = np.zeros_like(b)
    else:
        with np.errstate(divide="ignore"):
            cost = np.where(b < rho, kappa**2 * rho * b / np.where(b < rho, rho - b, 1.0), np.inf)
    res = gain - cost
    return res if np.asarray(betas).ndim == 2 else res[0]


_weights = accuracy_weights


def utilities(
    setting: DpMeanSetting,
    derived: DpMeanDerived,
    alloc: NoiseAllocation,
    prefs: Sequence[ClientPreference],
) -> ParticipationReport:
    """Participation report: utilities, local baselines, and residuals.

    ``u_i = -kappa^2/alpha_i^2 - weight_i/(gamma_i + rho)`` against the
    local-training baseline ``-weight_i/rho``; the residual column is the
    algebraically equivalent feasibility form whose sign drives the verdict.
    """
    w = _weights(prefs, setting.n_clients)
    rho = derived.local_precision
    kappa = derived.privacy_strength
    b = alloc.informativeness
    gamma = alloc.total - b
    with np.errstate(divide="ignore"):
        leak_sq = np.where(
            b < rho, kappa**2 * rho * b / np.where(b < rho, rho - b, 1.0), np.inf if kappa > 0 else 0.0
        )
    u = -leak_sq - w / (gamma + rho)
    u0 = -w / rho
    res = participation_residuals(derived, b, w)
    return ParticipationReport(
        utilities=u,
        baselines=u0,
        violations=frozenset(np.nonzero(res < 0)[0].tolist()),
        residuals=res,
    )


def feasibility_coefficients(derived: DpMeanDerived, weights: np.ndarray) -> np.ndarray:
    """Per-client share coefficients ``weight / (weight + kappa^2 rho^2)`` in (0, 1)."""
    k2r2 = derived.privacy_strength**2 * derived.local_precision**2
    return weights / (weights + k2r2)


def existence(
    setting: DpMeanSetting,
    derived: DpMeanDerived,
    prefs: Sequence[ClientPreference],
) -> FeasibilityReport:
    """Exact feasibility test: beneficial allocations exist iff the coefficient sum exceeds 1.

    The witness family scales the coefficient vector by ``b``; the report's
    witness sits at the midpoint of the valid interval ``(0, b_max]``.
    """
    w = _weights(prefs, setting.n_clients)
    rho = derived.local_precision
    zeta = feasibility_coefficients(derived, w)
    total = float(zeta.sum())
    if total > 1.0:
        b_max = (1.0 - 1.0 / total) * rho
        witness = NoiseAllocation.from_informativeness(zeta * (b_max / 2.0), rho)
        return FeasibilityReport(True, zeta, b_max, witness)
    return FeasibilityReport(False, zeta, 0.0, None)


def symmetric_gain(
    derived: DpMeanDerived, n_clients: int, accuracy_weight: float, beta
) -> np.ndarray:
    """Utility improvement over local training when every client uses ``beta``."""
    rho = derived.local_precision
    kappa = derived.privacy_strength
    b = np.asarray(beta, dtype=float)
    gain = (n_clients - 1) * accuracy_weight * b / (rho * ((n_clients - 1) * b + rho))
    with np.errstate(divide="ignore"):
        cost = np.where(b < rho, kappa**2 * rho * b / np.where(b < rho, rho - b, 1.0), np.inf)
    return gain - cost


def symmetric_optimum(
    setting: DpMeanSetting, derived: DpMeanDerived, accuracy_weight: float
) -> SymmetricOptimum:
    """Closed-form total-utility optimum under equal weights and equal noise.

    Collaboration pays exactly when ``(N-1) * weight > kappa^2 rho^2``; the
    optimal squared noise then is ``N kappa / (sqrt((N-1) weight) - kappa rho)``
    and every client gains ``(sqrt((N-1) weight) - kappa rho)^2 / (N rho)``.
    """
    if accuracy_weight <= 0:
        raise ValueError("accuracy_weight must be > 0")
    n = setting.n_clients
    rho = derived.local_precision
    kappa = derived.privacy_strength
    root = math.sqrt((n - 1) * accuracy_weight)
    if root <= kappa * rho:
        return SymmetricOptimum(profitable=False, alpha_sq=None, beta=0.0, gain=0.0)
    alpha_sq = n * kappa / (root - kappa * rho)
    beta = (root - kappa * rho) * rho / (root + (n - 1) * kappa * rho)
    gain = (root - kappa * rho) ** 2 / (n * rho)
    return SymmetricOptimum(profitable=True, alpha_sq=alpha_sq, beta=beta, gain=gain)


def maximize_gamma(
    setting: DpMeanSetting,
    derived: DpMeanDerived,
    prefs: Sequence[ClientPreference],
    family: str = "personalized",
    grid_points: int = 512,
) -> GammaSearchResult:
    """Largest-total-informativeness member of a one-parameter allocation family.

    ``symmetric`` scales the all-ones direction over ``[0, rho]``;
    ``personalized`` scales the feasibility coefficients over
    ``[0, rho / max(coefficients)]``.  Total informativeness grows linearly
    with the scale, so the scan walks the grid from the top and keeps the
    first (largest) scale that passes participation; the all-zero fallback
    reports a zero ratio.
    """
    if family not in FAMILIES:
        raise ValueError(f"family must be one of {FAMILIES}")
    if grid_points < 2:
        raise ValueError("grid_points must be >= 2")
    w = _weights(prefs, setting.n_clients)
    rho = derived.local_precision
    if family == "symmetric":
        direction = np.ones(setting.n_clients)
        b_hi = rho
    else:
        direction = feasibility_coefficients(derived, w)
        if direction.max() <= 0.0:
            return GammaSearchResult(b_star=0.0, gamma=0.0, ratio=0.0)
        b_hi = rho / direction.max()
    return scan_scaled_family(
        direction, b_hi, grid_points, setting.n_clients, rho,
        lambda batch: participation_residuals(derived, batch, w),
    )
