"""Differentially private collaborative stochastic optimization analytics.

Clients jointly minimize a smooth, strongly convex objective by streaming
noisy batch gradients to a server for a single pass over their data.  The
derived constants fix the round count, batch size, per-round precision, and
the shuffling-amplified privacy constant; on top of those sit the accuracy
upper bound for the final iterate, the participation system, the feasibility
criterion (a one-dimensional concave maximization), and the symmetric
utility optimum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .allocation import NoiseAllocation
from .core import ClientPreference, ParticipationReport, SymmetricOptimum, accuracy_weights

_E = math.e


@dataclass(frozen=True)
class SgdSetting:
    """Problem constants for the optimization task.

    ``grad_support`` bounds the diameter of the gradient-oracle support ball,
    ``sigma`` its standard deviation, ``diameter`` the feasible set.
    """

    n_clients: int
    n_samples: int
    dim: int
    smoothness: float
    strong_convexity: float
    diameter: float
    sigma: float
    grad_support: float

    def __post_init__(self):
        if min(self.n_clients, self.n_samples, self.dim) < 1:
            raise ValueError("n_clients, n_samples and dim must be >= 1")
        for name in ("smoothness", "strong_convexity", "diameter", "sigma", "grad_support"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be finite and > 0, got {v}")
        if self.strong_convexity > self.smoothness:
            raise ValueError("strong_convexity cannot exceed smoothness")


@dataclass(frozen=True)
class SgdDerived:
    """Training-schedule constants derived from the setting (continuous relaxation).

    ``rounds`` is the real-valued round count at which the error bound
    switches from geometric to harmonic decay; ``batch_size = n / rounds``
    keeps the single data pass, and ``local_precision = batch_size / sigma^2``
    is one client's per-round gradient precision.  ``feasibility_coeffs``
    are the per-client constants of the participation system.
    """

    setting: SgdSetting
    curvature_ratio: float
    initial_error_scale: float
    rounds: float
    batch_size: float
    local_precision: float
    privacy_strength: float
    feasibility_coeffs: np.ndarray


_weights = accuracy_weights


def continuous_rounds(setting: SgdSetting) -> float:
    """Real-valued round count: max(-ln(y0)/ln(1 - chi/2), 1)."""
    chi = setting.strong_convexity / setting.smoothness
    y0 = (
        setting.smoothness
        * setting.strong_convexity
        * setting.n_samples
        * setting.n_clients
        * setting.diameter**2
        / setting.sigma**2
    )
    if y0 <= 1.0:
        return 1.0
    return max(-math.log(y0) / math.log(1.0 - chi / 2.0), 1.0)


def shuffled_privacy_strength(setting: SgdSetting, rounds: float) -> float:
    """Privacy constant after shuffling amplification over ``rounds`` rounds.

    16 * sqrt(2 e ln(1.25 * rounds * n^2) * ln(4 n^2) * rounds) * width / n.
    """
    n = setting.n_samples
    return (
        16.0
        * math.sqrt(2.0 * _E * math.log(1.25 * rounds * n**2) * math.log(4.0 * n**2) * rounds)
        * setting.grad_support
        / n
    )


def derive(setting: SgdSetting, prefs: Sequence[ClientPreference]) -> SgdDerived:
    w = _weights(prefs, setting.n_clients)
    chi = setting.strong_convexity / setting.smoothness
    y0 = (
        setting.smoothness
        * setting.strong_convexity
        * setting.n_samples
        * setting.n_clients
        * setting.diameter**2
        / setting.sigma**2
    )
    rounds = continuous_rounds(setting)
    batch = setting.n_samples / rounds
    rho = batch / setting.sigma**2
    kappa = shuffled_privacy_strength(setting, rounds)
    lmu = setting.smoothness * setting.strong_convexity
    psi = w / (lmu * setting.dim * kappa**2 * rho**2)
    return SgdDerived(
        setting=setting,
        curvature_ratio=chi,
        initial_error_scale=y0,
        rounds=rounds,
        batch_size=batch,
        local_precision=rho,
        privacy_strength=kappa,
        feasibility_coeffs=psi,
    )


def accuracy_bound(derived: SgdDerived, alloc: NoiseAllocation, m: float) -> float:
    """Upper bound on E||w_m - w*||^2 after ``m`` rounds.

    Harmonic ``1/(1 + chi/(2-chi) (m - rounds))`` decay past the switch
    point, geometric before it; both branches agree at ``m = rounds``.
    Returns ``inf`` when no client contributes any informativeness.
    """
    total = alloc.total
    lmu = derived.setting.smoothness * derived.setting.strong_convexity
    if total == 0.0:
        return math.inf
    chi = derived.curvature_ratio
    if m >= derived.rounds:
        return 1.0 / ((1.0 + chi / (2.0 - chi) * (m - derived.rounds)) * lmu * total)
    return (1.0 - chi / 2.0) ** m * derived.initial_error_scale / (lmu * total)


def participation_residuals(derived: SgdDerived, betas: np.ndarray) -> np.ndarray:
    """Per-client feasibility residuals ``psi_i (1 - rho/total) - beta_i/(rho - beta_i)``.

    Same sign as ``u_i - u0_i`` up to a positive factor.  Accepts one
    allocation (1-d) or a batch (2-d).  The all-zero allocation has no
    gradient signal at all, hence ``-inf``.
    """
    b = np.atleast_2d(np.asarray(betas, dtype=float))
    rho = derived.local_precision
    psi = derived.feasibility_coeffs
    total = b.sum(axis=1, keepdims=True)
    with np.errstate(divide="ignore"):
        lhs = psi * (1.0 - np.where(total > 0, rho / np.where(total > 0, total, 1.0), np.inf))
        rhs = np.where(b < rho, b / np.where(b < rho, rho - b, 1.0), np.inf)
    res = lhs - rhs
    return res if np.asarray(betas).ndim == 2 else res[0]


def utilities(
    derived: SgdDerived,
    alloc: NoiseAllocation,
    prefs: Sequence[ClientPreference],
) -> ParticipationReport:
    """Participation report for the optimization protocol.

    ``u_i = -kappa^2/alpha_i^2 - weight_i / (L mu total)`` against the
    local-training baseline ``-weight_i / (L mu rho)``.
    """
    setting = derived.setting
    w = _weights(prefs, setting.n_clients)
    rho = derived.local_precision
    kappa = derived.privacy_strength
    lmu = setting.smoothness * setting.strong_convexity
    b = alloc.informativeness
    total = alloc.total
    with np.errstate(divide="ignore"):
        leak_sq = np.where(b < rho, kappa**2 * setting.dim * rho * b / np.where(b < rho, rho - b, 1.0), np.inf)
    err_term = w / (lmu * total) if total > 0 else np.full_like(w, np.inf)
    u = -leak_sq - err_term
    u0 = -w / (lmu * rho)
    res = participation_residuals(derived, b)
    return ParticipationReport(
        utilities=u,
        baselines=u0,
        violations=frozenset(np.nonzero(res < 0)[0].tolist()),
        residuals=res,
    )


@dataclass
class FeasibilityReport:
    """Verdict of the concave feasibility criterion with its witness.

    ``x_star`` maximizes ``g(x) = sum_i psi_i x / ((psi_i + 1) x + 1) - x - 1``
    over ``x >= 0``; feasibility is ``g(x_star) >= 0`` (boundary included).
    ``sufficient_ok``/``necessary_ok`` are the simpler sandwich tests.
    """

    feasible: bool
    coefficients: np.ndarray
    x_star: float
    g_max: float
    witness: Optional[NoiseAllocation]
    sufficient_ok: bool
    necessary_ok: bool


# Verdict slack for exactly-boundary instances where the true maximum is 0
# but floating evaluation lands within rounding of it.
_BOUNDARY_SLACK = 1e-12


def existence(derived: SgdDerived) -> FeasibilityReport:
    """Ternary-search feasibility test of the participation system.

    Each summand of ``g`` is below 1, so ``g(x) < 0`` for ``x >= N``; this
    brackets the concave maximization on ``[0, N]``.  The witness allocation
    ``beta_i = rho psi_i x*/((psi_i + 1) x* + 1)`` realizes feasibility.
    """
    psi = derived.feasibility_coeffs
    n = psi.size
    rho = derived.local_precision

    def g(x: float) -> float:
        return float((psi * x / ((psi + 1.0) * x + 1.0)).sum() - x - 1.0)

    lo, hi = 0.0, float(n)
    for _ in range(200):
        m1 = lo + (hi - lo) / 3.0
        m2 = hi - (hi - lo) / 3.0
        if g(m1) < g(m2):
            lo = m1
        else:
            hi = m2
    x_star = 0.5 * (lo + hi)
    g_max = g(x_star)
    feasible = g_max >= -_BOUNDARY_SLACK
    witness = None
    if feasible:
        betas = rho * psi * x_star / ((psi + 1.0) * x_star + 1.0)
        witness = NoiseAllocation.from_informativeness(betas, rho, derived.setting.dim)
    sufficient = float((psi / (psi + 2.0)).sum()) >= 2.0
    necessary = float((psi / np.sqrt(psi + 1.0)).sum()) >= 4.0
    return FeasibilityReport(
        feasible=feasible,
        coefficients=psi,
        x_star=x_star,
        g_max=g_max,
        witness=witness,
        sufficient_ok=sufficient,
        necessary_ok=necessary,
    )


def symmetric_gain(derived: SgdDerived, accuracy_weight: float, beta) -> np.ndarray:
    """Utility improvement over local training at a common informativeness level."""
    setting = derived.setting
    rho = derived.local_precision
    kappa = derived.privacy_strength
    d = setting.dim
    n = setting.n_clients
    lmu = setting.smoothness * setting.strong_convexity
    psi = accuracy_weight / (lmu * d * kappa**2 * rho**2)
    b = np.asarray(beta, dtype=float)
    with np.errstate(divide="ignore"):
        lhs = psi * (1.0 - np.where(b > 0, rho / (n * np.where(b > 0, b, 1.0)), np.inf))
        rhs = np.where(b < rho, b / np.where(b < rho, rho - b, 1.0), np.inf)
    return kappa**2 * rho * d * (lhs - rhs)


def symmetric_optimum(derived: SgdDerived, accuracy_weight: float) -> SymmetricOptimum:
    """Closed-form symmetric optimum for the optimization setting.

    Profitable iff ``sqrt((N-1) w) >= sqrt(4 N L mu d / (N-1)) kappa rho``;
    the optimal squared noise is ``sqrt(L mu N) kappa / sqrt(w d)`` and the
    per-client gain follows the quadratic form below.
    """
    if accuracy_weight <= 0:
        raise ValueError("accuracy_weight must be > 0")
    setting = derived.setting
    n = setting.n_clients
    d = setting.dim
    rho = derived.local_precision
    kappa = derived.privacy_strength
    lmu = setting.smoothness * setting.strong_convexity
    lhs = math.sqrt((n - 1) * accuracy_weight)
    rhs = math.sqrt(4.0 * n * lmu * d / (n - 1)) * kappa * rho
    if lhs < rhs:
        return SymmetricOptimum(profitable=False, alpha_sq=None, beta=0.0, gain=0.0)
    alpha_sq = math.sqrt(lmu * n) * kappa / math.sqrt(accuracy_weight * d)
    psi = accuracy_weight / (lmu * d * kappa**2 * rho**2)
    beta = math.sqrt(psi) * rho / (math.sqrt(psi) + math.sqrt(n))
    gain = lhs / (lmu * rho * n) * (lhs - rhs)
    return SymmetricOptimum(profitable=True, alpha_sq=alpha_sq, beta=beta, gain=gain)
