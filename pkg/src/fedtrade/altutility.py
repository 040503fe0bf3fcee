"""Feasibility analysis under the linear-leak utility ``-leak - w * err^2``.

Robustness companion to the quadratic family: the same two learning tasks
with a utility that charges privacy linearly (bits revealed) and accuracy by
mean squared error.  The mean protocol here is plain message averaging with
a self-correction, the optimization bound uses an affine variance model, and
the driving recurrence lemma gets a direct numeric verification.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .allocation import NoiseAllocation
from .core import ClientPreference, ParticipationReport, accuracy_weights
from .dpmean import DpMeanSetting, gaussian_mechanism_strength
from .dpsgd import SgdSetting

# The averaging-protocol analysis reuses the mean-estimation constants.
AltMeanSetting = DpMeanSetting

_E = math.e


@dataclass(frozen=True)
class AltSgdSetting:
    """Optimization constants plus the affine variance model and tail constant.

    ``var_const``/``var_slope`` bound the gradient-oracle variance by
    ``var_const + var_slope * ||grad||^2``; ``tail_const`` scales the
    projection-tail term of the error bound and is a modeling input.
    """

    base: SgdSetting
    var_const: float
    var_slope: float
    tail_const: float

    def __post_init__(self):
        if not (self.var_const > 0 and math.isfinite(self.var_const)):
            raise ValueError(f"var_const must be finite and > 0, got {self.var_const}")
        if not (self.var_slope >= 0 and math.isfinite(self.var_slope)):
            raise ValueError(f"var_slope must be finite and >= 0, got {self.var_slope}")
        if not (self.tail_const > 0 and math.isfinite(self.tail_const)):
            raise ValueError(f"tail_const must be finite and > 0, got {self.tail_const}")


@dataclass
class ChungReport:
    """Outcome of driving the decay recurrence against its closed-form bound.

    ``max_violation`` is the largest amount by which the iterates exceeded
    ``c1/((c-1) n) + K/n^c``; a correct bound leaves it at floating noise.
    """

    max_violation: float
    bound_constant: float
    final_scaled_value: float


def _weights(prefs, n_clients):
    # The mixed-exponent utility here does not constrain the preference
    # exponent the way the quadratic family does.
    return accuracy_weights(prefs, n_clients, require_quadratic=False)


def alt_mean_feasibility(
    setting: AltMeanSetting,
    prefs: Sequence[ClientPreference],
    alloc: NoiseAllocation,
) -> ParticipationReport:
    """Participation report for the averaging mean protocol under linear leak.

    The server broadcasts the plain message average; each client corrects
    only for its own noise, so its squared error is
    ``sigma^2/(N n) + sum_{j != i} alpha_j^2 / N^2`` against the local
    ``sigma^2/n`` baseline, while the leak is the Gaussian-mechanism bound.
    Zero noise means infinite leak and an automatic violation.
    """
    w = _weights(prefs, setting.n_clients)
    if alloc.n_clients != setting.n_clients:
        raise ValueError("allocation size does not match the setting")
    if np.any(np.isinf(alloc.noise_stds)):
        raise ValueError("the averaging protocol needs finite noise for every client")
    n_clients, n = setting.n_clients, setting.n_samples
    sigma_sq = setting.sigma**2
    kappa = gaussian_mechanism_strength(n, setting.support_width)
    a_sq = alloc.noise_stds**2
    others_sq = a_sq.sum() - a_sq
    err_sq = sigma_sq / (n_clients * n) + others_sq / n_clients**2
    with np.errstate(divide="ignore"):
        leak = np.where(alloc.noise_stds > 0, kappa / alloc.noise_stds, np.inf if kappa > 0 else 0.0)
    u = -leak - w * err_sq
    u0 = -w * (sigma_sq / n)
    res = u - u0
    return ParticipationReport(
        utilities=u,
        baselines=u0,
        violations=frozenset(np.nonzero(~(res >= 0))[0].tolist()),
        residuals=res,
    )


def alt_sgd_feasibility(
    setting: AltSgdSetting,
    prefs: Sequence[ClientPreference],
    alloc: NoiseAllocation,
) -> ParticipationReport:
    """Participation report for equal-weight single-sample optimization.

    Squared error model:
    ``8 L (M/N + d sum_j alpha_j^2 / N^2) / (3 mu^2 n) + C/(N n)`` against
    the solo baseline at ``N = 1`` with no privacy noise; the leak is the
    shuffling-amplified constant over ``sqrt(n) alpha_i``.
    """
    base = setting.base
    w = _weights(prefs, base.n_clients)
    if alloc.n_clients != base.n_clients:
        raise ValueError("allocation size does not match the setting")
    if np.any(np.isinf(alloc.noise_stds)):
        raise ValueError("the equal-weight protocol needs finite noise for every client")
    n_clients, n, d = base.n_clients, base.n_samples, base.dim
    lsm, mu = base.smoothness, base.strong_convexity
    m_const, c_const = setting.var_const, setting.tail_const
    kappa = (
        16.0
        * math.sqrt(2.0 * _E * math.log(1.25 * n**3) * math.log(4.0 * n**2))
        * base.grad_support
        / math.sqrt(n)
    )
    a_sq = alloc.noise_stds**2
    err_sq = (
        8.0 * lsm * (m_const / n_clients + d * a_sq.sum() / n_clients**2) / (3.0 * mu**2 * n)
        + c_const / (n_clients * n)
    )
    err_sq_local = 8.0 * lsm * m_const / (3.0 * mu**2 * n) + c_const / n
    with np.errstate(divide="ignore"):
        leak = np.where(alloc.noise_stds > 0, kappa / alloc.noise_stds, np.inf)
    u = -leak - w * err_sq
    u0 = -w * err_sq_local
    res = u - u0
    return ParticipationReport(
        utilities=u,
        baselines=u0,
        violations=frozenset(np.nonzero(~(res >= 0))[0].tolist()),
        residuals=res,
    )


def chung_check(
    c: int,
    c1: float,
    n0: int,
    horizon: int,
    b_start: float = 1.0,
) -> ChungReport:
    """Drive ``b_{n+1} = (1 - c/n) b_n + c1/n^2`` and verify its decay bound.

    The claimed bound is ``b_n <= c1/((c-1) n) + K/n^c``; the exhibited
    constant ``K`` makes the bound tight at the start index (zero if the
    start already sits below the leading term, in which case it stays
    there).  Reports the largest positive excess over the bound, which
    should not exceed floating noise, and ``n * b_n`` at the horizon for
    inspecting the leading coefficient.
    """
    if not isinstance(c, (int, np.integer)) or c <= 1:
        raise ValueError(f"c must be an integer > 1, got {c}")
    if c1 < 0:
        raise ValueError(f"c1 must be >= 0, got {c1}")
    if not (horizon > n0 > c):
        raise ValueError(f"need horizon > n0 > c, got horizon={horizon}, n0={n0}, c={c}")
    lead = c1 / (c - 1)
    k_const = max(b_start - lead / n0, 0.0) * n0**c
    b = float(b_start)
    max_violation = -math.inf
    for n in range(n0, horizon + 1):
        bound = lead / n + k_const / n**c
        max_violation = max(max_violation, b - bound)
        if n < horizon:
            b = (1.0 - c / n) * b + c1 / n**2
    return ChungReport(
        max_violation=max_violation,
        bound_constant=k_const,
        final_scaled_value=horizon * b,
    )
