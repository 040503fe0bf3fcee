"""Shared utility algebra and participation-constraint machinery.

Clients score a collaborative protocol through two scalar evaluations, an
accuracy loss ``err`` and a privacy loss ``leak``, and join only when their
utility weakly exceeds the utility of training alone.  This module holds the
weighted-norm utility family, the participation check itself, and a
constructive search for a symmetric protocol that is beneficial for every
member of an arbitrary family of (monotone) evaluations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np


class ContractViolation(RuntimeError):
    """A caller-supplied object broke a stated monotonicity/positivity contract."""


@dataclass(frozen=True)
class ClientPreference:
    """Accuracy weight and norm exponent of one client's utility.

    ``accuracy_weight`` rescales squared error against squared privacy loss;
    larger values mean the client cares more about the end model.  The norm
    exponent stays at 2 for the whole quadratic-utility family; the
    alternative linear-leak utility lives in :mod:`fedtrade.altutility`.
    """

    accuracy_weight: float
    exponent: int = 2

    def __post_init__(self):
        if not (math.isfinite(self.accuracy_weight) and self.accuracy_weight > 0):
            raise ValueError(f"accuracy_weight must be finite and > 0, got {self.accuracy_weight}")
        if self.exponent < 1:
            raise ValueError(f"exponent must be a positive integer, got {self.exponent}")


@dataclass(frozen=True)
class EvalPair:
    """One client's (err, leak) evaluation of a protocol.

    Both entries are nonnegative; ``leak`` may be ``inf`` in the
    zero-noise limit and ``err`` may be ``inf`` when no signal is shared.
    """

    err: float
    leak: float

    def __post_init__(self):
        if math.isnan(self.err) or self.err < 0:
            raise ValueError(f"err must be >= 0, got {self.err}")
        if math.isnan(self.leak) or self.leak < 0:
            raise ValueError(f"leak must be >= 0, got {self.leak}")


@dataclass
class ParticipationReport:
    """Outcome of comparing protocol utilities against local-training baselines.

    ``violations`` lists the clients whose utility strictly drops below their
    baseline; the protocol is mutually beneficial exactly when it is empty.
    ``residuals``, when present, carries the setting-specific algebraic form
    of ``u_i - u0_i`` used by the feasibility theory (same sign pattern).
    """

    utilities: np.ndarray
    baselines: np.ndarray
    violations: frozenset = frozenset()
    residuals: Optional[np.ndarray] = None

    @property
    def beneficial(self) -> bool:
        return not self.violations


@dataclass(frozen=True)
class GeneralEvaluation:
    """Opaque utility/evaluation triple for the general existence search.

    ``utility(err, leak)`` must be strictly decreasing in each argument,
    ``err_of(n_clients, alpha)`` strictly decreasing to zero in the number of
    clients, ``leak_of(alpha)`` strictly decreasing to zero in the noise
    level, and ``err_local`` (the accuracy loss of training alone) strictly
    positive.  These contracts are sampled, not trusted.
    """

    utility: Callable[[float, float], float]
    err_of: Callable[[int, float], float]
    leak_of: Callable[[float], float]
    err_local: float


@dataclass
class SymmetricOptimum:
    """Closed-form symmetric optimum for one of the quadratic-utility settings."""

    profitable: bool
    alpha_sq: Optional[float]
    beta: float
    gain: float


@dataclass
class GammaSearchResult:
    """Largest feasible protocol found along a one-parameter allocation family."""

    b_star: float
    gamma: float
    ratio: float


def scan_scaled_family(direction, b_hi, grid_points, n_clients, local_precision, residual_fn) -> GammaSearchResult:
    """Largest grid scale ``b`` whose allocation ``b * direction`` passes participation.

    Total informativeness grows linearly in ``b`` along the family, so the
    scan walks a uniform grid from the top (right endpoint included, zero
    excluded) and stops at the first feasible scale; the all-zero fallback
    reports a zero ratio.  ``residual_fn`` maps a batch of allocations (one
    per row) to per-client residuals.
    """
    grid = np.linspace(0.0, b_hi, grid_points)[1:][::-1]
    chunk = 1024
    for start in range(0, grid.size, chunk):
        bs = grid[start : start + chunk]
        batch = bs[:, None] * np.asarray(direction, dtype=float)[None, :]
        ok = (residual_fn(batch) >= 0).all(axis=1)
        hits = np.nonzero(ok)[0]
        if hits.size:
            b_star = float(bs[hits[0]])
            gamma = b_star * float(np.sum(direction))
            return GammaSearchResult(b_star=b_star, gamma=gamma, ratio=gamma / (n_clients * local_precision))
    return GammaSearchResult(b_star=0.0, gamma=0.0, ratio=0.0)


def accuracy_weights(prefs, n_clients: int, require_quadratic: bool = True) -> np.ndarray:
    """Extract a validated accuracy-weight vector.

    Accepts a sequence of :class:`ClientPreference` (exponent must be 2 for
    the quadratic machinery) or a raw sequence of nonnegative weights; the
    raw form admits zero weights, which the feasibility formulas handle as
    the no-accuracy-interest limit.
    """
    prefs = list(prefs)
    if len(prefs) != n_clients:
        raise ValueError(f"need {n_clients} preferences, got {len(prefs)}")
    if prefs and isinstance(prefs[0], ClientPreference):
        if require_quadratic and any(p.exponent != 2 for p in prefs):
            raise ValueError("the quadratic-utility machinery requires exponent 2")
        return np.array([p.accuracy_weight for p in prefs], dtype=float)
    w = np.asarray(prefs, dtype=float)
    if np.any(~np.isfinite(w)) or np.any(w < 0):
        raise ValueError("accuracy weights must be finite and >= 0")
    return w


def utility_lp(pair: EvalPair, pref: ClientPreference) -> float:
    """Weighted negative l_p score ``-leak**p - weight * err**p``.

    Strictly decreasing in both losses.  Raises on non-finite inputs; the
    infinite-leak limit is handled by the setting modules, which short-circuit
    to ``-inf`` utility before reaching this function.
    """
    if not (math.isfinite(pair.err) and math.isfinite(pair.leak)):
        raise ValueError(f"utility_lp needs finite evaluations, got {pair}")
    p = pref.exponent
    return -(pair.leak**p) - pref.accuracy_weight * pair.err**p


def check_participation(utilities: Sequence[float], baselines: Sequence[float]) -> ParticipationReport:
    """Compare utilities against baselines with exact >=, no tolerance.

    Tolerances belong to callers who know their numeric error budget; here
    equality counts as participation.
    """
    u = np.asarray(utilities, dtype=float)
    u0 = np.asarray(baselines, dtype=float)
    if u.shape != u0.shape or u.ndim != 1 or u.size < 1:
        raise ValueError(f"need equal-length 1-d vectors, got shapes {u.shape} and {u0.shape}")
    bad = frozenset(np.nonzero(u < u0)[0].tolist())
    return ParticipationReport(utilities=u, baselines=u0, violations=bad)


def _police_monotone(values: Sequence[float], what: str, strict: bool = True) -> None:
    vals = list(values)
    for a, b in zip(vals, vals[1:]):
        if (b >= a) if strict else (b > a):
            raise ContractViolation(f"{what} is not strictly decreasing (sampled {a} -> {b})")


def find_symmetric_beneficial(
    evals: Iterable[GeneralEvaluation],
    alpha_grid: Sequence[float],
    n_max: int,
) -> Optional[tuple[int, float]]:
    """Search for a symmetric noise level and client count beneficial to all.

    Mirrors the constructive limit argument: first raise the common noise
    level until every utility prefers a zero-error/leaky protocol over local
    training, then grow the client count until the error is small enough too.
    Returns ``(n1, alpha)`` such that every evaluation participates for all
    tested ``n >= n1``, or ``None`` if ``n_max`` is reached first.

    Monotonicity of the supplied functions is sampled at 8 grid points and a
    violation raises :class:`ContractViolation` rather than silently
    returning garbage.
    """
    evals = list(evals)
    if not evals:
        raise ValueError("need at least one evaluation")
    alphas = [float(a) for a in alpha_grid]
    if not alphas or any(a <= 0 for a in alphas) or sorted(alphas) != alphas:
        raise ValueError("alpha_grid must be an increasing sequence of positive reals")
    if n_max < 1:
        raise ValueError("n_max must be >= 1")

    # Sample the Assumption contracts at 8 points before trusting anything.
    probe_alphas = np.geomspace(alphas[0], alphas[-1], 8) if alphas[-1] > alphas[0] else [alphas[0]]
    probe_ns = sorted(set(int(v) for v in np.linspace(1, max(n_max, 8), 8)))
    for ev in evals:
        if not (math.isfinite(ev.err_local) and ev.err_local > 0):
            raise ContractViolation(f"err_local must be > 0, got {ev.err_local}")
        _police_monotone([ev.leak_of(a) for a in probe_alphas], "leak_of")
        _police_monotone([ev.err_of(n, alphas[0]) for n in probe_ns], "err_of")
        leak_hi = ev.leak_of(probe_alphas[0])
        err_hi = ev.err_local
        for scale in (0.0, 0.5, 1.0):
            _police_monotone([ev.utility(e, scale * leak_hi) for e in np.linspace(0, err_hi, 8)], "utility in err")
            _police_monotone([ev.utility(scale * err_hi, l) for l in np.linspace(0, leak_hi, 8)], "utility in leak")

    baselines = [ev.utility(ev.err_local, 0.0) for ev in evals]

    alpha_star = None
    for a in alphas:
        if all(ev.utility(0.0, ev.leak_of(a)) > u0 for ev, u0 in zip(evals, baselines)):
            alpha_star = a
            break
    if alpha_star is None:
        return None

    def everyone_joins(n: int) -> bool:
        return all(
            ev.utility(ev.err_of(n, alpha_star), ev.leak_of(alpha_star)) >= u0
            for ev, u0 in zip(evals, baselines)
        )

    for n in range(1, n_max + 1):
        if everyone_joins(n):
            for n_next in range(n + 1, min(n + 3, n_max + 1)):
                if not everyone_joins(n_next):
                    raise ContractViolation(
                        f"err_of is not monotone: participation holds at n={n} but fails at n={n_next}"
                    )
            return n, alpha_star
    return None
