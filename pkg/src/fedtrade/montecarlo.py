"""Seeded protocol simulators that validate the closed-form evaluations.

Each simulator runs the actual message-passing protocol (not the formulas)
with reproducible randomness and reports an empirical moment next to its
analytic reference as a z-score.  Equality-type claims (estimator MSEs,
reconstruction error) get a two-sided gate; the optimization error bound is
one-sided because the bound is not claimed tight.

Reproducibility: trials are processed in fixed-size groups whose generators
are derived by counter-based seeding from ``(seed, group index)``, and group
statistics are reduced with exact compensated summation, so results are
bit-identical for a given seed no matter how groups would be scheduled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .allocation import NoiseAllocation
from .bayesmean import BayesSetting
from .dpmean import DpMeanSetting
from .dpsgd import SgdDerived, SgdSetting

# Group sizes are part of the reproducibility contract; changing them changes
# the random streams.
TRIAL_GROUP = 1024
SGD_TRIAL_GROUP = 256

MIN_TRIALS = 1000


@dataclass
class SimulationResult:
    """Empirical moment with its standard error and analytic reference."""

    empirical_mean: float
    std_error: float
    trials: int
    seed: int
    analytic_reference: float
    z_score: float


@dataclass
class DpMeanSimulation:
    """Per-client estimator-MSE validation for the DP mean protocol.

    The validation distribution is the symmetric two-point law at
    ``true_mean +/- sigma``, whose support width pins the DP constant; when
    the configured support width disagrees with ``2 sigma`` the simulation
    records the override instead of silently mixing parameters.
    """

    per_client: list
    support_width_used: float
    support_overridden: bool


@dataclass
class BayesClientSimulation:
    """Posterior-MSE and reconstruction-MSE validation for one client."""

    posterior: SimulationResult
    reconstruction: SimulationResult


@dataclass
class SgdSimulation:
    """Final-iterate distance validation for the optimization protocol.

    ``result.analytic_reference`` is the error bound evaluated with the
    simulation's own integer round count and batch size; the continuous
    relaxation's value is reported alongside for comparison.
    """

    result: SimulationResult
    rounds: int
    batch_size: int
    bound_integer: float
    bound_continuous: float


@dataclass(frozen=True)
class QuadraticProblem:
    """Diagonal quadratic test objective with a ball-shaped feasible set.

    Eigenvalues must stay inside the setting's curvature band and the
    optimum is kept within half the projection radius, so the unconstrained
    and constrained minima coincide and the feasible diameter matches the
    setting.
    """

    dim: int
    eigenvalues: np.ndarray
    optimum: np.ndarray
    domain_radius: float

    def __post_init__(self):
        eig = np.asarray(self.eigenvalues, dtype=float)
        opt = np.asarray(self.optimum, dtype=float)
        if eig.shape != (self.dim,) or opt.shape != (self.dim,):
            raise ValueError("eigenvalues and optimum must be vectors of length dim")
        if np.any(eig <= 0):
            raise ValueError("eigenvalues must be positive")
        if not (self.domain_radius > 0):
            raise ValueError("domain_radius must be positive")
        if float(np.linalg.norm(opt)) > 0.5 * self.domain_radius * (1 + 1e-12):
            raise ValueError("optimum must lie within half the projection radius")
        object.__setattr__(self, "eigenvalues", eig)
        object.__setattr__(self, "optimum", opt)

    def gradient(self, w: np.ndarray) -> np.ndarray:
        return self.eigenvalues * (w - self.optimum)

    def project(self, w: np.ndarray) -> np.ndarray:
        norms = np.linalg.norm(w, axis=-1, keepdims=True)
        scale = np.minimum(1.0, self.domain_radius / np.maximum(norms, 1e-300))
        return w * scale

    @classmethod
    def canonical(cls, setting: SgdSetting) -> "QuadraticProblem":
        eig = (
            np.linspace(setting.strong_convexity, setting.smoothness, setting.dim)
            if setting.dim > 1
            else np.array([setting.smoothness])
        )
        opt = np.zeros(setting.dim)
        opt[0] = setting.diameter / 4.0
        return cls(setting.dim, eig, opt, setting.diameter / 2.0)

    @classmethod
    def sample(cls, setting: SgdSetting, rng: np.random.Generator) -> "QuadraticProblem":
        eig = rng.uniform(setting.strong_convexity, setting.smoothness, size=setting.dim)
        direction = rng.normal(size=setting.dim)
        direction /= max(np.linalg.norm(direction), 1e-300)
        opt = direction * rng.uniform(0.0, setting.diameter / 4.0)
        return cls(setting.dim, eig, opt, setting.diameter / 2.0)


def _group_rng(seed: int, group: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=(group,)))


def _group_sizes(trials: int, group: int):
    sizes = [group] * (trials // group)
    if trials % group:
        sizes.append(trials % group)
    return sizes


class _MomentAccumulator:
    """Mean and standard error from per-group sums, order-independent.

    Group partial sums are reduced with ``math.fsum`` (exact), so the final
    statistics do not depend on the order groups were processed in.
    """

    def __init__(self, width: int):
        self.sums = [[] for _ in range(width)]
        self.sq_sums = [[] for _ in range(width)]
        self.count = 0

    def add(self, values: np.ndarray) -> None:
        # values: (trials_in_group, width)
        self.count += values.shape[0]
        for j in range(values.shape[1]):
            col = values[:, j]
            self.sums[j].append(float(np.sum(col)))
            self.sq_sums[j].append(float(np.sum(col * col)))

    def result(self, j: int, seed: int, reference: float) -> SimulationResult:
        n = self.count
        s1 = math.fsum(self.sums[j])
        s2 = math.fsum(self.sq_sums[j])
        mean = s1 / n
        var = max(s2 - s1 * s1 / n, 0.0) / max(n - 1, 1)
        se = math.sqrt(var / n)
        z = (mean - reference) / se if se > 0 else math.inf * np.sign(mean - reference) if mean != reference else 0.0
        return SimulationResult(
            empirical_mean=mean,
            std_error=se,
            trials=n,
            seed=seed,
            analytic_reference=reference,
            z_score=float(z),
        )


def _finite_stds(alloc: NoiseAllocation) -> np.ndarray:
    """Noise stds with the share-nothing clients zeroed; their weight is zero anyway."""
    stds = alloc.noise_stds
    return np.where(np.isfinite(stds), stds, 0.0)


def sim_dp_mean(
    setting: DpMeanSetting,
    alloc: NoiseAllocation,
    trials: int,
    seed: int,
    true_mean: float = 0.0,
) -> DpMeanSimulation:
    """Run the noisy-average protocol and validate every client's estimator MSE.

    Each trial draws all clients' samples from the two-point law, forms the
    noisy messages, applies the optimal linear weights (own average weighted
    by the local precision, each other message by its informativeness), and
    compares the squared error against ``1/(gamma_i + rho)``.
    """
    if trials < MIN_TRIALS:
        raise ValueError(f"need at least {MIN_TRIALS} trials, got {trials}")
    if alloc.n_clients != setting.n_clients:
        raise ValueError("allocation size does not match the setting")
    n_clients, n = setting.n_clients, setting.n_samples
    sigma = setting.sigma
    rho = n / sigma**2
    betas = alloc.informativeness
    total = betas.sum()
    gammas = total - betas
    stds = _finite_stds(alloc)
    shared = np.isfinite(alloc.noise_stds)

    acc = _MomentAccumulator(n_clients)
    for g, size in enumerate(_group_sizes(trials, TRIAL_GROUP)):
        rng = _group_rng(seed, g)
        signs = rng.integers(0, 2, size=(size, n_clients, n)).astype(np.float64) * 2.0 - 1.0
        xbar = true_mean + sigma * signs.mean(axis=2)
        noise = rng.standard_normal((size, n_clients))
        messages = xbar + stds * noise
        weighted = betas * messages * shared
        s_all = weighted.sum(axis=1, keepdims=True)
        estimates = (s_all - weighted + rho * xbar) / (gammas + rho)
        acc.add((estimates - true_mean) ** 2)

    per_client = [
        acc.result(i, seed, 1.0 / (gammas[i] + rho)) for i in range(n_clients)
    ]
    width_used = 2.0 * sigma
    return DpMeanSimulation(
        per_client=per_client,
        support_width_used=width_used,
        support_overridden=not math.isclose(setting.support_width, width_used),
    )


def sim_bayes(
    setting: BayesSetting,
    alloc: NoiseAllocation,
    trials: int,
    seed: int,
) -> list:
    """Run the Bayesian sharing protocol; validate posterior and reconstruction MSE.

    Per trial the estimand is drawn from its prior, every client's raw
    points from the sampling law.  Each client's posterior-mean estimate
    combines the others' messages with its own average; the attacker's
    reconstruction of a client's points uses only the messages, predicting
    the same value for every point.  Empirical means are compared against
    the posterior variance and the per-point reconstruction error.
    """
    if trials < MIN_TRIALS:
        raise ValueError(f"need at least {MIN_TRIALS} trials, got {trials}")
    if alloc.n_clients != setting.n_clients:
        raise ValueError("allocation size does not match the setting")
    n_clients, n = setting.n_clients, setting.n_samples
    sigma = setting.sigma
    rho = setting.local_precision
    tau = setting.prior_precision
    betas = alloc.informativeness
    total = betas.sum()
    gammas = total - betas
    stds = _finite_stds(alloc)
    shared = np.isfinite(alloc.noise_stds)

    post_acc = _MomentAccumulator(n_clients)
    recon_acc = _MomentAccumulator(n_clients)
    prior_std = math.sqrt(1.0 / tau)
    for g, size in enumerate(_group_sizes(trials, TRIAL_GROUP)):
        rng = _group_rng(seed, g)
        mu = rng.normal(0.0, prior_std, size=(size, 1))
        x = mu[:, :, None] + sigma * rng.standard_normal((size, n_clients, n))
        xbar = x.mean(axis=2)
        within_ss = ((x - xbar[:, :, None]) ** 2).sum(axis=2)
        noise = rng.standard_normal((size, n_clients))
        messages = xbar + stds * noise
        weighted = betas * messages * shared
        s_all = weighted.sum(axis=1, keepdims=True)
        s_others = s_all - weighted
        posterior = (s_others + rho * xbar) / (gammas + rho + tau)
        post_acc.add((posterior - mu) ** 2)
        # Attacker's best estimate of the client's average from messages only.
        recon_avg = (betas * (gammas + rho + tau) * messages * shared + (rho - betas) * s_others) / (
            rho * (total + tau)
        )
        recon_acc.add((within_ss + n * (recon_avg - xbar) ** 2) / n)

    out = []
    for i in range(n_clients):
        post_ref = 1.0 / (gammas[i] + rho + tau)
        attacker_var = (rho - betas[i]) * (gammas[i] + rho + tau) / (rho**2 * (total + tau))
        recon_ref = sigma**2 * (n - 1) / n + attacker_var
        out.append(
            BayesClientSimulation(
                posterior=post_acc.result(i, seed, post_ref),
                reconstruction=recon_acc.result(i, seed, recon_ref),
            )
        )
    return out


def _sphere_noise(rng: np.random.Generator, shape, radius: float) -> np.ndarray:
    """Uniform draws from the sphere of the given radius (last axis)."""
    z = rng.standard_normal(shape)
    norms = np.linalg.norm(z, axis=-1, keepdims=True)
    return z * (radius / np.maximum(norms, 1e-300))


def step_size_schedule(derived: SgdDerived, rounds: int) -> np.ndarray:
    """Optimal step sizes from the deterministic bound recursion.

    ``eta_t = y/(L (y + 1))`` with ``y`` following the minimized recursion
    ``y <- (1 - chi * y/(y+1)) * y`` from its initial value.
    """
    smoothness = derived.setting.smoothness
    chi = derived.curvature_ratio
    y = derived.initial_error_scale
    etas = np.empty(rounds)
    for t in range(rounds):
        etas[t] = y / (smoothness * (y + 1.0))
        y = (1.0 - chi * y / (y + 1.0)) * y
    return etas


def sim_sgd(
    setting: SgdSetting,
    derived: SgdDerived,
    alloc: NoiseAllocation,
    problem: QuadraticProblem,
    trials: int,
    seed: int,
) -> SgdSimulation:
    """Run the collaborative optimization protocol against the error bound.

    Rounds and batches are the integer versions (``ceil`` of the continuous
    round count, ``floor`` batch), every client resamples its batch order,
    gradient noise is uniform on the sphere of half the support diameter,
    and messages carry the per-client Gaussian privacy noise.  The empirical
    final squared distance must stay below the bound: the acceptance gate is
    one-sided.
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    if alloc.n_clients != setting.n_clients:
        raise ValueError("allocation size does not match the setting")
    if problem.dim != setting.dim:
        raise ValueError("problem dimension does not match the setting")
    eig = problem.eigenvalues
    if np.any(eig < setting.strong_convexity * (1 - 1e-9)) or np.any(eig > setting.smoothness * (1 + 1e-9)):
        raise ValueError("problem eigenvalues leave the setting's curvature band")
    if not math.isclose(problem.domain_radius, setting.diameter / 2.0, rel_tol=1e-9):
        raise ValueError("projection radius must be half the setting diameter")

    rounds = math.ceil(derived.rounds)
    batch = setting.n_samples // rounds
    if batch < 1:
        raise ValueError(f"{rounds} rounds leave no samples per batch (n={setting.n_samples})")
    sigma = setting.sigma
    rho_run = batch / sigma**2
    run_alloc = alloc.rescaled(rho_run, setting.dim)
    betas = run_alloc.informativeness
    total = betas.sum()
    if total <= 0:
        raise ValueError("at least one client must share informative gradients")
    weights = betas / total
    stds = _finite_stds(alloc)
    shared = np.isfinite(alloc.noise_stds)
    noise_radius = setting.grad_support / 2.0

    etas = step_size_schedule(derived, rounds)
    d = setting.dim
    chi = derived.curvature_ratio
    lmu = setting.smoothness * setting.strong_convexity
    bound_int = 1.0 / ((1.0 + chi / (2.0 - chi) * (rounds - derived.rounds)) * lmu * total)
    from .dpsgd import accuracy_bound

    bound_cont = accuracy_bound(derived, alloc.rescaled(derived.local_precision, d), rounds)

    acc = _MomentAccumulator(1)
    w_weights = weights[:, None]
    dp_stds = (stds * shared)[:, None]
    for g, size in enumerate(_group_sizes(trials, SGD_TRIAL_GROUP)):
        rng = _group_rng(seed, g)
        w = _sphere_noise(rng, (size, d), 1.0) * (
            problem.domain_radius * rng.uniform(size=(size, 1)) ** (1.0 / d)
        )
        # Batch orders are resampled per trial; with a single data pass and a
        # fresh oracle draw per use they only fix which points fill each round.
        for t in range(rounds):
            grad = problem.gradient(w)
            point_noise = _sphere_noise(rng, (size, setting.n_clients, batch, d), noise_radius)
            dp_noise = rng.standard_normal((size, setting.n_clients, d)) * dp_stds
            client_noise = point_noise.mean(axis=2) + dp_noise
            agg_noise = (client_noise * w_weights).sum(axis=1)
            w = problem.project(w - etas[t] * (grad + agg_noise))
        acc.add(((w - problem.optimum) ** 2).sum(axis=1, keepdims=True))

    return SgdSimulation(
        result=acc.result(0, seed, bound_int),
        rounds=rounds,
        batch_size=batch,
        bound_integer=bound_int,
        bound_continuous=bound_cont,
    )
