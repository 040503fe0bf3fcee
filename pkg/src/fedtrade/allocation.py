"""Per-client noise allocations in both natural parameterizations.

A protocol assigns every client a Gaussian noise standard deviation
``alpha_i`` for their shared message.  The analysis works in terms of the
message "informativeness" ``beta_i = 1 / (1/rho + scale * alpha_i**2)``,
which lives in ``[0, rho]``: zero noise gives the full local precision
``rho``, infinite noise gives zero.  ``scale`` is 1 for scalar mean
estimation and the problem dimension for gradient messages.  Instances keep
both vectors consistent at all times.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_ROUNDTRIP_RTOL = 1e-12


@dataclass(frozen=True)
class NoiseAllocation:
    """Immutable per-client noise assignment.

    ``noise_stds`` may contain ``inf`` (client shares nothing) and ``0.0``
    (client shares its raw local estimate); ``informativeness`` mirrors those
    as ``0`` and ``local_precision``.
    """

    noise_stds: np.ndarray
    informativeness: np.ndarray
    local_precision: float
    noise_scale: float = 1.0

    def __post_init__(self):
        a = np.asarray(self.noise_stds, dtype=float)
        b = np.asarray(self.informativeness, dtype=float)
        if a.shape != b.shape or a.ndim != 1 or a.size < 1:
            raise ValueError("noise_stds and informativeness must be matching 1-d vectors")
        if np.any(np.isnan(a)) or np.any(a < 0):
            raise ValueError("noise stds must be >= 0 (inf allowed)")
        rho = self.local_precision
        if not (np.isfinite(rho) and rho > 0):
            raise ValueError(f"local_precision must be finite and > 0, got {rho}")
        if not (np.isfinite(self.noise_scale) and self.noise_scale > 0):
            raise ValueError(f"noise_scale must be finite and > 0, got {self.noise_scale}")
        if np.any(b < 0) or np.any(b > rho * (1 + 1e-12)):
            raise ValueError(f"informativeness must lie in [0, {rho}]")
        object.__setattr__(self, "noise_stds", a)
        object.__setattr__(self, "informativeness", np.minimum(b, rho))

    @classmethod
    def from_noise_stds(cls, stds, local_precision: float, noise_scale: float = 1.0) -> "NoiseAllocation":
        a = np.asarray(stds, dtype=float)
        with np.errstate(divide="ignore"):
            b = np.where(np.isinf(a), 0.0, 1.0 / (1.0 / local_precision + noise_scale * a**2))
        return cls(a, b, local_precision, noise_scale)

    @classmethod
    def from_informativeness(cls, betas, local_precision: float, noise_scale: float = 1.0) -> "NoiseAllocation":
        b = np.asarray(betas, dtype=float)
        with np.errstate(divide="ignore"):
            inv_gap = np.where(b > 0, 1.0 / b - 1.0 / local_precision, np.inf)
        a = np.sqrt(np.maximum(inv_gap, 0.0) / noise_scale)
        return cls(a, b, local_precision, noise_scale)

    @property
    def n_clients(self) -> int:
        return self.noise_stds.size

    @property
    def total(self) -> float:
        """Total informativeness of all messages (the server's accuracy driver)."""
        return float(self.informativeness.sum())

    def others(self, i: int) -> float:
        """Total informativeness of everyone except client ``i``."""
        if not 0 <= i < self.n_clients:
            raise IndexError(f"client index {i} out of range [0, {self.n_clients})")
        return float(self.informativeness.sum() - self.informativeness[i])

    def rescaled(self, local_precision: float, noise_scale: float | None = None) -> "NoiseAllocation":
        """Same noise stds reinterpreted under a different precision/scale."""
        scale = self.noise_scale if noise_scale is None else noise_scale
        return NoiseAllocation.from_noise_stds(self.noise_stds, local_precision, scale)
