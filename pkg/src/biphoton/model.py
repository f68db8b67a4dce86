"""Biphoton joint distribution, its marginals, and seeded event sampling.

The joint transverse density of the two photons is

    p(x1, x2 | d) = 1/(pi sigma eps) exp(-(x1 - x2)^2 / 2 sigma^2)
                                      exp(-(x1 + x2 - 2d)^2 / 2 eps^2)

In sum/difference coordinates ``u = x1 + x2`` and ``v = x1 - x2`` it factorizes
into ``u ~ N(2d, eps^2)`` and ``v ~ N(0, sigma^2)``; sampling and several
closed forms below use that decomposition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .errors import DeltaLimit, ValidationError

__all__ = [
    "BiphotonModel",
    "PhotonPair",
    "SumDiffDecomposition",
    "make_stream",
    "joint_pdf",
    "marginal_pdf",
    "marginal_std",
    "correlation_coefficient",
    "sample_pair",
    "sample_pairs",
    "iter_pairs",
    "epsilon_min",
    "classical_resource_equivalent",
]


@dataclass(frozen=True)
class BiphotonModel:
    """Parameters of the biphoton position distribution.

    ``sigma`` is the pump beam waist (spread of ``x1 - x2``), ``epsilon`` the
    correlation width (spread of ``x1 + x2``), ``d`` the displacement. All
    three share one length unit. ``epsilon == 0`` is the delta-correlated
    limit.
    """

    sigma: float = 1.0
    epsilon: float = 1.0
    d: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.sigma) and self.sigma > 0):
            raise ValidationError(f"sigma must be finite and > 0, got {self.sigma}")
        if not (math.isfinite(self.epsilon) and self.epsilon >= 0):
            raise ValidationError(f"epsilon must be finite and >= 0, got {self.epsilon}")
        if not math.isfinite(self.d):
            raise ValidationError(f"d must be finite, got {self.d}")

    @property
    def is_delta_limit(self) -> bool:
        return self.epsilon == 0.0

    def with_d(self, d: float) -> "BiphotonModel":
        return BiphotonModel(self.sigma, self.epsilon, d)

    def require_finite_epsilon(self, what: str) -> None:
        if self.is_delta_limit:
            raise DeltaLimit(f"{what} is undefined for epsilon = 0; use the delta-limit API")


@dataclass(frozen=True)
class PhotonPair:
    x1: float
    x2: float

    def __post_init__(self):
        if not (math.isfinite(self.x1) and math.isfinite(self.x2)):
            raise ValidationError(f"photon positions must be finite, got {self}")


@dataclass(frozen=True)
class SumDiffDecomposition:
    """Independent normal laws of ``u = x1 + x2`` and ``v = x1 - x2``."""

    u_mean: float
    u_std: float
    v_mean: float
    v_std: float

    @classmethod
    def of(cls, m: BiphotonModel) -> "SumDiffDecomposition":
        return cls(u_mean=2.0 * m.d, u_std=m.epsilon, v_mean=0.0, v_std=m.sigma)

    @staticmethod
    def reconstruct(u, v):
        return 0.5 * (u + v), 0.5 * (u - v)


def make_stream(seed: int, *key: int) -> np.random.Generator:
    """Counter-based (Philox) generator for substream ``key`` of ``seed``.

    Streams with distinct keys are statistically independent, so a trial can
    be regenerated on its own without replaying its predecessors.
    """
    if seed is None:
        raise ValidationError("an explicit seed is required")
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def joint_pdf(m: BiphotonModel, x1, x2):
    m.require_finite_epsilon("joint_pdf")
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    expo = -((x1 - x2) ** 2) / (2 * m.sigma**2) - (x1 + x2 - 2 * m.d) ** 2 / (2 * m.epsilon**2)
    out = np.exp(expo) / (math.pi * m.sigma * m.epsilon)
    return float(out) if out.ndim == 0 else out


def marginal_std(m: BiphotonModel) -> float:
    """Standard deviation of either photon's position, ``sqrt(eps^2 + sigma^2) / 2``."""
    return 0.5 * math.hypot(m.epsilon, m.sigma)


def marginal_pdf(m: BiphotonModel, x):
    s2 = m.epsilon**2 + m.sigma**2
    x = np.asarray(x, dtype=float)
    out = math.sqrt(2.0 / (math.pi * s2)) * np.exp(-2.0 * (x - m.d) ** 2 / s2)
    return float(out) if out.ndim == 0 else out


def correlation_coefficient(m: BiphotonModel) -> float:
    e2, s2 = m.epsilon**2, m.sigma**2
    return (e2 - s2) / (e2 + s2)


def sample_pairs(m: BiphotonModel, n: int, rng: np.random.Generator):
    """Draw ``n`` coincidence events; returns arrays ``(x1, x2)``."""
    u = 2.0 * m.d + m.epsilon * rng.standard_normal(n)
    v = m.sigma * rng.standard_normal(n)
    return SumDiffDecomposition.reconstruct(u, v)


def sample_pair(m: BiphotonModel, rng: np.random.Generator) -> PhotonPair:
    x1, x2 = sample_pairs(m, 1, rng)
    return PhotonPair(float(x1[0]), float(x2[0]))


def iter_pairs(m: BiphotonModel, n: int, rng: np.random.Generator, chunk: int = 65536) -> Iterator[PhotonPair]:
    """Stream ``n`` events as :class:`PhotonPair` objects, drawing in chunks."""
    remaining = n
    while remaining > 0:
        k = min(chunk, remaining)
        x1, x2 = sample_pairs(m, k, rng)
        for a, b in zip(x1.tolist(), x2.tolist()):
            yield PhotonPair(a, b)
        remaining -= k


def epsilon_min(crystal_width: float, pump_wavelength: float) -> float:
    """Smallest attainable correlation width set by the pair birth zone."""
    if crystal_width < 0 or not pump_wavelength > 0:
        raise ValidationError("need crystal_width >= 0 and pump_wavelength > 0")
    return math.sqrt(9.0 * crystal_width * pump_wavelength / (10.0 * math.pi))


def classical_resource_equivalent(nu: float, m: BiphotonModel) -> float:
    """Number of independent uncorrelated photons matching ``nu`` biphotons.

    Real-valued; round up at the call site if an integer count is needed.
    """
    m.require_finite_epsilon("classical_resource_equivalent")
    return 2.0 * nu * m.sigma**2 / m.epsilon**2
