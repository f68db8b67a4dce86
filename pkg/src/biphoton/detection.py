"""Detector outcome models: split detection and homogeneous N-pixel arrays.

Outcome tables carry probabilities together with their derivatives in ``d``.
Derivatives are exact: displacing the beam translates both photon means by the
same amount, so ``dP/dd`` of any rectangle is a sum of edge fluxes with closed
forms (see :func:`biphoton.numerics.bvn_rect_grad`).
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import special

from .errors import ApproximationWarning, DomainError, ValidationError
from .model import BiphotonModel, PhotonPair, correlation_coefficient, marginal_std
from .numerics import (
    BREAKPOINT_LADDER,
    DEFAULT_QUADRATURE,
    QuadratureSpec,
    Rect,
    bvn_rect_grad,
    bvn_rect_prob,
    integrate_1d,
    normal_interval,
)

__all__ = [
    "SplitOutcome",
    "PixelDetector",
    "CoincidenceBin",
    "MISS",
    "OutcomeDistribution",
    "classify_split",
    "classify_split_array",
    "classify_pixels",
    "classify_pixels_array",
    "split_probabilities_exact",
    "split_probabilities_linearized",
    "split_probabilities_delta",
    "split_probabilities",
    "pixel_probabilities",
    "alpha_beta_linearization",
    "split_slope",
]

_SQRT_2PI = math.sqrt(2.0 * math.pi)


class SplitOutcome(enum.IntEnum):
    """Net split-detector signal of one event."""

    MINUS_TWO = -2
    ZERO = 0
    PLUS_TWO = 2

    @property
    def label(self) -> str:
        return {-2: "-2", 0: "0", 2: "+2"}[int(self)]


@dataclass(frozen=True)
class PixelDetector:
    """Gapless detector of ``n_pixels`` equal pixels centred on ``x = 0``."""

    n_pixels: int
    extent: float = 10.0

    def __post_init__(self):
        if int(self.n_pixels) != self.n_pixels or self.n_pixels < 2:
            raise ValidationError(f"n_pixels must be an integer >= 2, got {self.n_pixels}")
        if not (math.isfinite(self.extent) and self.extent > 0):
            raise ValidationError(f"extent must be finite and > 0, got {self.extent}")

    @property
    def pixel_width(self) -> float:
        return self.extent / self.n_pixels

    @property
    def edges(self) -> np.ndarray:
        half = 0.5 * self.extent
        return np.linspace(-half, half, self.n_pixels + 1)


@dataclass(frozen=True)
class CoincidenceBin:
    """Unordered pixel pair ``i <= j`` (1-based); ``(0, 0)`` encodes a miss."""

    i: int
    j: int

    @property
    def is_miss(self) -> bool:
        return self.i == 0

    @property
    def label(self) -> str:
        return "miss" if self.is_miss else f"{self.i},{self.j}"


MISS = CoincidenceBin(0, 0)


class OutcomeDistribution:
    """Immutable table of outcome labels, probabilities and ``d``-derivatives."""

    __slots__ = ("labels", "probabilities", "derivatives", "_index")

    def __init__(self, labels: Sequence[str], probabilities, derivatives, *, check: bool = True):
        p = np.array(probabilities, dtype=float)
        dp = np.array(derivatives, dtype=float)
        if p.shape != (len(labels),) or dp.shape != p.shape:
            raise ValidationError("labels, probabilities and derivatives must align")
        if check:
            if np.any(p < -1e-12):
                raise DomainError(f"negative outcome probability {p.min():.3g}")
            if abs(p.sum() - 1.0) > 1e-9:
                raise ValidationError(f"probabilities sum to {p.sum():.15g}, not 1")
            if abs(dp.sum()) > 1e-7:
                raise ValidationError(f"derivatives sum to {dp.sum():.3g}, not 0")
            p = np.clip(p, 0.0, None)
        p.flags.writeable = False
        dp.flags.writeable = False
        object.__setattr__(self, "labels", tuple(labels))
        object.__setattr__(self, "probabilities", p)
        object.__setattr__(self, "derivatives", dp)
        object.__setattr__(self, "_index", {k: n for n, k in enumerate(self.labels)})

    def __setattr__(self, name, value):
        raise AttributeError("OutcomeDistribution is immutable")

    def __len__(self):
        return len(self.labels)

    def __repr__(self):
        body = ", ".join(f"{k}: {p:.6g}" for k, p in zip(self.labels, self.probabilities))
        return f"OutcomeDistribution({body})"

    @property
    def outcomes(self) -> list[tuple[str, float, float]]:
        return list(zip(self.labels, self.probabilities.tolist(), self.derivatives.tolist()))

    def prob(self, label: str) -> float:
        return float(self.probabilities[self._index[label]])

    def deriv(self, label: str) -> float:
        return float(self.derivatives[self._index[label]])


# -- event classification ---------------------------------------------------


def classify_split(pair: PhotonPair) -> SplitOutcome:
    """Split-detector outcome; a photon exactly at ``x = 0`` counts as right."""
    right1, right2 = pair.x1 >= 0, pair.x2 >= 0
    if right1 and right2:
        return SplitOutcome.PLUS_TWO
    if not right1 and not right2:
        return SplitOutcome.MINUS_TWO
    return SplitOutcome.ZERO


def classify_split_array(x1, x2) -> np.ndarray:
    """Vectorized :func:`classify_split`; returns an int array of -2/0/+2."""
    r1 = np.asarray(x1) >= 0
    r2 = np.asarray(x2) >= 0
    return (r1.astype(np.int8) + r2.astype(np.int8) - 1) * 2


def _pixel_index(x, det: PixelDetector):
    half = 0.5 * det.extent
    x = np.asarray(x, dtype=float)
    inside = (x >= -half) & (x < half)
    idx = np.floor((x + half) / det.pixel_width).astype(np.int64) + 1
    idx = np.clip(idx, 1, det.n_pixels)
    return np.where(inside, idx, 0)


def classify_pixels(pair: PhotonPair, det: PixelDetector) -> CoincidenceBin:
    """Coincidence bin of one event; pixels are left-closed, right-open."""
    a = int(_pixel_index(pair.x1, det))
    b = int(_pixel_index(pair.x2, det))
    if a == 0 or b == 0:
        return MISS
    return CoincidenceBin(min(a, b), max(a, b))


def classify_pixels_array(x1, x2, det: PixelDetector):
    """Vectorized :func:`classify_pixels`; returns ``(i, j)`` arrays, zeros for misses."""
    a = _pixel_index(x1, det)
    b = _pixel_index(x2, det)
    miss = (a == 0) | (b == 0)
    i = np.where(miss, 0, np.minimum(a, b))
    j = np.where(miss, 0, np.maximum(a, b))
    return i, j


# -- split detection ----------------------------------------------------------

_SPLIT_LABELS = ("-2", "0", "+2")


def split_slope(m: BiphotonModel) -> float:
    """``dP(+2)/dd`` at ``d = 0`` for finite epsilon: ``sqrt(2 / (pi (sigma^2 + eps^2)))``."""
    return math.sqrt(2.0 / (math.pi * (m.sigma**2 + m.epsilon**2)))


def _arctan_term(m: BiphotonModel) -> float:
    return math.atan(m.epsilon / (2 * m.sigma) - m.sigma / (2 * m.epsilon))


def split_probabilities_exact(
    m: BiphotonModel, spec: QuadratureSpec = DEFAULT_QUADRATURE
) -> OutcomeDistribution:
    m.require_finite_epsilon("split_probabilities_exact")
    s = marginal_std(m)
    rho = correlation_coefficient(m)
    both_right = Rect(0.0, math.inf, 0.0, math.inf)
    both_left = Rect(-math.inf, 0.0, -math.inf, 0.0)
    p_plus = bvn_rect_prob(m.d, m.d, s, s, rho, both_right, spec)
    p_minus = bvn_rect_prob(m.d, m.d, s, s, rho, both_left, spec)
    dp_plus = sum(bvn_rect_grad(m.d, m.d, s, s, rho, both_right))
    dp_minus = sum(bvn_rect_grad(m.d, m.d, s, s, rho, both_left))
    return OutcomeDistribution(
        _SPLIT_LABELS,
        [p_minus, 1.0 - p_minus - p_plus, p_plus],
        [dp_minus, -(dp_minus + dp_plus), dp_plus],
    )


def split_probabilities_linearized(m: BiphotonModel) -> OutcomeDistribution:
    """First-order expansion in ``d``, valid for ``|d| << epsilon``."""
    m.require_finite_epsilon("split_probabilities_linearized")
    in_regime = abs(m.d) < m.epsilon
    if not in_regime:
        warnings.warn(
            f"linearized split probabilities need |d| << epsilon (d={m.d}, epsilon={m.epsilon})",
            ApproximationWarning,
            stacklevel=2,
        )
    base = 0.25 + _arctan_term(m) / (2 * math.pi)
    slope = split_slope(m)
    return OutcomeDistribution(
        _SPLIT_LABELS,
        [base - slope * m.d, 0.5 - _arctan_term(m) / math.pi, base + slope * m.d],
        [-slope, 0.0, slope],
        check=in_regime,  # outside the regime the raw expansion may leave [0, 1]
    )


def split_probabilities_delta(sigma: float, d: float) -> OutcomeDistribution:
    """Exact split table for perfectly correlated pairs (``epsilon = 0``).

    Both photons sit symmetrically about ``d``, so they share a side only when
    their separation is below ``2|d|``. ``d = 0`` is treated as the right-hand
    branch, matching the boundary convention of :func:`classify_split`.
    """
    if not sigma > 0:
        raise ValidationError(f"sigma must be > 0, got {sigma}")
    p = math.erf(math.sqrt(2.0) * abs(d) / sigma)
    slope = 2.0 * math.sqrt(2.0) / (sigma * math.sqrt(math.pi)) * math.exp(-2.0 * d * d / sigma**2)
    if d >= 0:
        probs, derivs = [0.0, 1.0 - p, p], [0.0, -slope, slope]
    else:
        probs, derivs = [p, 1.0 - p, 0.0], [-slope, slope, 0.0]
    return OutcomeDistribution(_SPLIT_LABELS, probs, derivs)


def split_probabilities(m: BiphotonModel, spec: QuadratureSpec = DEFAULT_QUADRATURE) -> OutcomeDistribution:
    """Exact split table, dispatching to the closed form when ``epsilon = 0``."""
    if m.is_delta_limit:
        return split_probabilities_delta(m.sigma, m.d)
    return split_probabilities_exact(m, spec)


def alpha_beta_linearization(m: BiphotonModel) -> tuple[float, float]:
    """Offset and slope of ``P(+2 | d) ~ alpha + beta d``.

    For ``epsilon = 0`` the offset vanishes and the slope is that of the
    delta-limit table.
    """
    if m.is_delta_limit:
        return 0.0, 2.0 * math.sqrt(2.0) / (m.sigma * math.sqrt(math.pi))
    xi = correlation_coefficient(m)
    return 0.25 + math.asin(xi) / (2 * math.pi), split_slope(m)


# -- N-pixel detection --------------------------------------------------------


def pixel_probabilities(
    m: BiphotonModel, det: PixelDetector, spec: QuadratureSpec = DEFAULT_QUADRATURE
) -> OutcomeDistribution:
    """Coincidence table ``P_ij`` (``i <= j``) plus an explicit miss outcome.

    The cell matrix ``R[a, b] = P(x1 in cell a, x2 in cell b)`` is built one
    x-pixel strip at a time as a vector-valued 1-D integral over that strip.
    Exchange symmetry of the density gives ``P_ij = 2 R[i, j]`` off the
    diagonal.
    """
    m.require_finite_epsilon("pixel_probabilities")
    n = det.n_pixels
    d = m.d
    s = marginal_std(m)
    rho = correlation_coefficient(m)
    # sd of one photon given the other: eps sigma / sqrt(eps^2 + sigma^2)
    s_cond = m.epsilon * m.sigma / math.hypot(m.epsilon, m.sigma)
    edges = det.edges
    cells = np.concatenate([[-np.inf], edges, [np.inf]])  # n + 2 cells

    def strip(x):
        mean = d + rho * (x - d)
        z = (cells[:, None] - mean[None, :]) / s_cond
        window = normal_interval(z[:-1], z[1:])
        return np.exp(-0.5 * ((x - d) / s) ** 2) / (s * _SQRT_2PI) * window

    crossings = d + (edges - d) / rho if rho != 0 else np.array([])
    # windows switch on over s_cond/|rho|; see bvn_rect_prob for the ladder
    width = min(s, s_cond / abs(rho)) if rho != 0 else s
    offsets = width * np.concatenate([[0.0], BREAKPOINT_LADDER, -np.asarray(BREAKPOINT_LADDER)])
    R = np.empty((n, n + 2))
    for i in range(n):
        lo, hi = edges[i], edges[i + 1]
        anchors = np.concatenate([[lo, hi], crossings[(crossings > lo - 16 * width) & (crossings < hi + 16 * width)]])
        cand = (anchors[:, None] + offsets[None, :]).ravel()
        pts = [d, *cand[(cand > lo) & (cand < hi)]]
        R[i] = integrate_1d(strip, lo, hi, spec, pts)

    # dR/dmu1 on every (x-cell, y-cell) pair from fluxes through the x-edges
    z_edge = (edges - d) / s
    flux_density = np.exp(-0.5 * z_edge**2) / (s * _SQRT_2PI)
    mean_at_edge = d + rho * (edges - d)
    zc = (cells[:, None] - mean_at_edge[None, :]) / s_cond
    G = (flux_density[None, :] * normal_interval(zc[:-1], zc[1:])).T  # (n+1, n+2)
    D = np.zeros((n + 2, n + 2))
    D[1:-1, :] = G[:-1] - G[1:]
    D[0, :] = -G[0]
    D[-1, :] = G[-1]
    dR = D + D.T  # both means move with d; symmetry swaps the roles

    inner = R[:, 1:-1]
    dinner = dR[1:-1, 1:-1]
    iu, ju = np.triu_indices(n)
    probs = np.where(iu == ju, inner[iu, ju], 2.0 * inner[iu, ju])
    derivs = np.where(iu == ju, dinner[iu, ju], 2.0 * dinner[iu, ju])

    half = 0.5 * det.extent
    x_out = special.ndtr((-half - d) / s) + special.ndtr((d - half) / s)
    p_miss = float(x_out + R[:, 0].sum() + R[:, -1].sum())
    square = Rect(-half, half, -half, half)
    dp_miss = -sum(bvn_rect_grad(d, d, s, s, rho, square))

    labels = [f"{a + 1},{b + 1}" for a, b in zip(iu, ju)] + [MISS.label]
    return OutcomeDistribution(
        labels,
        np.append(probs, p_miss),
        np.append(derivs, dp_miss),
    )
