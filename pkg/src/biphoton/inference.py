"""Fisher information, Cramér-Rao quantities and displacement estimators."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .detection import OutcomeDistribution, SplitOutcome
from .errors import DomainError, EmptyInput, ValidationError, WeightError
from .model import BiphotonModel, PhotonPair, correlation_coefficient
from .numerics import DEFAULT_QUADRATURE, QuadratureSpec, integrate_1d

__all__ = [
    "FisherReport",
    "EstimateResult",
    "QFIComponents",
    "fisher_continuous",
    "fisher_marginal",
    "fisher_marginal_split",
    "fisher_split",
    "fisher_ratio",
    "fisher_discrete",
    "fisher_alpha_beta",
    "qfi_components",
    "qfi_numeric",
    "crb_dmin",
    "snr",
    "dmin_alpha_beta",
    "heisenberg_event_bound",
    "split_scale",
    "estimate_mean",
    "estimate_split",
    "estimate_marginal_mle",
    "averaged_marginal_estimator",
    "averaged_marginal_variance",
    "covariance_marginal_estimators",
]

SOURCES = ("analytic", "quadrature", "discrete", "quantum")


@dataclass(frozen=True)
class FisherReport:
    """Fisher information per event (units: length^-2), scaled by ``n_events``.

    ``divergent`` marks a table where some outcome has zero probability but a
    nonzero derivative; ``value`` is then ``inf``.
    """

    value: float
    source: str
    sigma: float | None = None
    epsilon: float | None = None
    d: float | None = None
    n_events: int = 1
    divergent: bool = False

    def __post_init__(self):
        if self.source not in SOURCES:
            raise ValidationError(f"unknown Fisher source {self.source!r}")
        if not self.value >= 0:
            raise ValidationError(f"Fisher information must be >= 0, got {self.value}")

    def __float__(self):
        return float(self.value)


@dataclass(frozen=True)
class EstimateResult:
    """Point estimate with its variance and the Cramér-Rao bound for ``n_events``.

    ``variance`` is the unbiased per-event sample variance divided by the
    number of events, i.e. an estimate of ``Var(estimate)``.
    """

    estimate: float
    variance: float
    crb: float
    n_events: int
    predicted_variance: float | None = field(default=None)

    def efficient(self, tol: float = 0.05) -> bool:
        return self.variance <= self.crb * (1.0 + tol)


def _report(value, source, m=None, n_events=1, divergent=False):
    kw = {}
    if m is not None:
        kw = dict(sigma=m.sigma, epsilon=m.epsilon, d=m.d)
    return FisherReport(value=value, source=source, n_events=n_events, divergent=divergent, **kw)


# -- closed forms ---------------------------------------------------------------


def fisher_continuous(m: BiphotonModel) -> FisherReport:
    """Per-pair information with perfect position resolution: ``4 / eps^2``."""
    m.require_finite_epsilon("fisher_continuous (information is infinite)")
    return _report(4.0 / m.epsilon**2, "analytic", m)


def fisher_marginal(m: BiphotonModel) -> FisherReport:
    """Information in one photon's position alone: ``4 / (eps^2 + sigma^2)``."""
    return _report(4.0 / (m.epsilon**2 + m.sigma**2), "analytic", m)


def fisher_marginal_split(m: BiphotonModel) -> FisherReport:
    """One photon's split-detector information near ``d = 0``: ``8 / (pi (sigma^2 + eps^2))``."""
    return _report(8.0 / (math.pi * (m.epsilon**2 + m.sigma**2)), "analytic", m)


def fisher_split(m: BiphotonModel) -> FisherReport:
    """Split-detection information per pair for ``|d| << eps``.

    ``16 / ((eps^2 + sigma^2)(pi + 2 arcsin xi))``; the arctan form in the
    literature is the same expression since
    ``arctan(eps/2sigma - sigma/2eps) = arcsin xi``.
    """
    m.require_finite_epsilon("fisher_split")
    xi = correlation_coefficient(m)
    value = 16.0 / ((m.epsilon**2 + m.sigma**2) * (math.pi + 2.0 * math.asin(xi)))
    return _report(value, "analytic", m)


def fisher_ratio(m: BiphotonModel, scheme: str = "continuous") -> float:
    """Gain over uncorrelated pairs in the same optical mode."""
    m.require_finite_epsilon("fisher_ratio")
    if scheme == "continuous":
        return m.sigma**2 / m.epsilon**2
    if scheme == "split":
        xi = correlation_coefficient(m)
        return math.pi / (math.pi + 2.0 * math.asin(xi))
    raise ValidationError(f"scheme must be 'continuous' or 'split', got {scheme!r}")


def fisher_discrete(dist: OutcomeDistribution, n_events: int = 1) -> FisherReport:
    """``n_events * sum_k (dP_k)^2 / P_k`` over a complete outcome table."""
    if n_events < 1:
        raise ValidationError(f"n_events must be >= 1, got {n_events}")
    p = dist.probabilities
    dp = dist.derivatives
    live = p > 0
    # a zero probability whose derivative is subnormal is a deep tail that underflowed, not a divergence
    if np.any(~live & (np.abs(dp) >= np.finfo(float).tiny)):
        return FisherReport(value=math.inf, source="discrete", n_events=n_events, divergent=True)
    per_event = float(np.sum(dp[live] ** 2 / p[live]))
    return FisherReport(value=n_events * per_event, source="discrete", n_events=n_events)


def fisher_alpha_beta(alpha: float, beta: float, d: float, nu: int = 1) -> FisherReport:
    """Information of a Bernoulli outcome with success probability ``alpha + beta d``."""
    q = alpha + beta * d
    if not 0.0 <= q < 1.0:
        raise DomainError(f"alpha + beta*d must lie in [0, 1), got {q}")
    if q == 0.0:
        return FisherReport(value=math.inf, source="analytic", n_events=nu, divergent=True)
    return FisherReport(value=beta**2 * nu / (q * (1.0 - q)), source="analytic", n_events=nu)


# -- quantum Fisher information -------------------------------------------------


class QFIComponents(NamedTuple):
    norm: float  # <psi|psi>
    dpsi_norm2: float  # <d psi|d psi>
    overlap: float  # <psi|d psi> (real amplitude)

    @property
    def value(self) -> float:
        return 4.0 * (self.dpsi_norm2 - self.overlap**2)


def qfi_components(m: BiphotonModel, spec: QuadratureSpec = DEFAULT_QUADRATURE) -> QFIComponents:
    """Inner products of the real two-photon amplitude ``sqrt(p)`` and its ``d``-derivative.

    In sum/difference coordinates the amplitude is ``a(u) b(v) / sqrt(2)``
    with Gaussian factors; only ``a`` depends on ``d`` and is differentiated
    analytically. The remaining integrals are done by quadrature.
    """
    m.require_finite_epsilon("qfi_numeric")
    eps, sig, d = m.epsilon, m.sigma, m.d

    def a(u):
        return (2.0 * math.pi * eps**2) ** -0.25 * np.exp(-((u - 2 * d) ** 2) / (4 * eps**2))

    def da(u):
        return a(u) * (u - 2 * d) / eps**2

    def b(v):
        return (2.0 * math.pi * sig**2) ** -0.25 * np.exp(-(v**2) / (4 * sig**2))

    u_pts = [2 * d]
    inf = math.inf
    # dx1 dx2 = du dv / 2 cancels the 1/2 from squaring a(u) b(v) / sqrt(2)
    norm_v = integrate_1d(lambda v: b(v) ** 2, -inf, inf, spec, [0.0])
    norm_u = integrate_1d(lambda u: a(u) ** 2, -inf, inf, spec, u_pts)
    dd_u = integrate_1d(lambda u: da(u) ** 2, -inf, inf, spec, u_pts)
    ov_u = integrate_1d(lambda u: a(u) * da(u), -inf, inf, spec, u_pts)
    return QFIComponents(norm=norm_u * norm_v, dpsi_norm2=dd_u * norm_v, overlap=ov_u * norm_v)


def qfi_numeric(m: BiphotonModel, spec: QuadratureSpec = DEFAULT_QUADRATURE) -> FisherReport:
    return _report(qfi_components(m, spec).value, "quantum", m)


# -- resolution -----------------------------------------------------------------


def crb_dmin(fisher_per_event: float, nu: float) -> float:
    """Smallest resolvable displacement ``1 / sqrt(nu I)`` for an efficient estimator."""
    if not (fisher_per_event > 0 and nu >= 1):
        raise DomainError("need fisher_per_event > 0 and nu >= 1")
    return 1.0 / math.sqrt(nu * fisher_per_event)


def snr(d: float, fisher_total: float) -> float:
    """Signal-to-noise ratio ``d sqrt(I)`` of an efficient estimate."""
    if fisher_total < 0:
        raise DomainError(f"fisher_total must be >= 0, got {fisher_total}")
    return d * math.sqrt(fisher_total)


def dmin_alpha_beta(alpha: float, beta: float, nu: float) -> float:
    """SNR = 1 displacement for the ``alpha + beta d`` success model (``nu >> 1``)."""
    if not (0.0 <= alpha < 1.0 and beta > 0 and nu > 0):
        raise DomainError(f"invalid alpha={alpha}, beta={beta}, nu={nu}")
    c = 1.0 - 2.0 * alpha
    return (c + math.sqrt(c * c + 4.0 * alpha * (1.0 - alpha) * nu)) / (2.0 * beta * nu)


def heisenberg_event_bound(m: BiphotonModel) -> float:
    """Event count ``pi sigma / (4 eps)`` below which resolution scales as ``1/nu``."""
    if m.is_delta_limit:
        return math.inf
    return math.pi * m.sigma / (4.0 * m.epsilon)


# -- estimators -----------------------------------------------------------------


def split_scale(m: BiphotonModel) -> float:
    """Factor ``sqrt(pi (sigma^2 + eps^2) / 8)`` converting count asymmetry to displacement."""
    return math.sqrt(math.pi * (m.sigma**2 + m.epsilon**2) / 8.0)


def _as_arrays(pairs):
    if isinstance(pairs, tuple) and len(pairs) == 2 and not isinstance(pairs[0], PhotonPair):
        x1, x2 = (np.asarray(a, dtype=float) for a in pairs)
    else:
        arr = np.array([(p.x1, p.x2) for p in pairs], dtype=float).reshape(-1, 2)
        x1, x2 = arr[:, 0], arr[:, 1]
    return x1, x2


def estimate_mean(pairs, m: BiphotonModel | None = None) -> EstimateResult:
    """Average photon position ``(x1 + x2) / 2`` over all pairs.

    ``pairs`` is a sequence of :class:`PhotonPair` or a tuple of two arrays.
    The bound ``eps^2 / (4 nu)`` is reported when a model is supplied.
    """
    x1, x2 = _as_arrays(pairs)
    n = x1.size
    if n == 0:
        raise EmptyInput("estimate_mean needs at least one pair")
    per_pair = 0.5 * (x1 + x2)
    var = float(np.var(per_pair, ddof=1)) / n if n > 1 else 0.0
    crb = m.epsilon**2 / (4.0 * n) if m is not None else math.nan
    return EstimateResult(float(np.mean(per_pair)), var, crb, n)


def _counts3(counts):
    if isinstance(counts, dict):
        return (counts.get(SplitOutcome.MINUS_TWO, 0), counts.get(SplitOutcome.ZERO, 0),
                counts.get(SplitOutcome.PLUS_TWO, 0))
    n_minus, n_zero, n_plus = counts
    return int(n_minus), int(n_zero), int(n_plus)


def estimate_split(counts, m: BiphotonModel) -> EstimateResult:
    """Scaled split-detection estimate from outcome counts ``(n_-2, n_0, n_+2)``."""
    n_minus, n_zero, n_plus = _counts3(counts)
    nu = n_minus + n_zero + n_plus
    if nu < 1:
        raise EmptyInput("estimate_split needs at least one event")
    m.require_finite_epsilon("estimate_split")
    c = split_scale(m)
    est = c * (n_plus - n_minus) / nu
    if nu > 1:
        s2 = (c * c * (n_plus + n_minus) - nu * est * est) / (nu - 1)
    else:
        s2 = 0.0
    crb = 1.0 / (nu * fisher_split(m).value)
    return EstimateResult(est, max(s2, 0.0) / nu, crb, nu)


def _marginal(n_plus, n_minus, m):
    n = n_plus + n_minus
    if n < 1:
        raise EmptyInput("marginal estimator needs at least one photon")
    c = split_scale(m)
    est = c * (n_plus - n_minus) / n
    s2 = (c * c * n - n * est * est) / (n - 1) if n > 1 else 0.0
    return est, max(s2, 0.0) / n, n


def estimate_marginal_mle(n_plus: int, n_minus: int, m: BiphotonModel) -> EstimateResult:
    """Split-detector MLE from one photon's marginal counts."""
    est, var, n = _marginal(n_plus, n_minus, m)
    crb = 1.0 / (n * fisher_marginal_split(m).value)
    return EstimateResult(est, var, crb, n)


def averaged_marginal_variance(m: BiphotonModel, n_events: int, w1: float, w2: float) -> float:
    """Predicted variance of ``w1 d1 + w2 d2`` (small-``d`` expansion)."""
    xi = correlation_coefficient(m)
    base = math.pi * (m.sigma**2 + m.epsilon**2) / (8.0 * n_events)
    return base * (1.0 - 2.0 * w1 * w2 * (1.0 - (2.0 / math.pi) * math.asin(xi)))


def averaged_marginal_estimator(
    counts4: Sequence[int], m: BiphotonModel, w1: float = 0.5, w2: float = 0.5
) -> EstimateResult:
    """Weighted average of the two single-photon marginal estimates.

    ``counts4 = (N_pp, N_pm, N_mp, N_mm)``, the first sign referring to photon 1.
    Weights only need to sum to one. ``crb`` is the inverse split-detection
    information; ``predicted_variance`` comes from the closed form.
    """
    if not math.isclose(w1 + w2, 1.0, rel_tol=0.0, abs_tol=1e-12):
        raise WeightError(f"weights must sum to 1, got {w1} + {w2}")
    n_pp, n_pm, n_mp, n_mm = (int(k) for k in counts4)
    n = n_pp + n_pm + n_mp + n_mm
    if n < 1:
        raise EmptyInput("averaged_marginal_estimator needs at least one pair")
    c = split_scale(m)
    d1 = c * ((n_pp + n_pm) - (n_mp + n_mm)) / n
    d2 = c * ((n_pp + n_mp) - (n_pm + n_mm)) / n
    est = w1 * d1 + w2 * d2
    # per-pair contribution c (w1 s1 + w2 s2) with s_k = +-1
    values = c * np.array([w1 + w2, w1 - w2, -w1 + w2, -w1 - w2])
    weights = np.array([n_pp, n_pm, n_mp, n_mm], dtype=float)
    if n > 1:
        s2 = (weights @ (values - est) ** 2) / (n - 1)
    else:
        s2 = 0.0
    xi = correlation_coefficient(m)
    crb = (m.sigma**2 + m.epsilon**2) * (math.pi + 2 * math.asin(xi)) / (16.0 * n)
    return EstimateResult(est, float(s2) / n, crb, n, predicted_variance=averaged_marginal_variance(m, n, w1, w2))


def covariance_marginal_estimators(m: BiphotonModel, n_events: int) -> float:
    """``Cov(d1, d2) = (sigma^2 + eps^2) arcsin(xi) / (4 N)``."""
    if n_events < 1:
        raise ValidationError(f"n_events must be >= 1, got {n_events}")
    return (m.sigma**2 + m.epsilon**2) * math.asin(correlation_coefficient(m)) / (4.0 * n_events)
