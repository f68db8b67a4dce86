"""Special functions and adaptive quadrature.

Everything here is pure and reentrant. Integrands passed to
:func:`integrate_1d` must accept a 1-D array of abscissae and return either an
array of the same length or an array of shape ``(k, n)`` for a vector-valued
integral of ``k`` components.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import special

from .errors import NonConvergence, ValidationError

__all__ = [
    "QuadratureSpec",
    "Rect",
    "DEFAULT_QUADRATURE",
    "erf",
    "normal_interval",
    "integrate_1d",
    "bvn_rect_prob",
    "bvn_rect_grad",
]


@dataclass(frozen=True)
class QuadratureSpec:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-13
    max_subdivisions: int = 200

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise ValidationError(f"rel_tol must be > 0, got {self.rel_tol}")
        if not self.abs_tol >= 0:
            raise ValidationError(f"abs_tol must be >= 0, got {self.abs_tol}")
        if self.max_subdivisions < 1:
            raise ValidationError(
                f"max_subdivisions must be >= 1, got {self.max_subdivisions}"
            )


DEFAULT_QUADRATURE = QuadratureSpec()


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle ``[x_lo, x_hi] x [y_lo, y_hi]``; bounds may be infinite."""

    x_lo: float
    x_hi: float
    y_lo: float
    y_hi: float

    def __post_init__(self):
        if not (self.x_lo < self.x_hi and self.y_lo < self.y_hi):
            raise ValidationError(f"degenerate rectangle {self}")

    @classmethod
    def plane(cls) -> "Rect":
        return cls(-math.inf, math.inf, -math.inf, math.inf)


def erf(x: float) -> float:
    """Error function (total on the reals, odd, bounded by 1)."""
    return math.erf(x)


def normal_interval(a, b):
    """``Phi(b) - Phi(a)`` for standard normal, accurate in both tails."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    upper = special.ndtr(-a) - special.ndtr(-b)
    lower = special.ndtr(b) - special.ndtr(a)
    return np.where(a > 0, upper, lower)


# Gauss-Kronrod 21-point rule; Gauss 10-point nodes are the odd entries.
_GK_NODES = np.array([
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.0,
])
_GK_NODES = np.concatenate([_GK_NODES, -_GK_NODES[-2::-1]])
_K_WEIGHTS = np.array([
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077958109831074,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
])
_K_WEIGHTS = np.concatenate([_K_WEIGHTS, _K_WEIGHTS[-2::-1]])
_G_WEIGHTS_HALF = np.array([
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
])
_G_WEIGHTS = np.zeros(21)
_G_WEIGHTS[1:10:2] = _G_WEIGHTS_HALF
_G_WEIGHTS[11:20:2] = _G_WEIGHTS_HALF[::-1]


def _gk21(g, a, b):
    half = 0.5 * (b - a)
    center = 0.5 * (a + b)
    fx = np.asarray(g(center + half * _GK_NODES), dtype=float)
    kron = half * (fx @ _K_WEIGHTS)
    gauss = half * (fx @ _G_WEIGHTS)
    return kron, np.abs(kron - gauss)


def _substitution(lo, hi):
    """Map an (im)proper interval onto a finite one.

    Returns ``(transform, t_lo, t_hi, to_t)`` where ``transform(t)`` gives the
    abscissa and the Jacobian, and ``to_t`` maps breakpoints.
    """
    if math.isfinite(lo) and math.isfinite(hi):
        return None, lo, hi, lambda x: x
    if math.isinf(lo) and math.isinf(hi):
        def transform(t):
            s = 1.0 - t * t
            return t / s, (1.0 + t * t) / (s * s)

        def to_t(x):
            return 2.0 * x / (1.0 + math.sqrt(1.0 + 4.0 * x * x))

        return transform, -1.0, 1.0, to_t
    if math.isinf(hi):
        def transform(t):
            s = 1.0 - t
            return lo + t / s, 1.0 / (s * s)

        return transform, 0.0, 1.0, lambda x: (x - lo) / (1.0 + x - lo)

    def transform(t):
        return hi - (1.0 - t) / t, 1.0 / (t * t)

    return transform, 0.0, 1.0, lambda x: 1.0 / (1.0 + hi - x)


def integrate_1d(
    f: Callable[[np.ndarray], np.ndarray],
    lo: float,
    hi: float,
    spec: QuadratureSpec = DEFAULT_QUADRATURE,
    points: Sequence[float] = (),
):
    """Globally adaptive Gauss-Kronrod integration of ``f`` over ``[lo, hi]``.

    Infinite bounds are handled by a rational substitution onto a finite
    interval. ``points`` are interior abscissae where the integrand changes
    character (kinks, steep edges); the initial partition is split there.

    ``f`` is called with an array of abscissae and must be vectorized: it
    returns an array of the same length, or shape ``(k, len(x))`` for a
    ``k``-component integrand.

    Returns a float for scalar integrands or an array for vector ones. Every
    component must satisfy ``err <= max(abs_tol, rel_tol * |value|)``;
    otherwise :class:`NonConvergence` is raised once ``spec.max_subdivisions``
    intervals are in use.
    """
    if lo == hi:
        probe = np.asarray(f(np.array([lo if math.isfinite(lo) else 0.0])))
        return 0.0 if probe.ndim == 1 else np.zeros(probe.shape[0])
    if lo > hi:
        return -integrate_1d(f, hi, lo, spec, points)

    transform, t_lo, t_hi, to_t = _substitution(float(lo), float(hi))
    if transform is None:
        g = f
    else:
        def g(t):
            x, jac = transform(t)
            return np.asarray(f(x)) * jac

    cuts = sorted({to_t(float(p)) for p in points if lo < p < hi})
    edges = [t_lo, *cuts, t_hi]
    intervals = []
    for a, b in zip(edges[:-1], edges[1:]):
        if b > a:
            val, err = _gk21(g, a, b)
            intervals.append([a, b, val, err])

    while True:
        total = sum(iv[2] for iv in intervals)
        total_err = sum(iv[3] for iv in intervals)
        tol = np.maximum(spec.abs_tol, spec.rel_tol * np.abs(total))
        if np.all(total_err <= tol):
            return float(total) if np.ndim(total) == 0 else np.asarray(total)
        if len(intervals) >= spec.max_subdivisions:
            raise NonConvergence(
                f"integrate_1d: {len(intervals)} subdivisions exhausted "
                f"(error {np.max(total_err / tol):.3g} x tolerance)",
                estimate=total,
                error=total_err,
            )
        scores = [float(np.sum(iv[3] / tol)) for iv in intervals]
        a, b, _, _ = intervals.pop(int(np.argmax(scores)))
        mid = 0.5 * (a + b)
        if not a < mid < b:
            raise NonConvergence(
                "integrate_1d: interval collapsed below machine resolution",
                estimate=total,
                error=total_err,
            )
        for lo_, hi_ in ((a, mid), (mid, b)):
            val, err = _gk21(g, lo_, hi_)
            intervals.append([lo_, hi_, val, err])


# Gaussian mass beyond this many standard deviations underflows double precision.
_TAIL_SD = 38.5
# multiples of a feature width at which breakpoints are placed
BREAKPOINT_LADDER = (0.5, 1.0, 2.0, 4.0, 8.0, 16.0)


def _check_bvn(s1, s2, rho):
    if not (s1 > 0 and s2 > 0):
        raise ValidationError(f"standard deviations must be positive, got {s1}, {s2}")
    if not abs(rho) < 1:
        raise ValidationError(f"|rho| must be < 1, got {rho}")


def bvn_rect_prob(
    mu1: float,
    mu2: float,
    s1: float,
    s2: float,
    rho: float,
    rect: Rect,
    spec: QuadratureSpec = DEFAULT_QUADRATURE,
) -> float:
    """Probability that a bivariate normal falls in ``rect``.

    Reduced to one dimension by conditioning Y on X::

        P = int_{x_lo}^{x_hi} phi_X(x) [Phi(hi(x)) - Phi(lo(x))] dx

    where ``hi(x), lo(x)`` are the rectangle's y-bounds standardized by the
    conditional law of Y given X = x.
    """
    _check_bvn(s1, s2, rho)
    x_lo = max(rect.x_lo, mu1 - _TAIL_SD * s1)
    x_hi = min(rect.x_hi, mu1 + _TAIL_SD * s1)
    if x_lo >= x_hi:
        return 0.0
    slope = rho * s2 / s1
    s_cond = s2 * math.sqrt((1.0 - rho) * (1.0 + rho))

    def integrand(x):
        m = mu2 + slope * (x - mu1)
        window = normal_interval((rect.y_lo - m) / s_cond, (rect.y_hi - m) / s_cond)
        return np.exp(-0.5 * ((x - mu1) / s1) ** 2) / (s1 * math.sqrt(2 * math.pi)) * window

    # The window switches on over a width s_cond/|slope| around the x where
    # the conditional mean crosses a y-edge. When that width is small the
    # feature can hide between the initial nodes, even just outside the
    # interval, so breakpoints are laid out geometrically around every
    # crossing and every finite end.
    points = [mu1]
    anchors = [x_lo, x_hi]
    width = s1
    if slope != 0.0:
        width = min(s1, s_cond / abs(slope))
        for y in (rect.y_lo, rect.y_hi):
            if math.isfinite(y):
                anchors.append(mu1 + (y - mu2) / slope)
    for a in anchors:
        points.append(a)
        for k in BREAKPOINT_LADDER:
            points.extend((a - k * width, a + k * width))
    value = integrate_1d(integrand, x_lo, x_hi, spec, points)
    return min(max(value, 0.0), 1.0)


def bvn_rect_grad(
    mu1: float, mu2: float, s1: float, s2: float, rho: float, rect: Rect
) -> tuple[float, float]:
    """Gradient of :func:`bvn_rect_prob` with respect to ``(mu1, mu2)``.

    Shifting a mean only moves mass across the rectangle's edges, so each
    partial derivative is a difference of edge integrals, and those have
    closed forms in the normal pdf and cdf.
    """
    _check_bvn(s1, s2, rho)
    root = math.sqrt((1.0 - rho) * (1.0 + rho))

    def edge_flux(edge, mu_a, s_a, lo_b, hi_b, mu_b, s_b):
        if not math.isfinite(edge):
            return 0.0
        z = (edge - mu_a) / s_a
        density = math.exp(-0.5 * z * z) / (s_a * math.sqrt(2 * math.pi))
        m = mu_b + rho * s_b * z
        sc = s_b * root
        return density * float(normal_interval((lo_b - m) / sc, (hi_b - m) / sc))

    d_mu1 = edge_flux(rect.x_lo, mu1, s1, rect.y_lo, rect.y_hi, mu2, s2) - edge_flux(
        rect.x_hi, mu1, s1, rect.y_lo, rect.y_hi, mu2, s2
    )
    d_mu2 = edge_flux(rect.y_lo, mu2, s2, rect.x_lo, rect.x_hi, mu1, s1) - edge_flux(
        rect.y_hi, mu2, s2, rect.x_lo, rect.x_hi, mu1, s1
    )
    return d_mu1, d_mu2
