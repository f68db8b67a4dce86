"""Seeded, reproducible studies producing tables of :class:`ExperimentRecord`.

Every stochastic study draws replication ``r`` from its own counter-based
substream ``make_stream(seed, experiment_id, r)``. Per-replication results
are stored by index and reduced in index order, so the output does not depend
on the number of worker threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .detection import (
    PixelDetector,
    alpha_beta_linearization,
    classify_pixels_array,
    classify_split_array,
    pixel_probabilities,
    split_probabilities,
)
from .errors import ValidationError
from .inference import (
    dmin_alpha_beta,
    fisher_continuous,
    fisher_discrete,
    fisher_marginal_split,
    fisher_split,
    averaged_marginal_variance,
    covariance_marginal_estimators,
    estimate_marginal_mle,
    estimate_mean,
    estimate_split,
    qfi_numeric,
    split_scale,
)
from .model import BiphotonModel, make_stream, sample_pairs
from .numerics import DEFAULT_QUADRATURE, QuadratureSpec

__all__ = [
    "EXPERIMENT_IDS",
    "ExperimentRecord",
    "RandomWalkTrace",
    "loglog_slope",
    "run_random_walk",
    "random_walk_records",
    "sweep_npixel_fisher",
    "crossover_events_for_snr",
    "crossover_curve",
    "scaling_study",
    "appendix_a_study",
    "qfi_vs_cfi_check",
    "crb_saturation_study",
    "outcome_frequencies",
]

# Substream namespace per experiment; never renumber, outputs depend on it.
EXPERIMENT_IDS = {
    "sample": 1,
    "random-walk": 2,
    "scaling": 3,
    "appendix-a": 4,
    "crb-saturation": 5,
    "frequencies": 6,
}

FIG5_EPSILONS = (1.0, 0.5, 0.1, 0.05, 0.01, 0.0)
FIG5_NOTE = (
    "figure caption lists eps/sigma = 1, 0.5, 0.1, 0.05, 0 but its text cites "
    "the 0.01 curve; both 0.05 and 0.01 are included"
)


@dataclass(frozen=True)
class ExperimentRecord:
    experiment: str
    sigma: float | None
    epsilon: float | None
    d: float | None
    n_pixels: int | None
    nu: int | None
    seed: int | None
    statistic: str
    value: float
    stderr: float = 0.0

    FIELDS = ("experiment", "sigma", "epsilon", "d", "n_pixels", "nu", "seed", "statistic", "value", "stderr")

    def as_dict(self) -> dict:
        return asdict(self)


def _record(experiment, m=None, *, statistic, value, stderr=0.0, n_pixels=None, nu=None, seed=None, d=None):
    return ExperimentRecord(
        experiment=experiment,
        sigma=None if m is None else m.sigma,
        epsilon=None if m is None else m.epsilon,
        d=(None if m is None else m.d) if d is None else d,
        n_pixels=n_pixels,
        nu=nu,
        seed=seed,
        statistic=statistic,
        value=float(value),
        stderr=float(stderr),
    )


@dataclass(frozen=True)
class RandomWalkTrace:
    steps: np.ndarray  # int8 in {-2, 0, +2}
    net: np.ndarray  # cumulative sum of steps

    @property
    def final(self) -> int:
        return int(self.net[-1]) if self.net.size else 0


def loglog_slope(x: Sequence[float], y: Sequence[float]) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    lx = np.log(np.asarray(x, dtype=float))
    ly = np.log(np.asarray(y, dtype=float))
    return float(np.polyfit(lx, ly, 1)[0])


def _replicate(fn: Callable[[int], object], n: int, workers: int = 1) -> list:
    if workers <= 1:
        return [fn(r) for r in range(n)]
    chunk = max(1, n // (8 * workers))
    blocks = [range(a, min(a + chunk, n)) for a in range(0, n, chunk)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = pool.map(lambda blk: [fn(r) for r in blk], blocks)
        return [item for part in parts for item in part]


# -- random walk ----------------------------------------------------------------


def run_random_walk(m: BiphotonModel, n_events: int, seed: int) -> RandomWalkTrace:
    """Net split signal accumulated over ``n_events`` sampled pairs."""
    if n_events < 1:
        raise ValidationError("n_events must be >= 1")
    rng = make_stream(seed, EXPERIMENT_IDS["random-walk"])
    x1, x2 = sample_pairs(m, n_events, rng)
    steps = classify_split_array(x1, x2).astype(np.int8)
    return RandomWalkTrace(steps=steps, net=np.cumsum(steps, dtype=np.int64))


def random_walk_records(m: BiphotonModel, trace: RandomWalkTrace, seed: int) -> list[ExperimentRecord]:
    nu = trace.steps.size
    rows = [_record("random-walk", m, statistic="final_net_signal", value=trace.final, nu=nu, seed=seed)]
    table = split_probabilities(m)
    for label, step in (("-2", -2), ("0", 0), ("+2", 2)):
        freq = float(np.mean(trace.steps == step))
        p = table.prob(label)
        rows.append(_record("random-walk", m, statistic=f"freq[{label}]", value=freq,
                            stderr=math.sqrt(p * (1 - p) / nu), nu=nu, seed=seed))
        rows.append(_record("random-walk", m, statistic=f"prob[{label}]", value=p, nu=nu, seed=seed))
    return rows


# -- Fisher information sweeps ----------------------------------------------------


def sweep_npixel_fisher(
    sigma: float,
    d: float,
    pixel_counts: Iterable[int] = (2, 10, 50),
    extent: float = 10.0,
    eps_grid: Iterable[float] = tuple(np.logspace(-2, 0, 20)),
    spec: QuadratureSpec = DEFAULT_QUADRATURE,
) -> list[ExperimentRecord]:
    """Per-pair information of N-pixel detection versus correlation width."""
    rows = []
    for eps in eps_grid:
        if not 0 < eps <= sigma:
            raise ValidationError(f"eps grid values must lie in (0, sigma], got {eps}")
        m = BiphotonModel(sigma, float(eps), d)
        for n in pixel_counts:
            dist = pixel_probabilities(m, PixelDetector(int(n), extent), spec)
            rows.append(_record("npixel-sweep", m, statistic="fisher_pixels",
                                value=fisher_discrete(dist).value, n_pixels=int(n)))
        rows.append(_record("npixel-sweep", m, statistic="fisher_continuous", value=fisher_continuous(m).value))
    return rows


def crossover_events_for_snr(
    m: BiphotonModel, d: float, target_snr: float = 1.0, spec: QuadratureSpec = DEFAULT_QUADRATURE
) -> int:
    """Split-detection events needed to reach ``target_snr`` at displacement ``d``.

    Uses the exact outcome table at ``d``. For ``epsilon = 0`` the information
    diverges like ``1/d`` and the closed form ``sqrt(pi sigma^2 / 8) snr^2 / d``
    is used instead.
    """
    if not (d > 0 and target_snr > 0):
        raise ValidationError("need d > 0 and target_snr > 0")
    if m.is_delta_limit:
        return math.ceil(math.sqrt(math.pi * m.sigma**2 / 8.0) * target_snr**2 / d)
    per_event = fisher_discrete(split_probabilities(m.with_d(d), spec)).value
    return math.ceil(target_snr**2 / (d * d * per_event))


def crossover_curve(
    sigma: float,
    eps_values: Iterable[float],
    d_grid: Iterable[float],
    target_snr: float = 1.0,
    spec: QuadratureSpec = DEFAULT_QUADRATURE,
) -> list[ExperimentRecord]:
    rows = []
    for eps in eps_values:
        m = BiphotonModel(sigma, float(eps), 0.0)
        for d in d_grid:
            nu = crossover_events_for_snr(m, float(d), target_snr, spec)
            rows.append(_record("crossover", m, statistic="events_for_snr", value=nu, d=float(d)))
    return rows


# -- resolution scaling -------------------------------------------------------------


def _split_diff_counts(m, nus, d_grids, rng):
    """``n_+2 - n_-2`` for every prefix length in ``nus`` and every grid ``d``.

    Pairs are drawn once at ``d = 0``; a displacement translates both photons,
    so one draw serves all ``d`` (common random numbers).
    """
    b1, b2 = sample_pairs(m.with_d(0.0), nus[-1], rng)
    lo = np.minimum(b1, b2)
    hi = np.maximum(b1, b2)
    out = np.empty((len(nus), d_grids.shape[1]), dtype=np.int64)
    for k, nu in enumerate(nus):
        thresholds = -d_grids[k]
        n_plus = nu - np.searchsorted(np.sort(lo[:nu]), thresholds, side="left")
        n_minus = np.searchsorted(np.sort(hi[:nu]), thresholds, side="left")
        out[k] = n_plus - n_minus
    return out


def _snr_crossing(d_grid, diffs):
    """Smallest ``d`` on the grid where mean/std of the estimate reaches 1, log-interpolated."""
    mean = diffs.mean(axis=0)
    std = diffs.std(axis=0, ddof=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(std > 0, mean / std, np.where(mean > 0, np.inf, 0.0))
    above = np.nonzero(ratio >= 1.0)[0]
    if above.size == 0 or above[0] == 0:
        return math.nan
    i = above[0]
    r0, r1 = ratio[i - 1], ratio[i]
    if not (math.isfinite(r1) and r0 > 0):
        return float(d_grid[i])
    t = (0.0 - math.log(r0)) / (math.log(r1) - math.log(r0))
    return float(math.exp(math.log(d_grid[i - 1]) + t * (math.log(d_grid[i]) - math.log(d_grid[i - 1]))))


def scaling_study(
    m: BiphotonModel,
    nu_grid: Iterable[int],
    replications: int,
    seed: int,
    *,
    workers: int = 1,
    d_points: int = 121,
    batches: int = 10,
) -> list[ExperimentRecord]:
    """Monte Carlo resolution ``d_min(nu)`` of split detection at SNR = 1.

    For each ``nu`` the scaled split estimate is simulated on a grid of
    displacements; ``d_min`` is where mean/std across replications crosses 1.
    The analytic ``alpha + beta d`` prediction is reported alongside, plus
    log-log slopes of both curves. Standard errors come from ``batches``
    contiguous blocks of replications.
    """
    if replications < 50:
        raise ValidationError("scaling_study needs at least 50 replications")
    nus = sorted({int(n) for n in nu_grid})
    if nus[0] < 1:
        raise ValidationError("nu values must be >= 1")
    alpha, beta = alpha_beta_linearization(m)
    analytic = np.array([dmin_alpha_beta(alpha, beta, nu) for nu in nus])
    d_grids = np.array([np.logspace(math.log10(a / 20.0), math.log10(a * 5.0), d_points) for a in analytic])

    exp_id = EXPERIMENT_IDS["scaling"]
    diffs = np.stack(_replicate(
        lambda r: _split_diff_counts(m, nus, d_grids, make_stream(seed, exp_id, r)), replications, workers
    ))  # (replications, len(nus), d_points)

    blocks = np.array_split(np.arange(replications), batches)
    rows = []
    mc = []
    for k, nu in enumerate(nus):
        dmin = _snr_crossing(d_grids[k], diffs[:, k, :])
        per_batch = [_snr_crossing(d_grids[k], diffs[b, k, :]) for b in blocks]
        se = float(np.nanstd(per_batch, ddof=1) / math.sqrt(batches))
        mc.append(dmin)
        rows.append(_record("scaling", m, statistic="dmin_mc", value=dmin, stderr=se, nu=nu, seed=seed))
        rows.append(_record("scaling", m, statistic="dmin_analytic", value=analytic[k], nu=nu, seed=seed))
    if len(nus) >= 2:
        rows.append(_record("scaling", m, statistic="slope_mc", value=loglog_slope(nus, mc), seed=seed))
        rows.append(_record("scaling", m, statistic="slope_analytic", value=loglog_slope(nus, analytic), seed=seed))
    return rows


# -- marginal-estimator averaging ------------------------------------------------------


def _marginal_pair_estimates(m, n_events, rng):
    x1, x2 = sample_pairs(m, n_events, rng)
    r1 = x1 >= 0
    r2 = x2 >= 0
    c = split_scale(m)
    d1 = c * (2.0 * np.count_nonzero(r1) - n_events) / n_events
    d2 = c * (2.0 * np.count_nonzero(r2) - n_events) / n_events
    return d1, d2


def appendix_a_study(
    m: BiphotonModel,
    n_events: int,
    replications: int,
    weight_grid: Iterable[float],
    seed: int,
    *,
    workers: int = 1,
) -> list[ExperimentRecord]:
    """Empirical variance of ``w d1 + (1 - w) d2`` per weight and ``Cov(d1, d2)``."""
    weights = sorted(float(w) for w in weight_grid)
    if not any(math.isclose(w, 0.5) for w in weights):
        raise ValidationError("weight grid must include 1/2")
    if replications < 2:
        raise ValidationError("need at least two replications")
    exp_id = EXPERIMENT_IDS["appendix-a"]
    est = np.array(_replicate(
        lambda r: _marginal_pair_estimates(m, n_events, make_stream(seed, exp_id, r)), replications, workers
    ))
    d1, d2 = est[:, 0], est[:, 1]
    c1, c2 = d1 - d1.mean(), d2 - d2.mean()
    prod = c1 * c2
    cov = float(prod.sum() / (replications - 1))
    cov_se = float(prod.std(ddof=1) / math.sqrt(replications))

    common = dict(nu=n_events, seed=seed)
    rows = [
        _record("appendix-a", m, statistic="cov_empirical", value=cov, stderr=cov_se, **common),
        _record("appendix-a", m, statistic="cov_predicted", value=covariance_marginal_estimators(m, n_events), **common),
    ]
    variances = []
    for w in weights:
        tot = w * d1 + (1.0 - w) * d2
        var = float(np.var(tot, ddof=1))
        variances.append(var)
        rows.append(_record("appendix-a", m, statistic=f"var_empirical[w1={w:g}]", value=var,
                            stderr=var * math.sqrt(2.0 / (replications - 1)), **common))
        rows.append(_record("appendix-a", m, statistic=f"var_predicted[w1={w:g}]",
                            value=averaged_marginal_variance(m, n_events, w, 1.0 - w), **common))
    best = int(np.argmin(variances))
    rows.append(_record("appendix-a", m, statistic="argmin_w1", value=weights[best], **common))
    rows.append(_record("appendix-a", m, statistic="min_var_times_n", value=variances[best] * n_events,
                        stderr=variances[best] * n_events * math.sqrt(2.0 / (replications - 1)), **common))
    rows.append(_record("appendix-a", m, statistic="min_var_predicted_times_n",
                        value=averaged_marginal_variance(m, n_events, 0.5, 0.5) * n_events, **common))
    return rows


# -- quantum vs classical information -------------------------------------------------


def qfi_vs_cfi_check(models: Iterable[BiphotonModel], spec: QuadratureSpec = DEFAULT_QUADRATURE) -> list[ExperimentRecord]:
    rows = []
    for m in models:
        q = qfi_numeric(m, spec).value
        c = fisher_continuous(m).value
        rows.append(_record("qfi-check", m, statistic="qfi_numeric", value=q))
        rows.append(_record("qfi-check", m, statistic="fisher_continuous", value=c))
        rows.append(_record("qfi-check", m, statistic="relative_difference", value=abs(q - c) / c))
    return rows


# -- estimator efficiency and event statistics ----------------------------------------


def crb_saturation_study(m: BiphotonModel, nu: int, seed: int) -> list[ExperimentRecord]:
    """``nu * Var`` of the mean, split and marginal estimators against ``1 / I``.

    All three estimators are evaluated on one sample of ``nu`` pairs; the
    marginal estimator uses photon 1 only.
    """
    m.require_finite_epsilon("crb_saturation_study")
    rng = make_stream(seed, EXPERIMENT_IDS["crb-saturation"])
    x1, x2 = sample_pairs(m, nu, rng)
    steps = classify_split_array(x1, x2)
    counts = (int(np.count_nonzero(steps == -2)), int(np.count_nonzero(steps == 0)),
              int(np.count_nonzero(steps == 2)))
    n_right = int(np.count_nonzero(x1 >= 0))
    results = {
        "mean": (estimate_mean((x1, x2), m), 4.0 / m.epsilon**2),
        "split": (estimate_split(counts, m), fisher_split(m).value),
        "marginal": (estimate_marginal_mle(n_right, nu - n_right, m), fisher_marginal_split(m).value),
    }
    rows = []
    for name, (res, info) in results.items():
        scaled = res.variance * nu
        # relative sd of a sample variance is sqrt((kurtosis - 1) / n); Gaussian kurtosis 3 as a guide
        rows.append(_record("crb-saturation", m, statistic=f"var_times_nu[{name}]", value=scaled,
                            stderr=scaled * math.sqrt(2.0 / (nu - 1)), nu=nu, seed=seed))
        rows.append(_record("crb-saturation", m, statistic=f"inverse_fisher[{name}]", value=1.0 / info, nu=nu, seed=seed))
        rows.append(_record("crb-saturation", m, statistic=f"estimate[{name}]", value=res.estimate,
                            stderr=math.sqrt(res.variance), nu=nu, seed=seed))
    return rows


def outcome_frequencies(
    m: BiphotonModel,
    n_events: int,
    seed: int,
    det: PixelDetector | None = None,
    spec: QuadratureSpec = DEFAULT_QUADRATURE,
) -> list[ExperimentRecord]:
    """Observed outcome frequencies next to the analytic table.

    ``stderr`` on each frequency row is the multinomial standard error
    ``sqrt(P (1 - P) / n)`` of the analytic probability.
    """
    rng = make_stream(seed, EXPERIMENT_IDS["frequencies"], 0 if det is None else det.n_pixels)
    x1, x2 = sample_pairs(m, n_events, rng)
    if det is None:
        table = split_probabilities(m, spec)
        steps = classify_split_array(x1, x2)
        observed = {lab: int(np.count_nonzero(steps == v)) for lab, v in (("-2", -2), ("0", 0), ("+2", 2))}
        n_pix = 2
    else:
        table = pixel_probabilities(m, det, spec)
        i, j = classify_pixels_array(x1, x2, det)
        n = det.n_pixels
        flat = np.bincount(i * (n + 1) + j, minlength=(n + 1) ** 2)
        observed = {lab: 0 for lab in table.labels}
        observed["miss"] = int(flat[0])
        for a in range(1, n + 1):
            for b in range(a, n + 1):
                observed[f"{a},{b}"] = int(flat[a * (n + 1) + b])
        n_pix = n
    rows = []
    for lab, p in zip(table.labels, table.probabilities):
        freq = observed[lab] / n_events
        rows.append(_record("frequencies", m, statistic=f"freq[{lab}]", value=freq,
                            stderr=math.sqrt(p * (1 - p) / n_events), n_pixels=n_pix, nu=n_events, seed=seed))
        rows.append(_record("frequencies", m, statistic=f"prob[{lab}]", value=p, n_pixels=n_pix,
                            nu=n_events, seed=seed))
    return rows
