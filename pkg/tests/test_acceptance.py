"""Acceptance criteria 1-9, one test each.

Every test prints ``PASS criterion N: ...`` or ``FAIL criterion N: ...`` with
the measured quantity, its tolerance and the elapsed time; the lines are
collected into the pytest terminal summary. Run ``python tests/test_acceptance.py``
to get only those lines.

All stochastic checks use one seed fixed before the first run.
"""

import math
import time

import numpy as np
import pytest

from biphoton.detection import PixelDetector, pixel_probabilities, split_probabilities_exact
from biphoton.experiments import (
    appendix_a_study,
    crb_saturation_study,
    crossover_events_for_snr,
    loglog_slope,
    outcome_frequencies,
    scaling_study,
    sweep_npixel_fisher,
)
from biphoton.inference import (
    fisher_continuous,
    fisher_discrete,
    fisher_marginal,
    fisher_ratio,
    fisher_split,
    heisenberg_event_bound,
    qfi_numeric,
)
from biphoton.model import BiphotonModel, correlation_coefficient

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:  # executed as a script from another directory
    ACCEPTANCE_LINES = []

SEED = 20261016


def report(n, title, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {title} | {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def by_stat(rows):
    return {r.statistic: r for r in rows}


# -- 1 --------------------------------------------------------------------------------


def test_criterion_1_closed_forms():
    t0 = time.perf_counter()
    errors = []
    for sigma, eps in [(1.0, 1.0), (1.0, 0.5), (2.0, 0.3), (0.7, 1.9), (1.0, 0.01)]:
        m = BiphotonModel(sigma, eps)
        xi = (eps * eps - sigma * sigma) / (eps * eps + sigma * sigma)
        errors.append(abs(fisher_continuous(m).value - 4 / eps**2) / (4 / eps**2))
        errors.append(abs(fisher_marginal(m).value - 4 / (eps**2 + sigma**2)))
        errors.append(abs(fisher_ratio(m, "split") - math.pi / (math.pi + 2 * math.asin(xi))))
        errors.append(abs(correlation_coefficient(m) - xi))
    errors.append(abs(fisher_split(BiphotonModel(1.0, 1.0)).value - 8 / math.pi))
    errors.append(abs(correlation_coefficient(BiphotonModel(1.3, 1.3))))
    elapsed = time.perf_counter() - t0
    worst = max(errors)
    ok = worst <= 1e-12 and elapsed < 1.0
    report(1, "closed forms", ok, f"max error {worst:.2e} (tol 1e-12), {elapsed:.3f} s (budget 1 s)")
    assert ok


# -- 2 --------------------------------------------------------------------------------


def test_criterion_2_quadrature_vs_formula():
    t0 = time.perf_counter()
    rel = {}
    for eps in (0.25, 0.5, 1.0):
        m = BiphotonModel(1.0, eps, 1e-4)
        exact = fisher_discrete(split_probabilities_exact(m)).value
        closed = fisher_split(m).value
        rel[eps] = abs(exact - closed) / closed
    elapsed = time.perf_counter() - t0
    ok = max(rel.values()) <= 0.005 and elapsed < 10
    detail = ", ".join(f"eps={e}: {r:.2e}" for e, r in rel.items())
    report(2, "exact split table vs closed form at d=1e-4", ok, f"rel diff {detail} (tol 5e-3), {elapsed:.2f} s (budget 10 s)")
    assert ok


# -- 3 --------------------------------------------------------------------------------


def test_criterion_3_qfi_equality():
    t0 = time.perf_counter()
    triples = [(1.0, 0.5, 0.0), (1.0, 0.25, 0.2), (2.0, 0.3, 0.1), (1.0, 1.0, 0.0), (0.5, 0.05, -0.3), (3.0, 2.0, 1.5)]
    rel = [abs(qfi_numeric(BiphotonModel(*t)).value - 4 / t[1] ** 2) / (4 / t[1] ** 2) for t in triples]
    elapsed = time.perf_counter() - t0
    ok = max(rel) <= 1e-4 and elapsed < 30
    report(3, "quantum = classical information", ok,
           f"{len(triples)} triples, max rel diff {max(rel):.2e} (tol 1e-4), {elapsed:.2f} s (budget 30 s)")
    assert ok


# -- 4 --------------------------------------------------------------------------------


def test_criterion_4_crb_saturation():
    t0 = time.perf_counter()
    ratios = {}
    for eps in (0.5, 1.0):
        rows = by_stat(crb_saturation_study(BiphotonModel(1.0, eps, 0.01), 10**5, SEED))
        for name in ("mean", "split", "marginal"):
            ratios[(eps, name)] = rows[f"var_times_nu[{name}]"].value / rows[f"inverse_fisher[{name}]"].value
    elapsed = time.perf_counter() - t0
    inside = {k: 1.0 <= r <= 1.05 for k, r in ratios.items()}
    ok = all(inside.values()) and elapsed < 60
    detail = ", ".join(f"eps={e} {n}: {r:.4f}" for (e, n), r in ratios.items())
    report(4, "estimator variance x nu in [1.0, 1.05] / I", ok, f"{detail}; {elapsed:.2f} s (budget 60 s)")
    assert ok


# -- 5 --------------------------------------------------------------------------------


def test_criterion_5_marginal_averaging():
    t0 = time.perf_counter()
    m = BiphotonModel(1.0, 0.5, 0.01)
    n_events = 1000
    weights = [round(0.1 * k, 10) for k in range(11)]
    rows = by_stat(appendix_a_study(m, n_events, 20_000, weights, SEED, workers=1))
    elapsed = time.perf_counter() - t0
    cov, cov_pred = rows["cov_empirical"], rows["cov_predicted"].value
    cov_z = abs(cov.value - cov_pred) / cov.stderr
    argmin = rows["argmin_w1"].value
    xi = correlation_coefficient(m)
    target = math.pi * (m.sigma**2 + m.epsilon**2) / 8 * (0.5 + math.asin(xi) / math.pi)
    min_rel = abs(rows["min_var_times_n"].value - target) / target
    ok = cov_z <= 4 and argmin == 0.5 and min_rel <= 0.05 and elapsed < 120
    report(5, "averaged marginal estimators", ok,
           f"cov {cov.value:.4e} vs {cov_pred:.4e} ({cov_z:.2f} SE, tol 4), argmin w1={argmin} (want 0.5), "
           f"min var*N {rows['min_var_times_n'].value:.5f} vs {target:.5f} (rel {min_rel:.2e}, tol 5e-2), "
           f"{elapsed:.1f} s (budget 120 s)")
    assert ok


# -- 6 --------------------------------------------------------------------------------

LOW_NU = (10, 15, 20, 30, 40, 50)
HIGH_NU = (10_000, 20_000, 50_000, 100_000)


def test_criterion_6a_delta_limit_crossover_slope():
    t0 = time.perf_counter()
    m = BiphotonModel(1.0, 0.0)
    # displacements whose event counts span nu in [10, 1e4]
    d_grid = np.logspace(math.log10(math.sqrt(math.pi / 8) / 1e4), math.log10(math.sqrt(math.pi / 8) / 10), 31)
    nus = np.array([crossover_events_for_snr(m, float(d)) for d in d_grid])
    slope = loglog_slope(nus, d_grid)
    elapsed = time.perf_counter() - t0
    ok = abs(slope + 1.0) <= 0.02 and nus.min() >= 10 and nus.max() <= 10_000 and elapsed < 1.0
    report(6, "eps=0 crossover curve (6a)", ok,
           f"slope d_min vs nu {slope:.4f} over nu in [{nus.min()}, {nus.max()}] (want -1.00 +- 0.02), "
           f"{elapsed:.3f} s (budget 1 s)")
    assert ok


def test_criterion_6b_transition_monte_carlo():
    t0 = time.perf_counter()
    m = BiphotonModel(1.0, 0.01)
    low = scaling_study(m, LOW_NU, 20_000, SEED, workers=1)
    high = scaling_study(m, HIGH_NU, 2_000, SEED, workers=1)
    elapsed = time.perf_counter() - t0
    s_low, s_high = by_stat(low)["slope_mc"].value, by_stat(high)["slope_mc"].value

    def line(rows):
        pts = [(r.nu, r.value) for r in rows if r.statistic == "dmin_mc"]
        nus, dmins = zip(*pts)
        return np.polyfit(np.log(nus), np.log(dmins), 1)

    (a1, b1), (a2, b2) = line(low), line(high)
    corner = math.exp((b2 - b1) / (a1 - a2))
    bound = heisenberg_event_bound(m)
    ok = (
        abs(s_low + 1.0) <= 0.1
        and abs(s_high + 0.5) <= 0.1
        and bound / 4 <= corner <= 4 * bound
        and elapsed < 300
    )
    report(6, "eps/sigma=0.01 Monte Carlo scaling (6b)", ok,
           f"slope nu<=50 {s_low:.3f} (want -1 +- 0.1), slope nu>=1e4 {s_high:.3f} (want -0.5 +- 0.1), "
           f"fitted corner nu={corner:.0f} vs pi sigma/(4 eps)={bound:.1f} (pinned: within x4), "
           f"{elapsed:.1f} s (budget 300 s)")
    assert ok


# -- 7 --------------------------------------------------------------------------------


def test_criterion_7_npixel_sweep():
    t0 = time.perf_counter()
    eps_grid = np.logspace(-2, 0, 21)[1:]  # 20 points in (0.01, 1]
    rows = sweep_npixel_fisher(1.0, 0.05, (2, 10, 50), 10.0, eps_grid)
    elapsed = time.perf_counter() - t0
    table = {}
    for r in rows:
        table.setdefault(r.epsilon, {})[r.n_pixels or 0] = r.value
    # refinement can only add information; allow quadrature noise of 1e-9 relative
    monotone = all(t[2] <= t[10] * (1 + 1e-9) and t[10] <= t[50] * (1 + 1e-9) for t in table.values())
    bounded = all(max(t[2], t[10], t[50]) <= 4 / e**2 for e, t in table.items())
    endpoint = table[1.0][2]
    end_rel = abs(endpoint - 8 / math.pi) / (8 / math.pi)
    ok = monotone and bounded and end_rel <= 0.005 and len(table) == 20 and elapsed < 120
    report(7, "N-pixel sweep", ok,
           f"monotone in N at all {len(table)} eps: {monotone}, all <= 4/eps^2: {bounded}, "
           f"N=2 eps=1 {endpoint:.5f} vs 8/pi (rel {end_rel:.2e}, tol 5e-3), {elapsed:.1f} s (budget 120 s)")
    assert ok


# -- 8 --------------------------------------------------------------------------------


def test_criterion_8_event_frequencies():
    t0 = time.perf_counter()
    m = BiphotonModel(1.0, 0.5, 0.05)
    worst = {}
    for name, det in (("split", None), ("N=10", PixelDetector(10, 10.0))):
        rows = outcome_frequencies(m, 10**6, SEED, det=det)
        freq = {r.statistic[5:-1]: r for r in rows if r.statistic.startswith("freq[")}
        prob = {r.statistic[5:-1]: r.value for r in rows if r.statistic.startswith("prob[")}
        z = [abs(f.value - prob[k]) / f.stderr for k, f in freq.items() if f.stderr > 0]
        # outcomes with P = 0 must never be observed
        z += [math.inf for k, f in freq.items() if f.stderr == 0 and f.value != prob[k]]
        worst[name] = (max(z), len(freq))
    elapsed = time.perf_counter() - t0
    ok = all(w <= 4 for w, _ in worst.values()) and elapsed < 60
    detail = ", ".join(f"{k}: max {w:.2f} SE over {n} outcomes" for k, (w, n) in worst.items())
    report(8, "1e6-event frequencies vs tables", ok, f"{detail} (tol 4 SE), {elapsed:.1f} s (budget 60 s)")
    assert ok


# -- 9 --------------------------------------------------------------------------------


def test_criterion_9_determinism():
    t0 = time.perf_counter()
    m = BiphotonModel(1.0, 0.01)
    runs = {
        "scaling": lambda w: scaling_study(m, (10, 50, 1000), 200, SEED, workers=w),
        "appendix-a": lambda w: appendix_a_study(BiphotonModel(1.0, 0.5, 0.01), 1000, 500, (0.0, 0.5, 1.0), SEED, workers=w),
        "crb": lambda w: crb_saturation_study(BiphotonModel(1.0, 0.5, 0.01), 10**4, SEED),
        "frequencies": lambda w: outcome_frequencies(BiphotonModel(1.0, 0.5, 0.05), 10**4, SEED, PixelDetector(10, 10.0)),
    }
    same = {}
    for name, fn in runs.items():
        serial = fn(1)
        same[name] = serial == fn(1) and serial == fn(4)
    elapsed = time.perf_counter() - t0
    ok = all(same.values())
    report(9, "determinism", ok,
           ", ".join(f"{k}: {'identical' if v else 'DIFFERENT'}" for k, v in same.items())
           + f" (repeat and workers=1 vs 4), {elapsed:.1f} s")
    assert ok


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-s"]))
