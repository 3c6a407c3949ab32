"""Acceptance gate: one test per criterion, each printing a pass/fail line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the criterion
lines as they complete.  Every tolerance is pinned here; nothing is
calibrated at run time.
"""

import itertools
import math

import numpy as np
import pytest
from scipy.integrate import dblquad, quad, tplquad

from eigendist.distributions import (
    curve,
    expect_single,
    moment_single,
    moments_unordered,
    pdf_pair,
    pdf_single,
    prob_all_in,
)
from eigendist.ensembles import (
    Beta,
    CorrelatedWishart,
    GUE,
    NoncentralWishart,
    SpikedWishart,
    UncorrelatedWishart,
    kernel_form,
    mean_eigenvalue_sum,
    normalization_check,
    spec_string,
)
from eigendist.montecarlo import compare, empirical_cdf, empirical_moment, sample
from eigendist.pseudodet import (
    EvalStats,
    GroupedPermutationPlan,
    Tensor3,
    pseudo_det,
    pseudo_det_grouped,
)
from eigendist.specfun import (
    hyp0f1,
    gamma_whole,
    lower_incomplete_gamma,
    upper_incomplete_gamma,
)
from eigendist.signedlog import SignedLog


def _report(number: int, name: str, ok: bool, detail: str) -> None:
    verdict = "PASS" if ok else "FAIL"
    print(f"ACCEPTANCE {number} [{name}]: {verdict} ({detail})")
    assert ok, f"criterion {number} ({name}) failed: {detail}"


def _quantile_grid(batch, ell, points=21):
    col = batch.eigenvalues[:, ell - 1]
    return np.unique(np.quantile(col, np.linspace(0.005, 0.995, points)))


# -- 1: normalization suite ----------------------------------------------------


def _normalization_models():
    for m in (1, 2, 3, 4):
        yield UncorrelatedWishart(m, m + 1)
        yield SpikedWishart(m, m + 1, 2.0, 1.0)
        yield NoncentralWishart(m, m + 1, (2.0,))
        yield GUE(m)
        yield Beta(m, 1, 2)
    yield CorrelatedWishart(1, 2, (2.0, 1.0), (1, 1))
    yield CorrelatedWishart(2, 3, (2.0, 1.0), (1, 2))
    yield CorrelatedWishart(3, 5, (2.0, 1.0), (2, 3))
    yield CorrelatedWishart(4, 6, (2.0, 1.0), (2, 4))


def test_criterion_1_normalization_suite():
    worst_pdf = 0.0
    worst_check = 0.0
    for model in _normalization_models():
        worst_check = max(worst_check, abs(normalization_check(model) - 1.0))
        for ell in range(1, model.dim + 1):
            mass = expect_single(model, ell, lambda x: 1.0)
            worst_pdf = max(worst_pdf, abs(mass - 1.0))
    ok = worst_pdf < 1e-7 and worst_check < 1e-8
    _report(
        1,
        "normalization",
        ok,
        f"max |int pdf - 1| = {worst_pdf:.2e} (tol 1e-7), "
        f"max |hypercube mass - 1| = {worst_check:.2e} (tol 1e-8)",
    )


# -- 2: figure-parameter marginals against Monte Carlo ---------------------------


FIGURE_MODELS = [
    UncorrelatedWishart(4, 5),
    SpikedWishart(4, 5, 10.0, 1.0),
    UncorrelatedWishart(6, 10),
    SpikedWishart(6, 10, 10.0, 1.0),
    GUE(6),
]


def test_criterion_2_figure_marginals_vs_monte_carlo():
    worst = 0.0
    worst_at = ""
    for model in FIGURE_MODELS:
        batch = sample(model, 1_000_000, seed=42)
        for ell in range(1, model.dim + 1):
            grid = _quantile_grid(batch, ell)
            emp = empirical_cdf(batch, ell, grid)
            ana = curve(model, "cdf", grid, index=ell)
            report = compare(ana, emp)
            if report.max_deviation > worst:
                worst = report.max_deviation
                worst_at = f"{spec_string(model)} ell={ell}"
    _report(
        2,
        "figure marginals",
        worst < 4.0,
        f"max standardized deviation {worst:.2f} at {worst_at} (gate 4.0)",
    )


# -- 3: pair densities ------------------------------------------------------------


def test_criterion_3_pair_density_suite():
    model = UncorrelatedWishart(4, 5)
    batch = sample(model, 20_000, seed=5)
    worst = 0.0
    wedge_ok = True
    for ell, s in itertools.combinations(range(1, 5), 2):
        lo, hi = np.quantile(batch.eigenvalues[:, ell - 1], [0.08, 0.92])
        for x in np.linspace(lo, hi, 10):
            x = float(x)
            want = pdf_single(model, ell, x)
            got, _ = quad(
                lambda y: pdf_pair(model, ell, s, x, y), 0.0, x, epsabs=1e-10, limit=300
            )
            worst = max(worst, abs(got - want))
            wedge_ok &= pdf_pair(model, ell, s, x, x + 1.0) == 0.0
    ok = worst < 1e-6 and wedge_ok
    _report(
        3,
        "pair densities",
        ok,
        f"max |marginalized pair - marginal| = {worst:.2e} (tol 1e-6), "
        f"wedge zeros exact: {wedge_ok}",
    )


# -- 4: interval probabilities ------------------------------------------------------


def test_criterion_4_interval_probability_cross_check():
    rng = np.random.default_rng(17)
    worst_rel = 0.0
    worst_oracle = 0.0

    m22 = UncorrelatedWishart(2, 2)
    kf22 = kernel_form(m22)
    for _ in range(5):
        a, b = sorted(rng.uniform(0.0, 6.0, size=2))
        if b - a < 0.2:
            b = a + 0.2
        det = prob_all_in(m22, a, b, method="determinant")
        ten = prob_all_in(m22, a, b, method="tensor")
        worst_rel = max(worst_rel, abs(det - ten) / max(abs(det), 1e-300))
        want, _ = dblquad(
            lambda y, x: kf22.ordered_density((x, y)), a, b, a, lambda x: x,
            epsabs=1e-10,
        )
        worst_oracle = max(worst_oracle, abs(det - want))

    gue3 = GUE(3)
    kf3 = kernel_form(gue3)
    for _ in range(5):
        a, b = sorted(rng.uniform(-2.5, 2.5, size=2))
        if b - a < 0.4:
            b = a + 0.4
        det = prob_all_in(gue3, a, b, method="determinant")
        ten = prob_all_in(gue3, a, b, method="tensor")
        worst_rel = max(worst_rel, abs(det - ten) / max(abs(det), 1e-300))
        want, _ = tplquad(
            lambda z, y, x: kf3.ordered_density((x, y, z)),
            a, b, a, lambda x: x, a, lambda x, y: y,
            epsabs=1e-10,
        )
        worst_oracle = max(worst_oracle, abs(det - want))

    ok = worst_rel < 1e-9 and worst_oracle < 1e-6
    _report(
        4,
        "interval probabilities",
        ok,
        f"max path disagreement {worst_rel:.2e} (tol 1e-9), "
        f"max |value - quadrature oracle| = {worst_oracle:.2e} (tol 1e-6)",
    )


# -- 5: moment identities --------------------------------------------------------------


def test_criterion_5_moment_identities():
    details = []
    ok = True

    trace_models = [
        UncorrelatedWishart(3, 4),
        CorrelatedWishart(2, 3, (2.0, 1.0), (1, 2)),
        SpikedWishart(3, 4, 2.0, 1.0),
    ]
    worst_tr = 0.0
    for model in trace_models:
        total = sum(moment_single(model, ell, 1) for ell in range(1, model.dim + 1))
        want = mean_eigenvalue_sum(model)
        worst_tr = max(worst_tr, abs(total - want) / want)
    ok &= worst_tr < 1e-6
    details.append(f"trace identity rel err {worst_tr:.2e} (tol 1e-6)")

    worst_gue = 0.0
    for m in (2, 3, 4):
        total = sum(moment_single(GUE(m), ell, 1) for ell in range(1, m + 1))
        worst_gue = max(worst_gue, abs(total))
    ok &= worst_gue < 1e-8
    details.append(f"symmetric first-moment sum {worst_gue:.2e} (tol 1e-8)")

    m22 = UncorrelatedWishart(2, 2)
    analytic = moments_unordered(m22, (1, 1))
    batch = sample(m22, 1_000_000, seed=31)
    mc_mean, mc_se = empirical_moment(batch, lambda row: row[0] * row[1])
    z = abs(analytic - mc_mean) / mc_se
    ok &= z < 4.0
    details.append(f"product moment vs sampled determinant mean z={z:.2f} (gate 4)")

    _report(5, "moment identities", ok, "; ".join(details))


# -- 6: permutation grouping -------------------------------------------------------------


def _grouped_random_tensor(rng, n, sizes):
    vals = np.empty((n, n, n))
    pos = 0
    for size in sizes:
        slab = rng.standard_normal((n, n))
        for k in range(pos, pos + size):
            vals[:, :, k] = slab
        pos += size
    for k in range(pos, n):
        vals[:, :, k] = rng.standard_normal((n, n))
    return vals


def _tensor_of(vals):
    with np.errstate(divide="ignore"):
        logs = np.where(vals == 0.0, -np.inf, np.log(np.abs(vals)))
    return Tensor3(np.sign(vals), logs)


def test_criterion_6_grouping_optimization():
    rng = np.random.default_rng(2024)
    worst = 0.0
    checked = 0
    for n in (4, 5, 6):
        partitions = [[n], [1, n - 1], [2, n - 2], [1, 2], [2, 2]]
        for _ in range(4):
            for sizes in partitions:
                vals = _grouped_random_tensor(rng, n, sizes)
                t = _tensor_of(vals)
                plan = GroupedPermutationPlan.from_segment_sizes(n, sizes)
                a = pseudo_det_grouped(t, plan).to_float()
                b = pseudo_det(t).to_float()
                worst = max(worst, abs(a - b) / max(abs(b), 1e-300))
                checked += 1
    counts_ok = True
    stats = EvalStats()
    pdf_single(UncorrelatedWishart(6, 10), 3, 8.0, stats=stats)
    counts_ok &= stats.determinants == 60
    stats = EvalStats()
    pdf_single(UncorrelatedWishart(4, 7), 2, 4.0, stats=stats)
    counts_ok &= stats.determinants == 12
    stats = EvalStats()
    pdf_pair(UncorrelatedWishart(4, 5), 1, 3, 6.0, 2.0, stats=stats)
    counts_ok &= stats.determinants == 24
    ok = worst < 1e-10 and checked >= 50 and counts_ok
    _report(
        6,
        "grouping optimization",
        ok,
        f"{checked} tensors, max grouped/naive rel diff {worst:.2e} (tol 1e-10), "
        f"determinant counts match reduction formulas: {counts_ok}",
    )


# -- 7: special functions ------------------------------------------------------------------


def test_criterion_7_special_function_suite():
    grid = np.geomspace(1e-3, 50.0, 25)
    worst_comp = 0.0
    worst_rec = 0.0
    for s in range(1, 31):
        whole = gamma_whole(float(s)).to_float()
        for x in grid:
            u = upper_incomplete_gamma(float(s), float(x))
            l = lower_incomplete_gamma(float(s), float(x))
            worst_comp = max(worst_comp, abs((u + l).to_float() - whole) / whole)
            lhs = upper_incomplete_gamma(float(s + 1), float(x))
            rhs = u.scaled(float(s)) + SignedLog.from_log(s * math.log(x) - x)
            worst_rec = max(
                worst_rec, abs(lhs.to_float() - rhs.to_float()) / lhs.to_float()
            )
    worst_0f1 = 0.0
    for b in (1.0, 2.0, 3.0, 6.0):
        for z in (0.5, 2.0, 10.0, 40.0, 100.0):
            direct, term = 1.0, 1.0
            for k in range(300):
                term *= z / ((b + k) * (k + 1))
                direct += term
            worst_0f1 = max(worst_0f1, abs(hyp0f1(b, z).to_float() - direct) / direct)
    ok = worst_comp < 1e-12 and worst_rec < 1e-12 and worst_0f1 < 1e-12
    _report(
        7,
        "special functions",
        ok,
        f"complementarity {worst_comp:.2e}, recurrence {worst_rec:.2e}, "
        f"series vs oracle {worst_0f1:.2e} (all tol 1e-12)",
    )


# -- 8: noncentral ensemble ---------------------------------------------------------------


def test_criterion_8_noncentral_wishart():
    model = NoncentralWishart(2, 3, (2.0,))
    mass_err = abs(normalization_check(model) - 1.0)
    batch = sample(model, 1_000_000, seed=77)
    worst = 0.0
    for ell in (1, 2):
        grid = _quantile_grid(batch, ell)
        emp = empirical_cdf(batch, ell, grid)
        ana = curve(model, "cdf", grid, index=ell)
        worst = max(worst, compare(ana, emp).max_deviation)
    ok = mass_err < 1e-6 and worst < 4.0
    _report(
        8,
        "noncentral ensemble",
        ok,
        f"|mass - 1| = {mass_err:.2e} (tol 1e-6), "
        f"max standardized deviation {worst:.2f} (gate 4.0)",
    )
