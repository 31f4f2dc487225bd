"""Acceptance criteria, each at its stated scale and tolerance.

Every test records one PASS/FAIL line (printed inline and again in the
terminal summary).  Criteria 1-4 share one seeded campaign.
"""

import time

import numpy as np
import pytest

from haargreedy import experiments as ex
from haargreedy.greedy import AlgorithmConfig, Kind, run_batch
from haargreedy.haar import (
    DyadicFunction,
    HaarCoefficients,
    HaarDictionary,
    batch_lp_norm,
    lp_norm,
    truncation_norm_check,
)
from haargreedy.lp import conjugate_exponent, minimize_lines, norming_functional
from haargreedy.partitions import (
    LexLemmaReport,
    norm_upper_bound_check,
    h1_shift_check,
    property_p_ratios,
    property_p_samples,
    verify_lex_lemma,
    verify_n0_lemma,
    zeta_formula,
)
from oracles import golden_section_lambda, random_line_case

pytestmark = pytest.mark.slow

SEED = 20240601
P_GRID = (1.5, 2.0, 3.0, 4.0)
M_GRID = tuple(range(3, 11))


@pytest.fixture(scope="module")
def campaign():
    spec = ex.CampaignSpec(
        p_grid=P_GRID,
        m_grid=M_GRID,
        kinds=(Kind.XGA, Kind.DGA),
        runs_per_cell=200,
        seed=SEED,
        gamma_samples=10_000,
        zeta_samples=10_000,
    )
    t0 = time.perf_counter()
    cells = ex.run_campaign(spec)
    return cells, time.perf_counter() - t0


def test_01_finite_termination(campaign, acceptance_record):
    cells, elapsed = campaign
    runs = sum(len(c.traces) for c in cells)
    done = sum(c.statuses["terminated"] for c in cells)
    ok = done == runs and elapsed < 300
    acceptance_record(1, ok, f"{done}/{runs} runs terminated over {len(cells)} cells in {elapsed:.0f}s")
    assert ok


def test_02_bound_compliance(campaign, acceptance_record):
    cells, _ = campaign
    violations = sum(t.n_steps > c.bound for c in cells for t in c.traces)
    for c in cells:
        expected = zeta_formula(c.p) if c.p > 2 else max(c.zeta, ex.ZETA_FLOOR)
        assert c.zeta == expected
    worst = max(cells, key=lambda c: c.observed_max / c.bound)
    ok = violations == 0
    acceptance_record(
        2, ok,
        f"{violations} violations; tightest cell p={worst.p} m={worst.m} {worst.kind.value}: "
        f"{worst.observed_max} steps vs bound {worst.bound}",
    )
    assert ok


def test_03_lex_lemma(campaign, acceptance_record):
    cells, _ = campaign
    rep = LexLemmaReport()
    for c in cells:
        for t in c.traces:
            rep = rep.merge(verify_lex_lemma(t, c.zeta))
    frac = rep.guard_skipped / max(rep.steps, 1)
    ok = not rep.violations and frac < 0.01
    acceptance_record(
        3, ok,
        f"{len(rep.violations)} violations in {rep.checked} checked steps; "
        f"guard-band skips {rep.guard_skipped}/{rep.steps} ({100 * frac:.3f}%)",
    )
    assert ok


def test_04_n0_lemma(campaign, acceptance_record):
    cells, _ = campaign
    violations = checked = 0
    for c in cells:
        for t in c.traces:
            r = verify_n0_lemma(t, c.zeta, c.gamma_hat)
            violations += len(r.violations)
            checked += r.checked
    ok = violations == 0
    acceptance_record(4, ok, f"{violations} violations in {checked} windows")
    assert ok


def test_05_property_p_at_p3(acceptance_record):
    t0 = time.perf_counter()
    zeta = zeta_formula(3.0)
    violations, worst = 0, 0.0
    for m in range(2, 11):
        d = HaarDictionary.initial_segment(m, 3.0)
        rng = np.random.default_rng(ex.cell_seed(SEED, "propp", 3.0, m))
        R = property_p_ratios(property_p_samples(rng, 10_000, d.size), d)
        violations += int(np.sum(R > zeta + 1e-9))
        worst = max(worst, float(R.max()))
    elapsed = time.perf_counter() - t0
    ok = violations == 0 and elapsed < 120
    acceptance_record(5, ok, f"{violations} violations; max ratio {worst:.4f} <= {zeta}; {elapsed:.0f}s")
    assert ok


def test_06_h1_shift_inequality(acceptance_record):
    failures = 0
    for p in (2.5, 3.0, 4.0):
        rng = np.random.default_rng(ex.cell_seed(SEED, "h1shift", p, 63))
        z = zeta_formula(p)
        for _ in range(1000):
            # coefficients of h_2 .. h_63 with random sparsity and scale
            y = rng.standard_normal(62) * (rng.random(62) < rng.uniform(0.1, 1.0))
            y *= 10.0 ** rng.uniform(-3, 2)
            for t in (z, -z):
                failures += not h1_shift_check(y, t, p, slack=1e-10)
    ok = failures == 0
    acceptance_record(6, ok, f"{failures} failures over 3 x 1000 vectors, both signs of t")
    assert ok


def test_07_counterexample(acceptance_record):
    rep = ex.counterexample(200, (0.0, 1.0))
    ratios = np.array([r["ratio"] for r in rep["steps"]])
    err = float(np.max(np.abs(ratios - 2**-0.5)) / 2**-0.5)
    never_zero = all(r["norm"] > 0 for r in rep["steps"])
    axis = ex.counterexample(200, (1.0, 0.0))
    ok = (
        rep["stepsTaken"] == 200 and not rep["terminated"] and err <= 1e-9 and never_zero
        and axis["terminated"] and axis["stepsTaken"] == 1
    )
    acceptance_record(
        7, ok,
        f"(0,1): 200 steps, max ratio error {err:.1e}, final norm {rep['steps'][-1]['norm']:.3e}; "
        f"(1,0): {axis['stepsTaken']} step",
    )
    assert ok


def test_08_hilbert_sanity(acceptance_record):
    rng = np.random.default_rng(SEED + 8)
    mismatched = wrong_count = 0
    for m in range(1, 11):
        d = HaarDictionary.initial_segment(m, 2.0)
        n = 100
        X = rng.standard_normal((n, d.size)) * (rng.random((n, d.size)) < rng.uniform(0.2, 1.0, (n, 1)))
        xs = run_batch(X, AlgorithmConfig(Kind.XGA, 2.0), d)
        ds = run_batch(X, AlgorithmConfig(Kind.DGA, 2.0), d)
        for x0, a, b in zip(X, xs, ds):
            same = (
                [r.position for r in a.steps] == [r.position for r in b.steps]
                and [r.lam for r in a.steps] == [r.lam for r in b.steps]
                and all(np.array_equal(r.coefficients_after, s.coefficients_after) for r, s in zip(a.steps, b.steps))
            )
            mismatched += not same
            wrong_count += not (a.terminated and a.n_steps == int(np.count_nonzero(x0)))
    ok = mismatched == 0 and wrong_count == 0
    acceptance_record(8, ok, f"1000 vectors: {mismatched} XGA/DGA mismatches, {wrong_count} step-count mismatches")
    assert ok


def test_09_norming_functional(acceptance_record):
    rng = np.random.default_rng(SEED + 9)
    worst_pair = worst_dual = 0.0
    for _ in range(1000):
        p = float(rng.uniform(1.1, 8.0))
        level = int(rng.integers(0, 7))
        y = DyadicFunction(level, rng.standard_normal(2**level) * 10.0 ** rng.uniform(-6, 6))
        F = norming_functional(y, p)
        ny = lp_norm(y, p)
        worst_pair = max(worst_pair, abs(F(y) - ny) / ny)
        worst_dual = max(worst_dual, abs(lp_norm(F.density, conjugate_exponent(p)) - 1.0))
    ok = worst_pair <= 1e-10 and worst_dual <= 1e-10
    acceptance_record(9, ok, f"max |F(y)-||y||| / ||y|| = {worst_pair:.1e}, max | ||F||_q - 1 | = {worst_dual:.1e}")
    assert ok


def test_10_line_search_oracle(acceptance_record):
    rng = np.random.default_rng(SEED + 10)
    worst_lam = worst_d = 0.0
    for _ in range(500):
        level, y, phi, p = random_line_case(rng)
        w = 2.0**-level
        lam, dres, _ = minimize_lines(y[None], phi[None], p, w)
        oracle = golden_section_lambda(y, phi, p)
        ny, nf = batch_lp_norm(np.array([y, phi]), p, w)
        worst_lam = max(worst_lam, abs(lam[0] - oracle) / max(abs(oracle), ny / nf))
        worst_d = max(worst_d, dres[0] / (ny ** (p - 1) * nf))
    ok = worst_lam <= 1e-9 and worst_d <= 1e-10
    acceptance_record(10, ok, f"500 cases: max relative lambda error {worst_lam:.1e}, max scaled d(lambda) {worst_d:.1e}")
    assert ok


def test_11_norm_bound(acceptance_record):
    violations = checks = 0
    for p in (1.5, 3.0):
        for m in range(1, 11):
            zeta, _ = ex.zeta_for(p, max(m - 1, 1), 2000, SEED)
            rng = np.random.default_rng(ex.cell_seed(SEED, "propp", p, m, tau=0.5))
            for a in property_p_samples(rng, 1000, m):
                norm, bound = norm_upper_bound_check(a, zeta, p)
                violations += norm > bound * (1 + 1e-12)
                checks += 1
    ok = violations == 0
    acceptance_record(11, ok, f"{violations} violations in {checks} vectors")
    assert ok


def test_12_strict_monotonicity(acceptance_record):
    rng = np.random.default_rng(SEED + 12)
    bad = 0
    per_p = 1000
    for p in P_GRID:
        for k in range(per_p):
            size = int(rng.integers(2, 33))
            a = rng.standard_normal(size)
            i0 = int(rng.integers(1, size))
            if k % 4 == 0:
                a[i0:] = 0.0
            elif k % 4 == 1:
                # a single small tail entry must still raise the norm; much
                # smaller entries move the norm by less than its rounding error
                a[i0:] = 0.0
                a[int(rng.integers(i0, size))] = 1e-3
            truncated, full = truncation_norm_check(HaarCoefficients.initial_segment(a), i0, p)
            zero_tail = not np.any(a[i0:])
            bad += not (truncated == full if zero_tail else truncated < full)
    ok = bad == 0
    acceptance_record(12, ok, f"{bad} failures over {per_p} checks for each p in {P_GRID}")
    assert ok
