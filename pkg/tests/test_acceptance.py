"""Acceptance criteria, one test per criterion.

Each test prints a single ``CRITERION <i> PASS|FAIL`` line with the measured
quantities and wall time; the lines are repeated in the pytest summary.
Run directly with ``python tests/test_acceptance.py`` for the lines alone.
"""

import io
import math
import time
from contextlib import redirect_stdout

import numpy as np

from markovpred.bayes import beta_binomial, three_state_bayes_risk
from markovpred.chains import (
    lift_block_chain,
    lifted_stationary,
    order_m_stationary,
    pseudo_spectral_gap,
    random_chain,
    simulate_batch,
    spectral_report,
    stationary_distribution,
)
from markovpred.cli import COMMANDS, main
from markovpred.concentration import (
    DEFAULT_C,
    DEFAULT_SLACK,
    conditional_moment_check,
    hoffman_check,
    iid_transition_second_moment,
    kl_tail_check,
)
from markovpred.constructions import (
    binary_gap_prior,
    class_probability,
    k_state_embed,
    order_m_embed,
    sample_symmetric_T,
    sample_uniform_stationary_T,
    three_state,
    three_state_gamma_star,
    two_state,
    two_state_gamma_star,
    two_state_stationary,
)
from markovpred.estimators import Cesaro, Hybrid
from markovpred.risk import exact_redundancy, exact_risk, mc_risk, pointwise_redundancy_audit

from conftest import ACCEPTANCE_LINES
from oracles import class_prob_enum


def verdict(num, title, ok, detail, elapsed, limit=None):
    within = limit is None or elapsed <= limit
    status = "PASS" if ok and within else "FAIL"
    budget = f"{elapsed:.2f}s" + (f" (limit {limit:g}s)" if limit is not None else "")
    line = f"CRITERION {num} {status}: {title} | {detail} | {budget}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line
    assert within, line


def test_criterion_01_beta_binomial():
    t0 = time.perf_counter()
    x, w = np.polynomial.legendre.leggauss(64)
    q = 0.5 * (x + 1)
    w = 0.5 * w
    worst = 0.0
    for m in range(51):
        risk_q = 0.0
        for N in range(m + 1):
            f = q ** N * (1 - q) ** (m - N)
            z = w @ f
            mean = (w @ (q * f)) / z
            var = (w @ (q * q * f)) / z - mean ** 2
            risk_q += math.comb(m, N) * z * var
            worst = max(worst, abs(beta_binomial(N, m).mean - mean))
        worst = max(worst, abs(beta_binomial(0, m).risk - risk_q))
    verdict(1, "Beta-Binomial mean/risk vs quadrature, m<=50", worst <= 1e-10,
            f"max abs error {worst:.2e} (tol 1e-10)", time.perf_counter() - t0, 1.0)


def test_criterion_02_three_state_scaling():
    t0 = time.perf_counter()
    vals = [three_state_bayes_risk(2 ** j) * 2 ** j / math.log(2 ** j) for j in range(5, 15)]
    ratio = max(vals) / min(vals)
    verdict(2, "three-state Bayes risk * n/log n band, n=2^5..2^14", ratio <= 5,
            f"band [{min(vals):.5f}, {max(vals):.5f}], max/min {ratio:.3f} (<= 5)", time.perf_counter() - t0, 5.0)


def _audit_batch(rng, cases, k_max, n_max, m):
    bad = 0
    for _ in range(cases):
        k = int(rng.integers(2, k_max + 1))
        n = int(rng.integers(1, n_max + 1))
        T = random_chain(k, m, seed=rng)
        pi = rng.dirichlet(np.ones(k ** m))
        x = simulate_batch(T, n, 1, seed=rng, init=pi)[0]
        bad += not pointwise_redundancy_audit(T, pi, x).satisfied
    return bad


def test_criterion_03_pointwise_redundancy():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    bad1 = _audit_batch(rng, 10_000, 5, 100, 1)
    bad2 = _audit_batch(rng, 1_000, 3, 60, 2)
    verdict(3, "pointwise redundancy audits", bad1 == 0 and bad2 == 0,
            f"first-order violations {bad1}/10000, second-order violations {bad2}/1000",
            time.perf_counter() - t0, 30.0)


def test_criterion_04_spectral_closed_form():
    t0 = time.perf_counter()
    worst = 0.0
    for n in np.linspace(4, 400, 20).astype(int):
        for u in np.linspace(0, 0.999, 20):
            p = u * (1 - 1 / n)
            g = spectral_report(three_state(p, n)).gamma_star
            closed = 1 - max(abs(1 - 1 / n - 2 * p), 1 - 3 / n)
            worst = max(worst, abs(g - closed), abs(three_state_gamma_star(p, n) - closed))
    for a in np.linspace(0.05, 0.95, 10):
        for b in np.linspace(0.05, 0.95, 10):
            g = spectral_report(two_state(a, b)).gamma_star
            worst = max(worst, abs(g - (1 - abs(1 - a - b))), abs(two_state_gamma_star(a, b) - g))
    verdict(4, "absolute spectral gap closed forms", worst <= 1e-10,
            f"max abs error {worst:.2e} (tol 1e-10)", time.perf_counter() - t0, 1.0)


def test_criterion_05_embedding_class_probabilities():
    t0 = time.perf_counter()
    worst = 0.0
    spread = 0.0
    for n in range(3, 9):
        for t in range(1, n):
            vals = []
            for seed in range(3):
                emb = k_state_embed(sample_symmetric_T(1, seed=seed), n)
                vals.append(class_prob_enum(emb.chain.table, emb.pi, 3, n, 1, t))
            worst = max(worst, max(abs(v - class_probability("k_embed", t, n)) for v in vals))
            spread = max(spread, max(vals) - min(vals))
    for n in range(5, 9):
        for t in range(2, n - 1):
            vals = []
            for seed in range(3):
                emb = order_m_embed(3, 2, n, seed=seed)
                vals.append(class_prob_enum(emb.chain.table, order_m_stationary(emb.chain), 3, n, 2, t))
            worst = max(worst, max(abs(v - class_probability("order_m", t, n, 2)) for v in vals))
            spread = max(spread, max(vals) - min(vals))
    ok = worst <= 1e-12 and spread <= 1e-12
    verdict(5, "embedding class probabilities vs enumeration (k=3, m=1,2, n<=8)", ok,
            f"max abs error {worst:.2e}, spread over T {spread:.2e} (tol 1e-12)", time.perf_counter() - t0, 60.0)


def test_criterion_06_upper_bound_rate():
    t0 = time.perf_counter()
    rng = np.random.default_rng(6)
    ns = (200, 500, 1000, 2000)
    worst_ratio = 0.0
    for i in range(30):
        k = 3 + i % 4
        n = ns[(i // 4) % 4]
        T = random_chain(k, 1, seed=rng)
        est = mc_risk(T, None, Cesaro(), n, 10_000, seed=i)
        worst_ratio = max(worst_ratio, est.mean / (10 * k * k / n * math.log(n / (k * k))))
    lemma_bad = 0
    lemma_worst = 0.0
    for k, n in ((2, 10), (3, 8), (4, 7)):
        for s in range(3):
            T = random_chain(k, 1, seed=100 * k + s)
            pi = stationary_distribution(T.table)
            risk = exact_risk(T, pi, Cesaro(), n - 1).mean
            bound = exact_redundancy(T, pi, n).total / (n - 1)
            lemma_worst = max(lemma_worst, risk / bound)
            lemma_bad += risk > bound + 1e-12
    ok = worst_ratio <= 1.0 and lemma_bad == 0
    verdict(6, "Cesaro MC risk <= 10 (k^2/n) log(n/k^2); exact risk <= redundancy/(n-1)", ok,
            f"max risk/(10*rate) {worst_ratio:.4f} over 30 chains; risk/bound max {lemma_worst:.3f}, "
            f"violations {lemma_bad}/9", time.perf_counter() - t0, 300.0)


def test_criterion_07_pseudo_gap():
    t0 = time.perf_counter()
    c1, c2 = 0.5, 1.5
    bad = 0
    margin = math.inf
    for i in range(100):
        ell = 2 + i % 2
        m = 1 + (i // 2) % 2
        T = sample_uniform_stationary_T(ell, m, c1, c2, seed=i)
        lifted = lift_block_chain(T)
        ps = pseudo_spectral_gap(lifted, lifted_stationary(T, order_m_stationary(T)), m=m).value
        bound = c1 ** (2 * m + 3) / (c2 * (m + 1))
        margin = min(margin, ps / bound)
        bad += ps < bound
    rng = np.random.default_rng(7)
    hoff_bad = 0
    for _ in range(100):
        d = int(rng.integers(2, 7))
        hoff_bad += not hoffman_check(rng.dirichlet(np.ones(d), size=d))
    verdict(7, "pseudo spectral gap lower bound; Hoffman check", bad == 0 and hoff_bad == 0,
            f"gap violations {bad}/100 (min gap/bound {margin:.2f}), Hoffman failures {hoff_bad}/100",
            time.perf_counter() - t0, 30.0)


def test_criterion_08_binary_gap_prior():
    t0 = time.perf_counter()
    g = math.exp(-100)
    prior = binary_gap_prior(g, 1000)
    gap_bad = []
    range_bad = []
    for e, log_a in zip(prior.exponents, prior.log_leave_probs):
        a = math.exp(log_a)
        if not two_state_gamma_star(a, 1 / 1000) > g:
            gap_bad.append(e)
        # compare in log space: log gamma0 = -100
        if not (-100.0 < log_a < -20.0):
            range_bad.append(e)
    ok = not gap_bad and not range_bad
    verdict(8, "binary gap prior at gamma0=e^-100: gamma* > gamma0 and M(2|1) in (gamma0, gamma0^(1/5))", ok,
            f"{len(prior.exponents)} members (exponents {prior.exponents[0]}..{prior.exponents[-1]}); "
            f"gap failures {gap_bad}; range failures at exponents {range_bad}", time.perf_counter() - t0, 1.0)


def _gap_grid(g, n):
    pairs = [(g / 2, g / 2), (g, 1 / n), (1e-6, 1 / n), (1e-3, 0.05), (0.02, 0.02), (0.05, 0.3),
             (0.2, 0.1), (0.5, 1 / n), (0.5, 0.5)]
    return [(a, b) for a, b in pairs if two_state_gamma_star(a, b) >= g * (1 - 1e-12)]


def test_criterion_09_hybrid_rate():
    t0 = time.perf_counter()
    n = 20
    worst = 0.0
    detail = []
    for g in (math.exp(-10), math.exp(-100)):
        ref = max(1.0, math.log(math.log(min(n, 1 / g)))) / n
        top = 0.0
        for a, b in _gap_grid(g, n):
            r = exact_risk(two_state(a, b), two_state_stationary(a, b), Hybrid(g), n).mean
            top = max(top, r)
        worst = max(worst, top / (50 * ref))
        detail.append(f"gamma0=e^{round(math.log(g))}: max risk {top:.4f}, 50*ref {50 * ref:.3f}")
    verdict(9, "hybrid exact risk (n=20) <= 50 (1/n) max(1, log log min(n, 1/gamma0))", worst <= 1.0,
            "; ".join(detail), time.perf_counter() - t0, 120.0)


def test_criterion_10_concentration():
    t0 = time.perf_counter()
    pi = np.array([0.2, 0.5, 0.3])
    iid = conditional_moment_check(np.tile(pi, (3, 1)), pi, 0, 1, 50, 2, "transition", 50_000, seed=10)
    exact = iid_transition_second_moment(pi, 0, 1, 50)
    iid_ok = abs(iid.empirical - exact) <= 4 * iid.stderr
    ratios = []
    M = two_state(0.3, 0.3)
    for i in range(2):
        for j in range(2):
            for order in (2, 4):
                ratios.append(conditional_moment_check(M, None, i, j, 500, order, "transition", 20_000,
                                                       seed=11 + 4 * i + 2 * j + order, C=DEFAULT_C).ratio)
    ratios.append(conditional_moment_check(three_state(0.4, 100), None, 0, 0, 100, 4, "visit", 20_000,
                                           seed=30, C=DEFAULT_C).ratio)
    tail = kl_tail_check(np.full(10, 0.1), 1000, 10_000, seed=31, c0=DEFAULT_SLACK)
    ok = iid_ok and max(ratios) <= 1.0 and tail.passed
    verdict(10, "concentration harness", ok,
            f"iid |emp-exact| {abs(iid.empirical - exact):.4f} vs 4SE {4 * iid.stderr:.4f}; "
            f"max moment ratio {max(ratios):.4f} (C={DEFAULT_C:g}); "
            f"KL q99.9 {tail.quantiles['0.999']:.5f} vs {tail.threshold:.3f}", time.perf_counter() - t0, 300.0)


def _run_cli(argv):
    buf = io.StringIO()
    with redirect_stdout(buf):
        code = main(argv)
    return code, buf.getvalue().encode()


def test_criterion_11_cli_determinism():
    t0 = time.perf_counter()
    mismatched = []
    for cmd in sorted(COMMANDS):
        argv = ["--seed", "11", "--deterministic", cmd]
        first = _run_cli(argv)
        second = _run_cli(argv)
        if first[0] != 0 or first != second:
            mismatched.append(cmd)
    verdict(11, "CLI byte-reproducibility under --deterministic", not mismatched,
            f"{len(COMMANDS) - len(mismatched)}/{len(COMMANDS)} commands identical; mismatched {mismatched}",
            time.perf_counter() - t0)


if __name__ == "__main__":
    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion_"):
            try:
                fn()
            except AssertionError:
                pass
