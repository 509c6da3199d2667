"""Binary chains with a known spectral-gap floor gamma0.

When the gap can be tiny, step sequences 1^{n-l} 2^l are informative: the
hybrid estimator predicts a leave probability 1/(l log(1/gamma0)) on them and
falls back to add-1/2 elsewhere.
"""

import math

from markovpred import AddC, Hybrid, exact_risk
from markovpred.bayes import binary_prior_bayes
from markovpred.constructions import binary_gap_prior, two_state, two_state_stationary

n = 16
g = math.exp(-100)
print(f"n={n}, gamma0=e^-100; exact risks (nats)")
print(f"{'a':>9} {'b':>7} {'hybrid':>8} {'add-1':>8} {'add-1/2':>8}")
for a, b in ((1e-6, 1 / n), (1e-3, 0.05), (0.05, 0.05), (0.3, 0.3)):
    P, pi = two_state(a, b), two_state_stationary(a, b)
    r = [exact_risk(P, pi, pred, n).mean for pred in (Hybrid(g), AddC(1.0), AddC(0.5))]
    print(f"{a:9.1e} {b:7.3f} " + " ".join(f"{v:8.4f}" for v in r))

prior = binary_gap_prior(1e-8, 10 ** 6)
print(f"\nprior at gamma0=1e-8, n=10^6: alpha={prior.alpha:g}, beta={prior.beta}, exponents {prior.exponents[0]}..{prior.exponents[-1]}")
for ell in (1, 10 ** 3, 10 ** 5, 10 ** 6 - 1):
    print(f"  Bayes leave probability after a run of {ell:>7}: {binary_prior_bayes(ell, prior)[1]:.3e}")
