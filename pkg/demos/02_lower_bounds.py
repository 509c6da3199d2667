"""Lower-bound constructions: the trapped three-state chain and its Bayes risk.

A trajectory that sits in the nuisance state for t steps leaves only n - t
observations of the informative pair. Averaging over t gives a Bayes risk of
order log(n)/n, which the table below makes visible.
"""

import math

import numpy as np

from markovpred.bayes import beta_binomial, second_order_bayes, step_count, three_state_bayes_risk
from markovpred.constructions import class_probability, k_state_embed, sample_symmetric_T

b = beta_binomial(1, 3)
print(f"Beta-Binomial after N=1 success in m=3 trials: posterior mean {b.mean:.3f}, Bayes risk {b.risk:.4f}")

print(f"\n{'n':>6} {'Bayes risk':>12} {'x n/log n':>10}")
for j in range(5, 15, 2):
    n = 2 ** j
    r = three_state_bayes_risk(n)
    print(f"{n:>6} {r:12.3e} {r * n / math.log(n):10.5f}")

emb = k_state_embed(sample_symmetric_T(2, seed=0), 50)
print("\nk-state embedding stationary law:", np.round(emb.pi, 4))
print("P(first t symbols are the nuisance state), n=50:",
      [round(class_probability('k_embed', t, 50), 6) for t in (1, 25, 49)], "(does not depend on t)")

print("\nsecond-order family: Bayes estimate (y+2)/(f+3) and number of block skeletons C(f, y)")
for f in range(1, 5):
    print("  f =", f, [(y, round(second_order_bayes(y, f), 3), step_count(y, f)) for y in range(f + 1)])
