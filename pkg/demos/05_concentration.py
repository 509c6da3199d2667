"""Empirical checks of the concentration inequalities behind the upper bounds."""

import json

import numpy as np

from markovpred.concentration import conditional_moment_check, hoffman_check, kl_tail_check
from markovpred.constructions import two_state

M = two_state(0.3, 0.3)
for order in (2, 4):
    r = conditional_moment_check(M, None, 0, 1, 500, order, "transition", 20_000, seed=order)
    print(f"order {order} moment: empirical {r.empirical:.1f}, C*bound {r.bound:.1f}, ratio {r.ratio:.3f}")

tail = kl_tail_check(np.full(10, 0.1), 1000, 10_000, seed=1)
print("\nadd-one KL tail, k=10, m=1000:")
print(json.dumps({"quantiles": tail.quantiles, "threshold": tail.threshold}, indent=2))

rng = np.random.default_rng(0)
ok = all(hoffman_check(rng.dirichlet(np.ones(4), size=4)) for _ in range(100))
print("\nHoffman bound holds on 100 random positive 4x4 stochastic matrices:", ok)
