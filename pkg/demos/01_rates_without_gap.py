"""Prediction risk of add-one and its Cesaro average on a slowly mixing chain.

The three-state chain below mixes at rate ~1/n, yet the risk of the Cesaro
estimator still decays like (k^2/n) log(n/k^2). We compute it exactly where
enumeration is feasible and by Monte Carlo beyond.
"""

import math

from markovpred import AddC, Cesaro, exact_risk, mc_risk
from markovpred.constructions import three_state, three_state_gamma_star

p = 0.25
print(f"{'n':>6} {'gamma*':>8} {'cesaro':>9} {'add-one':>9} {'rate':>8}  mode")
for n in (12, 100, 400, 1600):
    P = three_state(p, n)
    rate = 9 / n * math.log(n / 9)
    if 3 ** n <= 10 ** 7:
        c = exact_risk(P, None, Cesaro(), n).mean
        a = exact_risk(P, None, AddC(1.0), n).mean
        mode = "exact"
    else:
        c = mc_risk(P, None, Cesaro(), n, 4000, seed=n).mean
        a = mc_risk(P, None, AddC(1.0), n, 4000, seed=n).mean
        mode = "mc"
    print(f"{n:>6} {three_state_gamma_star(p, n):8.4f} {c:9.5f} {a:9.5f} {rate:8.4f}  {mode}")

# The Cesaro risk is controlled by the redundancy of the add-one assignment.
from markovpred.chains import random_chain
from markovpred.risk import exact_redundancy, pointwise_bound

T = random_chain(3, 1, seed=1)
n = 8
red = exact_redundancy(T, None, n)
risk = exact_risk(T, None, Cesaro(), n - 1).mean
print(f"\nrandom chain, n={n}: Cesaro risk {risk:.4f} <= redundancy/(n-1) = {red.total / (n - 1):.4f}"
      f" <= bound/(n-1) = {pointwise_bound(3, n) / (n - 1):.4f}")
