"""Order-m chains: stationary laws, reversibility and the pseudo spectral gap."""

import numpy as np

from markovpred.chains import (
    check_order_m_reversible,
    lift_block_chain,
    lifted_stationary,
    order_m_stationary,
    pseudo_spectral_gap,
)
from markovpred.constructions import order_m_embed, sample_uniform_stationary_T, second_order_binary

T = second_order_binary(0.3, 20)
pi = order_m_stationary(T)
print("second-order binary chain, stationary law on blocks:", pi, "reversible:", check_order_m_reversible(T, pi))

emb = order_m_embed(3, 2, 100, seed=0)
pi = order_m_stationary(emb.chain).reshape(3, 3)
print("\norder-2 embedding, k=3, n=100; stationary law on pairs:\n", np.round(pi, 5))

print("\npseudo spectral gap of the lifted chain vs the lower bound c1^(2m+3)/(c2(m+1))")
for m in (1, 2):
    T = sample_uniform_stationary_T(3, m, seed=m)
    ps = pseudo_spectral_gap(lift_block_chain(T), lifted_stationary(T), m=m)
    print(f"  m={m}: gap {ps.value:.4f} at r={ps.r}, bound {0.5 ** (2 * m + 3) / (1.5 * (m + 1)):.5f}")
