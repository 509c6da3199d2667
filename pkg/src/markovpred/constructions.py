"""Lower-bound chain families, their event probabilities and prior samplers.

State ``0`` plays the role of the nuisance state in the embeddings; the
remaining states ``1..k-1`` form the informative sub-chain. For two-state
chains, state ``0`` is "1" and state ``1`` is "2" in the usual 1-based
notation, so ``P[0, 1]`` is the probability of moving from 1 to 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .chains import (
    OrderMTransition,
    TransitionMatrix,
    all_tuples,
    block_codes,
    index_tuple,
    random_chain,
    reverse_index_map,
    stationary_distribution,
)
from .errors import (
    GammaTooLarge,
    HorizonTooSmall,
    IndexOutOfRange,
    NotSymmetric,
    ParameterOutOfRange,
)
from .seeding import as_generator

BINARY_PRIOR_MAX_GAMMA0 = math.exp(-math.exp(5.0))


def three_state(p: float, n: int) -> TransitionMatrix:
    """Symmetric three-state chain with a slow nuisance state ``0``.

    Row 0 stays with probability ``1 - 2/n`` and moves to each other state
    with ``1/n``; states 1 and 2 return to 0 with ``1/n`` and swap with ``p``.
    """
    if n < 3:
        raise ParameterOutOfRange(f"need n >= 3, got {n}")
    if not 0.0 <= p <= 1.0 - 1.0 / n + 1e-15:
        raise ParameterOutOfRange(f"p must lie in [0, 1 - 1/n], got {p}")
    q = 1.0 / n
    stay = max(0.0, 1.0 - q - p)
    return TransitionMatrix(
        np.array(
            [
                [1.0 - 2.0 * q, q, q],
                [q, stay, p],
                [q, p, stay],
            ]
        )
    )


def three_state_gamma_star(p: float, n: int) -> float:
    return 1.0 - max(abs(1.0 - 1.0 / n - 2.0 * p), 1.0 - 3.0 / n)


def two_state(a: float, b: float) -> TransitionMatrix:
    """``P[0, 1] = a``, ``P[1, 0] = b``."""
    return TransitionMatrix(np.array([[1.0 - a, a], [b, 1.0 - b]]))


def two_state_gamma_star(a: float, b: float) -> float:
    """``1 - |1 - a - b|`` without cancellation when ``a + b`` is tiny."""
    return a + b if a + b <= 1.0 else 2.0 - a - b


def two_state_stationary(a: float, b: float) -> np.ndarray:
    """``(b, a) / (a + b)``; exact even when ``a`` is far below the support cutoff."""
    return np.array([b, a]) / (a + b)


@dataclass(frozen=True, eq=False)
class EmbeddedChain:
    chain: OrderMTransition
    T: np.ndarray
    n: int
    k: int
    m: int
    pi: np.ndarray = field(repr=False)

    @property
    def matrix(self) -> TransitionMatrix:
        if self.m != 1:
            raise ValueError("only first-order embeddings have a square matrix")
        return TransitionMatrix(self.chain.table)


def k_state_embed(T, n: int) -> EmbeddedChain:
    """Embed a symmetric ``(k-1)``-state chain ``T`` behind a sticky state ``0``.

    ``M(0|0) = 1 - 1/n``, ``M(j|0) = 1/(n(k-1))``, ``M(0|i) = 1/n`` and
    ``M(j|i) = (1 - 1/n) T(j|i)`` for ``i, j >= 1``. The stationary law is
    ``(1/2, 1/(2(k-1)), ...)``.
    """
    T = np.asarray(T, dtype=float)
    if T.ndim != 2 or T.shape[0] != T.shape[1]:
        raise NotSymmetric("T must be square")
    if not np.allclose(T, T.T, rtol=0.0, atol=1e-12):
        raise NotSymmetric("T must be symmetric")
    if n < 2:
        raise ParameterOutOfRange(f"need n >= 2, got {n}")
    k = T.shape[0] + 1
    if k < 3:
        raise ParameterOutOfRange("need k >= 3")
    M = np.empty((k, k))
    M[0, 0] = 1.0 - 1.0 / n
    M[0, 1:] = 1.0 / (n * (k - 1))
    M[1:, 0] = 1.0 / n
    M[1:, 1:] = (1.0 - 1.0 / n) * T
    pi = np.full(k, 1.0 / (2 * (k - 1)))
    pi[0] = 0.5
    return EmbeddedChain(OrderMTransition(M, k, 1), T, n, k, 1, pi)


def sample_symmetric_T(k0: int, seed=None) -> np.ndarray:
    """Random symmetric stochastic matrix on ``2 k0`` states from the uniform-block prior.

    With ``u_ij = u_ji`` iid uniform on ``[1/(4k0), 3/(4k0)]`` for ``i <= j``:
    ``T[2i, 2j] = T[2i+1, 2j+1] = u_ij`` and
    ``T[2i, 2j+1] = T[2i+1, 2j] = 1/k0 - u_ij``.
    """
    return sample_property_p_T(k0, 1, seed).table.copy()


def _representative(mid: tuple) -> tuple:
    return min(mid, tuple(reversed(mid)))


def sample_property_p_T(k0: int, m: int, seed=None) -> OrderMTransition:
    """Order-``m`` table on ``2 k0`` symbols whose reversal symmetry forces a uniform law.

    Context ``(a, x^{m-1})`` with next symbol ``c`` gets ``u[a//2, x, c//2]``
    when ``a`` and ``c`` have equal parity and ``1/k0 - u[...]`` otherwise.
    The ``u`` values are iid uniform on ``[1/(4k0), 3/(4k0)]`` over pairs
    ``i <= j`` and representatives ``x = min(x, reversed x)``, and are copied
    to ``(j, x, i)`` and the reversed middle. The result satisfies
    ``T(x_{m+1} | x^m) = T(x_1 | reversed x_2^{m+1})``.
    """
    if k0 < 1 or m < 1:
        raise ParameterOutOfRange("need k0 >= 1 and m >= 1")
    rng = as_generator(seed)
    ell = 2 * k0
    lo, hi = 1.0 / (4 * k0), 3.0 / (4 * k0)
    reps = sorted({_representative(tuple(t)) for t in all_tuples(ell, m - 1).tolist()})
    u = {}
    for rep in reps:
        for i in range(k0):
            for j in range(i, k0):
                u[(i, rep, j)] = rng.uniform(lo, hi)
    table = np.empty((ell ** m, ell))
    for ctx in range(ell ** m):
        x = index_tuple(ctx, ell, m)
        a, mid = x[0], _representative(tuple(x[1:]))
        for c in range(ell):
            i, j = sorted((a // 2, c // 2))
            val = u[(i, mid, j)]
            table[ctx, c] = val if a % 2 == c % 2 else 1.0 / k0 - val
    return OrderMTransition(table, ell, m)


def sample_uniform_stationary_T(ell: int, m: int, c1: float = 0.5, c2: float = 1.5, seed=None) -> OrderMTransition:
    """Order-``m`` table on ``ell`` symbols with entries in ``[c1/ell, c2/ell]`` and uniform law.

    For each middle block ``x^{m-1}`` (up to reversal) the map
    ``(a, c) -> T(c | a, x^{m-1})`` is a symmetric doubly stochastic matrix
    ``(1 - w) J / ell + w S`` with ``S`` a random mixture of involution
    permutation matrices. The reversed middle block gets the same matrix, so
    the reversal symmetry (and hence the uniform law) holds for any ``ell``.
    """
    if not 0 < c1 <= 1 <= c2:
        raise ParameterOutOfRange("need 0 < c1 <= 1 <= c2")
    rng = as_generator(seed)
    w_max = min(1.0 - c1, (c2 - 1.0) / (ell - 1))
    reps = sorted({_representative(tuple(t)) for t in all_tuples(ell, m - 1).tolist()})
    blocks = {}
    for rep in reps:
        S = np.zeros((ell, ell))
        weights = rng.dirichlet(np.ones(3))
        for wgt in weights:
            perm = np.arange(ell)
            order = rng.permutation(ell)
            for a, b in zip(order[0::2], order[1::2]):
                if rng.random() < 0.5:
                    perm[a], perm[b] = b, a
            S[np.arange(ell), perm] += wgt
        w = rng.uniform(0.0, w_max)
        blocks[rep] = (1.0 - w) / ell + w * S
    table = np.empty((ell ** m, ell))
    for ctx in range(ell ** m):
        x = index_tuple(ctx, ell, m)
        table[ctx] = blocks[_representative(tuple(x[1:]))][x[0]]
    return OrderMTransition(table, ell, m)


# --- binary gap prior -------------------------------------------------------


@dataclass(frozen=True)
class BinaryGapPrior:
    gamma0: float
    n: int
    alpha: float
    beta: int
    exponents: tuple

    @property
    def support(self) -> list[TransitionMatrix]:
        return [two_state(self.alpha ** (-e), 1.0 / self.n) for e in self.exponents]

    @property
    def leave_probs(self) -> np.ndarray:
        """``M(2|1) = alpha^{-e}`` for each support point."""
        return np.array([self.alpha ** (-e) for e in self.exponents])

    @property
    def log_leave_probs(self) -> np.ndarray:
        return -np.asarray(self.exponents, dtype=float) * math.log(self.alpha)

    @property
    def weights(self) -> np.ndarray:
        return np.full(len(self.exponents), 1.0 / len(self.exponents))


def binary_gap_prior(gamma0: float, n: int, strict: bool = False) -> BinaryGapPrior:
    """Uniform prior on two-state chains with ``M(1|2) = 1/n`` and ``M(2|1) = alpha^{-e}``.

    ``alpha = log(1/gamma0)``, ``beta = ceil(alpha / (5 log alpha))`` and ``e``
    ranges over the integers strictly between ``beta`` and ``5 beta``.

    The lower-bound argument needs ``gamma0 <= e^{-e^5}``; ``strict=True``
    enforces that. Otherwise only ``gamma0 < e^{-e}`` is required, which keeps
    ``log alpha > 1`` and the support well defined.

    Raises:
        GammaTooLarge: ``gamma0`` above the applicable threshold.
    """
    if not 0.0 < gamma0 < 1.0:
        raise ParameterOutOfRange(f"gamma0 must lie in (0, 1), got {gamma0}")
    if strict and gamma0 > BINARY_PRIOR_MAX_GAMMA0:
        raise GammaTooLarge(f"gamma0 must be at most e^(-e^5) ~ {BINARY_PRIOR_MAX_GAMMA0:.3g}")
    if gamma0 >= math.exp(-math.e):
        raise GammaTooLarge(f"gamma0 must be below e^(-e) ~ {math.exp(-math.e):.3g}")
    if n < 2:
        raise ParameterOutOfRange("need n >= 2")
    alpha = math.log(1.0 / gamma0)
    beta = math.ceil(alpha / (5.0 * math.log(alpha)))
    exps = tuple(range(beta + 1, 5 * beta))
    return BinaryGapPrior(gamma0, n, alpha, beta, exps)


# --- second order ---------------------------------------------------------


def second_order_binary(p: float, n: int) -> OrderMTransition:
    """Second-order binary table indexed by the context ``(x_{t-1}, x_t)``.

    In 1-based labels: rows ``11: (1-1/n, 1/n)``, ``21: (1/n, 1-1/n)``,
    ``12: (1-p, p)``, ``22: (p, 1-p)``.
    """
    if not 0.0 <= p <= 1.0:
        raise ParameterOutOfRange(f"p must lie in [0, 1], got {p}")
    if n < 2:
        raise ParameterOutOfRange("need n >= 2")
    q = 1.0 / n
    table = np.empty((4, 2))
    table[0b00] = (1 - q, q)   # 11
    table[0b10] = (q, 1 - q)   # 21
    table[0b01] = (1 - p, p)   # 12
    table[0b11] = (p, 1 - p)   # 22
    return OrderMTransition(table, 2, 2)


# --- order-m embedding ------------------------------------------------------


def order_m_b(m: int, n: int) -> float:
    return 0.5 - (2 ** m - 2) / n


def order_m_embed(k: int, m: int, n: int, T: Optional[OrderMTransition] = None, seed=None) -> EmbeddedChain:
    """Order-``m`` chain that idles in ``0^m`` before entering the sub-alphabet ``1..k-1``.

    Rows, with ``b = 1/2 - (2^m - 2)/n`` and ``S = {1, ..., k-1}``:
    ``0^m -> (1 - 1/n, 1/(n(k-1)))``; ``0 S^{m-1} -> (1 - b, b/(k-1))``;
    ``S^m -> (1/n, (1 - 1/n) T)``; all other contexts ``-> (1/2, 1/(2(k-1)))``.
    ``T`` must satisfy the reversal symmetry; when omitted it is drawn by
    ``sample_property_p_T``, which needs ``k - 1`` even. For ``m = 1`` this is
    ``k_state_embed``.

    Raises:
        HorizonTooSmall: ``b <= 0``.
    """
    if k < 3:
        raise ParameterOutOfRange("need k >= 3")
    if T is None:
        if (k - 1) % 2:
            raise ParameterOutOfRange("sampling T needs k - 1 even")
        T = sample_property_p_T((k - 1) // 2, m, seed)
    if T.k != k - 1 or T.m != m:
        raise ParameterOutOfRange(f"T must be an order-{m} table on {k - 1} symbols")
    if m == 1:
        return k_state_embed(T.table, n)
    b = order_m_b(m, n)
    if b <= 0:
        raise HorizonTooSmall(f"need n > 2(2^m - 2) = {2 * (2 ** m - 2)} for b > 0, got n={n}")
    ell = k - 1
    q = 1.0 / n
    ctxs = all_tuples(k, m)
    in_s = ctxs > 0
    table = np.empty((k ** m, k))
    pi = np.empty(k ** m)
    for idx, (x, s) in enumerate(zip(ctxs, in_s)):
        d = int(s.sum())
        if d == 0:
            table[idx, 0], table[idx, 1:] = 1 - q, q / ell
            pi[idx] = 0.5
        elif d == m:
            sub = block_codes(x - 1, ell, m)[0]
            table[idx, 0] = q
            table[idx, 1:] = (1 - q) * T.table[sub]
            pi[idx] = b / ell ** m
        else:
            if not s[0] and s[1:].all():
                table[idx, 0], table[idx, 1:] = 1 - b, b / ell
            else:
                table[idx, 0], table[idx, 1:] = 0.5, 0.5 / ell
            pi[idx] = q / ell ** d
    return EmbeddedChain(OrderMTransition(table, k, m), T.table, n, k, m, pi)


# --- class probabilities ---------------------------------------------------


def class_index(x, m: int = 1) -> Optional[int]:
    """``t`` when ``x = 0^t s`` with every symbol of ``s`` nonzero, else ``None``.

    Valid ``t`` ranges over ``1..n-1`` for ``m = 1`` and ``m..n-m`` otherwise.
    """
    x = np.asarray(x)
    n = x.size
    nz = np.flatnonzero(x != 0)
    if nz.size == 0:
        return None
    t = int(nz[0])
    if nz.size != n - t:
        return None
    lo, hi = (1, n - 1) if m == 1 else (m, n - m)
    return t if lo <= t <= hi else None


def class_probability(family: str, t: int, n: int, m: int = 1) -> float:
    """Probability that a stationary trajectory starts with exactly ``t`` nuisance symbols.

    ``family`` is ``"three_state"``, ``"k_embed"`` or ``"order_m"``; none of
    the answers depend on the free parameters (``p`` or ``T``).

    Raises:
        IndexOutOfRange: ``t`` outside the family's valid range.
    """
    if family == "three_state":
        if not 1 <= t <= n - 1:
            raise IndexOutOfRange(f"t must lie in 1..{n - 1}")
        return 2.0 / (3 * n) * (1 - 1 / n) ** (n - 2) * (1 - 1 / (n - 1)) ** (t - 1)
    if family == "k_embed" or (family == "order_m" and m == 1):
        if not 1 <= t <= n - 1:
            raise IndexOutOfRange(f"t must lie in 1..{n - 1}")
        return 0.5 * (1 - 1 / n) ** (n - 2) / n
    if family == "order_m":
        if not m <= t <= n - m:
            raise IndexOutOfRange(f"t must lie in {m}..{n - m}")
        return order_m_b(m, n) / (n * 2 ** (m - 1)) * (1 - 1 / n) ** (n - 2 * m)
    raise ValueError(f"unknown family {family!r}")


# --- spectral-gap monotonicity helper ---------------------------------------


def augment_with_idle_state(M, delta: float) -> TransitionMatrix:
    """Append a state that is entered with probability ``delta`` from everywhere.

    ``M~ = [[(1-delta) M, delta 1], [(1-delta) pi, delta]]``; the stationary
    law is ``((1-delta) pi, delta)``.
    """
    if not 0.0 < delta < 1.0:
        raise ParameterOutOfRange("delta must lie in (0, 1)")
    P = np.asarray(M, dtype=float)
    pi = stationary_distribution(P)
    k = P.shape[0]
    out = np.empty((k + 1, k + 1))
    out[:k, :k] = (1 - delta) * P
    out[:k, k] = delta
    out[k, :k] = (1 - delta) * pi
    out[k, k] = delta
    return TransitionMatrix(out)


def augmented_gamma_star(gamma_star: float, delta: float) -> float:
    """Absolute gap after augmentation: the nontrivial spectrum scales by ``1 - delta``."""
    return delta + (1 - delta) * gamma_star


# --- family strings ---------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Family:
    kind: str
    params: dict
    chains: list
    weights: np.ndarray

    @property
    def chain(self):
        if len(self.chains) != 1:
            raise ValueError(f"{self.kind} is a prior with {len(self.chains)} members")
        return self.chains[0]


def parse_family(spec: str) -> Family:
    """Build a chain family from strings like ``"three_state:p=0.2,n=100"``.

    Kinds: ``three_state`` (``p``, ``n``), ``k_embed`` (``k``, ``n``, ``seed``),
    ``binary_prior`` (``gamma0``, ``n``), ``order_m`` (``k``, ``m``, ``n``,
    ``seed``), ``second_order`` (``p``, ``n``), ``two_state`` (``a``, ``b``) and
    ``random`` (``k``, optional ``m`` and ``seed``; Dirichlet rows).
    """
    kind, _, body = spec.strip().partition(":")
    params = {}
    for part in filter(None, body.split(",")):
        key, sep, val = part.partition("=")
        if not sep:
            raise ValueError(f"malformed family parameter {part!r}")
        params[key.strip()] = val.strip()

    def need(name, conv):
        if name not in params:
            raise ValueError(f"family {kind} needs parameter {name!r}")
        return conv(params[name])

    if kind == "three_state":
        chains = [three_state(need("p", float), need("n", int))]
    elif kind == "k_embed":
        k = need("k", int)
        if (k - 1) % 2:
            raise ParameterOutOfRange("k_embed samples T on k - 1 states, which must be even")
        T = sample_symmetric_T((k - 1) // 2, int(params.get("seed", 0)))
        chains = [k_state_embed(T, need("n", int)).chain]
    elif kind == "binary_prior":
        chains = binary_gap_prior(need("gamma0", float), need("n", int)).support
    elif kind == "order_m":
        emb = order_m_embed(need("k", int), need("m", int), need("n", int), seed=int(params.get("seed", 0)))
        chains = [emb.chain]
    elif kind == "second_order":
        chains = [second_order_binary(need("p", float), need("n", int))]
    elif kind == "two_state":
        chains = [two_state(need("a", float), need("b", float))]
    elif kind == "random":
        chains = [random_chain(need("k", int), int(params.get("m", 1)), int(params.get("seed", 0)))]
    else:
        raise ValueError(f"unknown family kind {kind!r}")
    w = np.full(len(chains), 1.0 / len(chains))
    return Family(kind, dict(params), chains, w)


def reversal_symmetric(T: OrderMTransition, atol: float = 1e-12) -> bool:
    """``T(x_{m+1} | x^m) == T(x_1 | reversed x_2^{m+1})`` for every tuple."""
    k, m = T.k, T.m
    xs = all_tuples(k, m + 1)
    head = block_codes(xs[:, :m], k, m)[:, 0]
    tail_rev = block_codes(xs[:, :0:-1], k, m)[:, 0]
    return bool(np.allclose(T.table[head, xs[:, m]], T.table[tail_rev, xs[:, 0]], rtol=0, atol=atol))


__all__ = [
    "BinaryGapPrior", "EmbeddedChain", "Family", "augment_with_idle_state", "augmented_gamma_star",
    "binary_gap_prior", "class_index", "class_probability", "k_state_embed", "order_m_b", "order_m_embed",
    "parse_family", "reversal_symmetric", "sample_property_p_T", "sample_symmetric_T",
    "sample_uniform_stationary_T", "second_order_binary", "three_state", "three_state_gamma_star",
    "two_state", "two_state_gamma_star", "two_state_stationary", "reverse_index_map",
]
