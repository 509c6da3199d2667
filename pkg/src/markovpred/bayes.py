"""Closed-form Bayes estimators and Bayes risks for the lower-bound priors.

Labels follow ``constructions``: state 0 is the nuisance state of the
three-state chain and "1" of the binary chains; state 1 is "2".
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from .chains import simulate_batch
from .constructions import BinaryGapPrior, class_index, class_probability, three_state
from .errors import CountExceedsTrials, EmptyPrior, IndexOutOfRange, InvalidCounts, NotInClass
from .seeding import task_rng


@dataclass(frozen=True)
class BetaBinomialPosterior:
    N: int
    m: int

    @property
    def mean(self) -> float:
        return (self.N + 1) / (self.m + 2)

    @property
    def risk(self) -> float:
        """Bayes mean-squared error of the posterior mean, averaged over the prior."""
        return 1.0 / (6 * (self.m + 2))


def beta_binomial(N: int, m: int) -> BetaBinomialPosterior:
    """Posterior of ``q ~ Unif(0,1)`` after ``N`` successes in ``m`` trials."""
    if m < 0 or N < 0 or N > m:
        raise CountExceedsTrials(f"need 0 <= N <= m, got N={N}, m={m}")
    return BetaBinomialPosterior(int(N), int(m))


# --- three-state family -------------------------------------------------------


def cross_count(x) -> int:
    """Number of moves between states 1 and 2."""
    x = np.asarray(x)
    return int(np.sum((x[:-1] != 0) & (x[1:] != 0) & (x[:-1] != x[1:])))


def classify_three_state(x) -> int:
    """The ``t`` with ``x = 0^t s``, ``s`` avoiding state 0, ``1 <= t <= n-1``.

    Raises:
        NotInClass: ``x`` has no such decomposition.
    """
    t = class_index(x, 1)
    if t is None:
        raise NotInClass("trajectory is not an initial run of state 0 followed by states 1, 2 only")
    return t


def three_state_bayes_estimate(x) -> float:
    """Posterior mean of ``p`` under ``p ~ Unif[0, 1 - 1/n]``: ``((n-1)/n)(N+1)/(n-t+1)``."""
    x = np.asarray(x, dtype=np.int64)
    n = x.size
    t = classify_three_state(x)
    return (n - 1) / n * (cross_count(x) + 1) / (n - t + 1)


def three_state_bayes_risk(n: int) -> float:
    """Bayes MSE of ``p`` restricted to the class events, summed over ``t``."""
    if n < 3:
        raise ValueError("need n >= 3")
    c = ((n - 1) / n) ** 2 / 6.0
    return math.fsum(class_probability("three_state", t, n) * c / (n - t + 1) for t in range(1, n))


def three_state_bayes_risk_mc(n: int, trials: int, seed: int = 0) -> tuple[float, float]:
    """Monte-Carlo version: draw ``p``, simulate, score the closed-form estimator on class events.

    Returns ``(mean, stderr)``.
    """
    out = np.empty(trials)
    rng = task_rng(seed, 0)
    ps = rng.uniform(0.0, 1.0 - 1.0 / n, size=trials)
    for i, p in enumerate(ps):
        x = simulate_batch(three_state(p, n), n, 1, seed=task_rng(seed, i + 1),
                           init=np.full(3, 1.0 / 3))[0]
        t = class_index(x, 1)
        out[i] = 0.0 if t is None else (p - three_state_bayes_estimate(x)) ** 2
    return float(out.mean()), float(out.std(ddof=1) / math.sqrt(trials))


def three_state_kl_bayes_risk(pred, n: int, nodes: int = 40) -> float:
    """Prior-averaged exact KL risk of ``pred`` on the three-state family.

    ``p`` is integrated over ``[0, 1 - 1/n]`` by Gauss-Legendre quadrature.
    """
    from .risk import exact_risk

    x, w = np.polynomial.legendre.leggauss(nodes)
    hi = 1.0 - 1.0 / n
    ps = 0.5 * hi * (x + 1.0)
    vals = [exact_risk(three_state(p, n), np.full(3, 1.0 / 3), pred, n).mean for p in ps]
    return float(0.5 * np.dot(w, vals))


# --- binary gap prior ------------------------------------------------------


def binary_prior_bayes(ell: int, prior, weights: Optional[Sequence[float]] = None) -> np.ndarray:
    """Bayes prediction after the step sequence ``1^{n-l} 0^l`` (``2^{n-l} 1^l`` in 1-based labels).

    ``M^B(leave | stay-state) = E[M(1|1)^{l-1} M(2|1)] / E[M(1|1)^{l-1}]`` over the
    prior, computed in log-space. ``prior`` is a ``BinaryGapPrior`` or a
    sequence of leave probabilities ``M(2|1)`` (uniform weights unless given).
    Returns ``(M^B(1|1), M^B(2|1))``.

    Raises:
        EmptyPrior: no support points.
    """
    if isinstance(prior, BinaryGapPrior):
        log_a = prior.log_leave_probs
        if ell > prior.n - 1:
            raise IndexOutOfRange(f"l must lie in 1..{prior.n - 1}")
        w = prior.weights if weights is None else np.asarray(weights, dtype=float)
    else:
        a = np.asarray(prior, dtype=float)
        log_a = np.log(a)
        w = np.full(a.size, 1.0 / max(a.size, 1)) if weights is None else np.asarray(weights, dtype=float)
    if log_a.size == 0:
        raise EmptyPrior("prior has no support points")
    if ell < 1:
        raise IndexOutOfRange("l must be >= 1")
    a = np.exp(log_a)
    logw = np.log(w) + (ell - 1) * np.log1p(-a)
    q = float(np.exp(logsumexp(logw + log_a) - logsumexp(logw)))
    return np.array([1.0 - q, q])


# --- second-order binary family ---------------------------------------------


def second_order_bayes(y: int, f: int) -> float:
    """Posterior mean ``(y + 2) / (f + 3)`` of ``p``."""
    if not 0 <= y <= f:
        raise InvalidCounts(f"need 0 <= y <= f, got y={y}, f={f}")
    return (y + 2) / (f + 3)


def step_count(y: int, f: int) -> int:
    """Number of block paths with ``f`` jumps of which ``y`` alternate: ``C(f, y)``."""
    if not 0 <= y <= f:
        raise InvalidCounts(f"need 0 <= y <= f, got y={y}, f={f}")
    return math.comb(f, y)


def _count_pattern(x: np.ndarray, pat: Sequence[int]) -> int:
    L = len(pat)
    if x.size < L:
        return 0
    win = np.lib.stride_tricks.sliding_window_view(x, L)
    return int(np.all(win == np.asarray(pat), axis=1).sum())


def in_V(x) -> Optional[int]:
    """``t`` when ``x = 0^{n-t} z`` with ``z`` starting ``11``, ending ``1``, no ``00``, ``4 <= t <= n-2``.

    (In 1-based labels: a run of 1's, then ``z`` starting ``22``, ending ``2``
    and never repeating 1.)
    """
    x = np.asarray(x, dtype=np.int64)
    n = x.size
    ones = np.flatnonzero(x != 0)
    if ones.size == 0:
        return None
    t = n - int(ones[0])
    if not 4 <= t <= n - 2:
        return None
    z = x[n - t :]
    if z[0] != 1 or z[1] != 1 or z[-1] != 1:
        return None
    if np.any((z[:-1] == 0) & (z[1:] == 0)):
        return None
    return t


@dataclass(frozen=True)
class BlockCounts:
    F111: int
    F22_22: int
    F22_212: int
    F212_22: int
    F212_212: int

    @property
    def y(self) -> int:
        return self.F212_22 + self.F22_212

    @property
    def f(self) -> int:
        return self.F212_22 + self.F22_212 + self.F212_212 + self.F22_22


def block_counts(x) -> BlockCounts:
    """Pattern counts ``111, 222, 2212, 2122, 21212`` (1-based labels)."""
    x = np.asarray(x, dtype=np.int64)
    return BlockCounts(
        _count_pattern(x, (0, 0, 0)),
        _count_pattern(x, (1, 1, 1)),
        _count_pattern(x, (1, 1, 0, 1)),
        _count_pattern(x, (1, 0, 1, 1)),
        _count_pattern(x, (1, 0, 1, 0, 1)),
    )


def yf_counts(x) -> tuple[int, int]:
    c = block_counts(x)
    return c.y, c.f


def second_order_class_prob(x, p: float) -> float:
    """``mu(x | p) = (1/4)(1-1/n)^{F111 + F2212 + F21212} (1/n) p^{y+1} (1-p)^{f-y}`` on ``V``."""
    x = np.asarray(x, dtype=np.int64)
    if in_V(x) is None:
        raise NotInClass("trajectory is not in the second-order class")
    n = x.size
    c = block_counts(x)
    return 0.25 * (1 - 1 / n) ** (c.F111 + c.F22_212 + c.F212_212) / n * p ** (c.y + 1) * (1 - p) ** (c.f - c.y)


def second_order_bayes_estimate(x) -> float:
    y, f = yf_counts(x)
    if in_V(x) is None:
        raise NotInClass("trajectory is not in the second-order class")
    return second_order_bayes(y, f)
