"""KL loss, prediction risk (exact and Monte-Carlo) and redundancy of the add-one assignment.

All quantities are in nats.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterator, NamedTuple, Optional

import numpy as np
from scipy.special import gammaln

from .chains import (
    ChainLike,
    as_order_m,
    block_codes,
    order_m_stationary,
)
from .errors import InfiniteRisk, NotADistribution, TooLarge, ZeroProbabilityTrajectory
from .estimators import AddC, assignment_logprob_batch, order_of, predict_all
from .seeding import task_rng

ENUMERATION_LIMIT = 10 ** 7
CHUNK_ROWS = 1 << 15
MC_CHUNK = 1 << 14
DIST_TOL = 1e-9

CSV_FIELDS = ("k", "n", "m", "predictor", "mode", "mean_nats", "stderr", "trials", "seed")


# --- KL -------------------------------------------------------------------


def kl_rows(P: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """Row-wise ``D(P || Q)`` with ``0 log 0 = 0`` and ``+inf`` off the support of ``Q``."""
    P = np.asarray(P, dtype=float)
    Q = np.asarray(Q, dtype=float)
    pos = P > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(pos, P * (np.log(np.where(pos, P, 1.0)) - np.log(Q)), 0.0)
    terms = np.where(pos & (Q <= 0), np.inf, terms)
    return terms.sum(axis=-1)


def kl(P, Q) -> float:
    """``D(P || Q)``; ``math.inf`` when ``P`` charges a point ``Q`` does not.

    Raises:
        NotADistribution: either argument is negative somewhere or does not sum
            to 1 within 1e-9.
    """
    P = np.asarray(P, dtype=float)
    Q = np.asarray(Q, dtype=float)
    for name, v in (("P", P), ("Q", Q)):
        if v.ndim != 1 or np.any(v < 0) or abs(v.sum() - 1.0) > DIST_TOL:
            raise NotADistribution(f"{name} is not a probability vector")
    if P.shape != Q.shape:
        raise NotADistribution("P and Q have different lengths")
    return float(kl_rows(P, Q))


# --- trajectory enumeration -----------------------------------------------


def _check_size(k: int, n: int) -> None:
    if n * math.log(k) > math.log(ENUMERATION_LIMIT) + 1e-12:
        raise TooLarge(f"k^n = {k}^{n} exceeds the enumeration limit {ENUMERATION_LIMIT}")


def enumerate_trajectories(k: int, n: int, start: int = 0, stop: Optional[int] = None,
                           chunk: int = CHUNK_ROWS) -> Iterator[np.ndarray]:
    """All of ``[k]^n`` in lexicographic (odometer) order, as ``(rows, n)`` chunks."""
    total = k ** n
    stop = total if stop is None else stop
    powers = k ** np.arange(n - 1, -1, -1, dtype=np.int64)
    for lo in range(start, stop, chunk):
        idx = np.arange(lo, min(lo + chunk, stop), dtype=np.int64)
        yield (idx[:, None] // powers[None, :]) % k


def path_logprob(T, pi: np.ndarray, X: np.ndarray) -> np.ndarray:
    """``log P(x^n)`` of each row under an order-``m`` chain started from ``pi`` on ``[k]^m``.

    Rows shorter than ``m`` use the marginal of ``pi`` on the leading symbols.
    """
    T = as_order_m(T)
    k, m = T.k, T.m
    X = np.asarray(X, dtype=np.int64)
    n = X.shape[1]
    pi = np.asarray(pi, dtype=float)
    with np.errstate(divide="ignore"):
        if n < m:
            marg = pi.reshape((k,) * m).sum(axis=tuple(range(n, m))).ravel()
            return np.log(marg[block_codes(X, k, n)[:, 0]])
        lp = np.log(pi[block_codes(X[:, :m], k, m)[:, 0]])
        if n > m:
            ctx = block_codes(X[:, :-1], k, m)
            lp = lp + np.log(T.table[ctx, X[:, m:]]).sum(axis=1)
    return lp


def _resolve_pi(T, pi):
    return order_m_stationary(T) if pi is None else np.asarray(pi, dtype=float)


# --- risk -----------------------------------------------------------------


@dataclass(frozen=True)
class RiskEstimate:
    mean: float
    stderr: float
    trials: int
    mode: str

    @property
    def ci95(self) -> tuple[float, float]:
        half = 1.959963984540054 * self.stderr
        return (self.mean - half, self.mean + half)


def _risk_partial(T, pi, pred, n, lo, hi) -> float:
    k, m = T.k, T.m
    total = 0.0
    for X in enumerate_trajectories(k, n, lo, hi):
        lp = path_logprob(T, pi, X)
        keep = np.isfinite(lp)
        if not np.any(keep):
            continue
        X = X[keep]
        ctx = block_codes(X[:, n - m :], k, m)[:, 0]
        loss = kl_rows(T.table[ctx], predict_all(pred, X, k))
        w = np.exp(lp[keep])
        if np.any(np.isinf(loss) & (w > 0)):
            return math.inf
        total += float(np.dot(w, loss))
    return total


def exact_risk(M: ChainLike, pi: Optional[np.ndarray], pred, n: int, workers: int = 1) -> RiskEstimate:
    """``E[D(M(.|terminal block) || pred(X^n))]`` by summing over every trajectory.

    Zero-probability trajectories are skipped. With ``workers > 1`` the index
    range is split into contiguous parts whose sums are added in index order,
    so the result does not depend on scheduling.

    Raises:
        TooLarge: ``k^n`` exceeds ``10^7``.
    """
    T = as_order_m(M)
    k, m = T.k, T.m
    if n < m:
        raise ValueError(f"need n >= m to read the terminal block (n={n}, m={m})")
    _check_size(k, n)
    pi = _resolve_pi(T, pi)
    total = k ** n
    if workers <= 1:
        value = _risk_partial(T, pi, pred, n, 0, total)
    else:
        edges = np.linspace(0, total, workers + 1).astype(np.int64)
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(lambda i: _risk_partial(T, pi, pred, n, int(edges[i]), int(edges[i + 1])),
                                range(workers)))
        value = math.fsum(parts)
    return RiskEstimate(float(value), 0.0, total, "exact")


def mc_losses(M: ChainLike, pi: Optional[np.ndarray], pred, n: int, trials: int, seed: int = 0,
              sim_mode: str = "direct") -> np.ndarray:
    """Per-trial losses; chunk ``i`` draws from the stream derived from ``(seed, i)``."""
    from .chains import simulate_batch

    T = as_order_m(M)
    k, m = T.k, T.m
    pi = _resolve_pi(T, pi)
    out = np.empty(trials)
    for i, lo in enumerate(range(0, trials, MC_CHUNK)):
        b = min(MC_CHUNK, trials - lo)
        X = simulate_batch(T, n, b, seed=task_rng(seed, i), init=pi, mode=sim_mode)
        ctx = block_codes(X[:, n - m :], k, m)[:, 0]
        out[lo : lo + b] = kl_rows(T.table[ctx], predict_all(pred, X, k))
    return out


def mc_risk(M: ChainLike, pi: Optional[np.ndarray], pred, n: int, trials: int, seed: int = 0,
            sim_mode: str = "direct") -> RiskEstimate:
    """Monte-Carlo risk over independent stationary trajectories.

    Standard error uses the unbiased sample variance.

    Raises:
        InfiniteRisk: some sampled loss is infinite.
    """
    if trials < 2:
        raise ValueError("need at least two trials for a standard error")
    losses = mc_losses(M, pi, pred, n, trials, seed, sim_mode)
    if np.any(np.isinf(losses)):
        raise InfiniteRisk("a sampled trajectory gave infinite KL loss")
    return RiskEstimate(float(losses.mean()), float(losses.std(ddof=1) / math.sqrt(trials)), trials, "mc")


def risk_csv_row(k: int, n: int, m: int, predictor: str, est: RiskEstimate, seed) -> dict:
    return {
        "k": k, "n": n, "m": m, "predictor": predictor, "mode": est.mode,
        "mean_nats": repr(float(est.mean)), "stderr": repr(float(est.stderr)),
        "trials": est.trials, "seed": "" if seed is None else seed,
    }


# --- redundancy -----------------------------------------------------------


class Redundancy(NamedTuple):
    total: float
    per_step: np.ndarray  # D_t, t = 1..n


def _divergence_at_length(T, pi, n: int) -> float:
    k, m = T.k, T.m
    total = 0.0
    for X in enumerate_trajectories(k, n):
        lp = path_logprob(T, pi, X)
        keep = np.isfinite(lp)
        lq = assignment_logprob_batch(X[keep], k, m)
        total += float(np.dot(np.exp(lp[keep]), lp[keep] - lq))
    return total


def _leading_step(T, pi, t: int) -> float:
    """``D_t`` for ``t <= m``: the law of ``x_t`` given ``x^{t-1}`` against uniform."""
    k, m = T.k, T.m
    cube = np.asarray(pi).reshape((k,) * m)
    joint = cube.sum(axis=tuple(range(t, m))).reshape(-1, k)
    prev = joint.sum(axis=1)
    cond = np.divide(joint, prev[:, None], out=np.full_like(joint, 1.0 / k), where=prev[:, None] > 0)
    uniform = np.full(k, 1.0 / k)
    return float(np.dot(prev, kl_rows(cond, uniform)))


def exact_redundancy(M: ChainLike, pi: Optional[np.ndarray], n: int, m: Optional[int] = None) -> Redundancy:
    """``D(P_{X^n} || Q_{X^n})`` for the add-one assignment, plus its chain-rule terms.

    ``per_step[t-1]`` is computed independently of the total: for ``t > m`` it
    is the exact risk of order-``m`` add-one at sample size ``t - 1``; for
    ``t <= m`` it compares the true conditional law to the uniform start.

    Raises:
        TooLarge: ``k^n`` exceeds ``10^7``.
    """
    T = as_order_m(M)
    if m is not None and m != T.m:
        raise ValueError(f"order mismatch: chain has m={T.m}, requested m={m}")
    k, m = T.k, T.m
    _check_size(k, n)
    pi = _resolve_pi(T, pi)
    total = _divergence_at_length(T, pi, n)
    steps = np.empty(n)
    for t in range(1, n + 1):
        if t <= m:
            steps[t - 1] = _leading_step(T, pi, t)
        else:
            steps[t - 1] = exact_risk(T, pi, AddC(1.0, m), t - 1).mean
    return Redundancy(total, steps)


def pointwise_bound(k: int, n: int, m: int = 1) -> float:
    """``k^m (k-1) [log(1 + (n-m) / (k^m (k-1))) + 1] + m log k``."""
    d = k ** m * (k - 1)
    return d * (math.log1p(max(n - m, 0) / d) + 1.0) + m * math.log(k)


@dataclass(frozen=True)
class RedundancyAudit:
    lhs: float
    bound: float
    satisfied: bool


def pointwise_redundancy_audit(M: ChainLike, pi: Optional[np.ndarray], x, m: Optional[int] = None) -> RedundancyAudit:
    """Compare ``log P(x^n) / Q(x^n)`` with the universal add-one bound.

    Raises:
        ZeroProbabilityTrajectory: ``x`` has probability zero under the chain.
    """
    T = as_order_m(M)
    if m is not None and m != T.m:
        raise ValueError(f"order mismatch: chain has m={T.m}, requested m={m}")
    k, m = T.k, T.m
    pi = _resolve_pi(T, pi)
    X = np.asarray(x, dtype=np.int64)[None, :]
    lp = float(path_logprob(T, pi, X)[0])
    if not np.isfinite(lp):
        raise ZeroProbabilityTrajectory("trajectory has zero probability under the chain")
    lhs = lp - float(assignment_logprob_batch(X, k, m)[0])
    bound = pointwise_bound(k, X.shape[1], m)
    return RedundancyAudit(lhs, bound, lhs <= bound + 1e-9)


def type_count_inequality_check(counts) -> bool:
    """``prod (n_i/n)^{n_i} <= prod n_i! / n!``, compared in log-space."""
    c = np.asarray(counts, dtype=float)
    if c.ndim != 1 or np.any(c < 0) or c.sum() < 1:
        raise ValueError("need non-negative counts with positive total")
    n = c.sum()
    pos = c[c > 0]
    lhs = float(np.sum(pos * np.log(pos / n)))
    rhs = float(gammaln(c + 1).sum() - gammaln(n + 1))
    return lhs <= rhs + 1e-9 * max(1.0, abs(rhs))


def predictor_order(pred) -> int:
    return order_of(pred)
