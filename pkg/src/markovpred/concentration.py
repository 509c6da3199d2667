"""Empirical checks of moment bounds, add-one KL tails, Chebyshev sums and Hoffman's bound.

The bounds hold up to unspecified absolute constants, so every check takes an
explicit constant (``C`` for moments, ``c0`` for tails) and reports the ratio
of the empirical value to the bound.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .chains import as_array, simulate_batch, spectral_report, stationary_distribution
from .errors import NoConditioningMass, ParameterOutOfRange
from .risk import kl_rows
from .seeding import task_rng

DEFAULT_C = 64.0
DEFAULT_SLACK = 20.0
MIN_ACCEPTED = 1000
SIM_CHUNK = 1 << 13


def check_report(check: str, params: dict, empirical: float, bound: float, passed: Optional[bool] = None) -> dict:
    """``{check, params, empirical, bound, ratio, pass}`` with plain JSON types."""
    ratio = empirical / bound if bound > 0 else (0.0 if empirical == 0 else math.inf)
    return {
        "check": check,
        "params": params,
        "empirical": float(empirical),
        "bound": float(bound),
        "ratio": float(ratio),
        "pass": bool(ratio <= 1.0 if passed is None else passed),
    }


# --- moments --------------------------------------------------------------


@dataclass(frozen=True)
class MomentCheck:
    empirical: float
    stderr: float
    bound: float
    ratio: float
    accepted: int
    simulated: int

    @property
    def passed(self) -> bool:
        return self.ratio <= 1.0


def moment_bound(n: int, pi_i: float, m_ij: float, gamma_star: float, order: int, which: str,
                 C: float = DEFAULT_C) -> float:
    """``C`` times the moment bound for transition counts (orders 2, 4) or visit counts (order 4)."""
    g = gamma_star
    if which == "transition":
        lead = n * pi_i * m_ij * (1 - m_ij)
        if order == 2:
            return C * (lead + math.sqrt(m_ij) / g + m_ij / g ** 2)
        if order == 4:
            return C * (lead ** 2 + math.sqrt(m_ij) / g + m_ij ** 2 / g ** 4)
    elif which == "visit":
        if order == 4:
            return C * (n ** 2 * pi_i ** 2 / g ** 2 + 1.0 / g ** 4)
    raise ParameterOutOfRange(f"no bound for order={order}, which={which!r}")


def conditional_samples(M, pi, i: int, n: int, trials: int, seed: int = 0,
                        min_accepted: int = MIN_ACCEPTED, sim_mode: str = "direct") -> np.ndarray:
    """Stationary trajectories of length ``n`` with ``X_n = i``, by rejection.

    At most ``trials`` trajectories are simulated, in chunks with seeds derived
    from ``(seed, chunk)``.

    Raises:
        NoConditioningMass: fewer than ``min_accepted`` trajectories end in ``i``.
    """
    kept = []
    got = 0
    for c, lo in enumerate(range(0, trials, SIM_CHUNK)):
        b = min(SIM_CHUNK, trials - lo)
        X = simulate_batch(M, n, b, seed=task_rng(seed, c), init=pi, mode=sim_mode)
        X = X[X[:, -1] == i]
        kept.append(X)
        got += X.shape[0]
    if got < min_accepted:
        raise NoConditioningMass(
            f"only {got} of {trials} trajectories end in state {i}; need {min_accepted}"
        )
    return np.concatenate(kept)


def conditional_moment_check(M, pi, i: int, j: int, n: int, order: int = 2, which: str = "transition",
                             trials: int = 100_000, seed: int = 0, C: float = DEFAULT_C,
                             sim_mode: str = "direct") -> MomentCheck:
    """Monte-Carlo ``E[(N_ij - N_i M(j|i))^order | X_n = i]`` or ``E[(N_i - (n-1) pi_i)^4 | X_n = i]``.

    Raises:
        NotReversible: ``M`` is not reversible.
        NoConditioningMass: too few trajectories end in ``i``.
    """
    if order not in (2, 4):
        raise ParameterOutOfRange("order must be 2 or 4")
    P = as_array(M)
    rep = spectral_report(P)
    pi = stationary_distribution(P) if pi is None else np.asarray(pi, dtype=float)
    X = conditional_samples(P, pi, i, n, trials, seed, sim_mode=sim_mode)
    at_i = X[:, :-1] == i
    n_i = at_i.sum(axis=1)
    if which == "transition":
        n_ij = (at_i & (X[:, 1:] == j)).sum(axis=1)
        dev = (n_ij - n_i * P[i, j]) ** order
    elif which == "visit":
        dev = (n_i - (n - 1) * pi[i]) ** order
    else:
        raise ParameterOutOfRange(f"which must be 'transition' or 'visit', got {which!r}")
    emp = float(dev.mean())
    se = float(dev.std(ddof=1) / math.sqrt(dev.size))
    bound = moment_bound(n, pi[i], P[i, j], rep.gamma_star, order, which, C)
    return MomentCheck(emp, se, bound, emp / bound, int(dev.size), int(trials))


def iid_transition_second_moment(pi, i: int, j: int, n: int) -> float:
    """Exact ``E[(N_ij - N_i pi_j)^2 | X_n = i]`` for an iid sequence with law ``pi`` (``n >= 3``).

    The ``n - 2`` free transitions contribute ``pi_i pi_j (1 - pi_j)`` each; the
    last one, into the conditioned ``X_n``, and its overlap with the previous
    step give the two correction terms.
    """
    pi = np.asarray(pi, dtype=float)
    d = (1.0 if i == j else 0.0) - pi[j]
    return (n - 2) * pi[i] * pi[j] * (1 - pi[j]) + pi[i] * d ** 2 + 2 * pi[i] ** 2 * d ** 2


# --- KL tail of add-one -----------------------------------------------------


@dataclass(frozen=True)
class TailReport:
    k: int
    m: int
    trials: int
    c0: float
    threshold: float
    mean: float
    quantiles: dict
    exceed_freq: float
    max_loss: float
    worst_case: float

    @property
    def passed(self) -> bool:
        return self.quantiles["0.999"] <= self.threshold

    def as_dict(self) -> dict:
        return asdict(self)


def kl_tail_threshold(k: int, m: int, c0: float = DEFAULT_SLACK, t: Optional[float] = None) -> float:
    """``2k/m + c0 (log t)^3 sqrt(k) / m`` with ``t = m`` by default."""
    t = m if t is None else t
    return 2 * k / m + c0 * math.log(t) ** 3 * math.sqrt(k) / m


def add_one_kl_losses(P, m: int, trials: int, seed: int = 0) -> np.ndarray:
    """``D(P || add-one estimate)`` from ``m`` iid draws, repeated ``trials`` times."""
    P = np.asarray(P, dtype=float)
    k = P.size
    counts = task_rng(seed, 0).multinomial(m, P, size=trials)
    Q = (counts + 1.0) / (m + k)
    return kl_rows(np.broadcast_to(P, Q.shape), Q)


def kl_tail_check(P, m: int, trials: int = 10_000, seed: int = 0, c0: float = DEFAULT_SLACK,
                  t: Optional[float] = None) -> TailReport:
    """Empirical tail of the add-one KL loss against ``2k/m + c0 (log t)^3 sqrt(k)/m``."""
    P = np.asarray(P, dtype=float)
    k = P.size
    if m < k:
        raise ParameterOutOfRange(f"need m >= k, got m={m}, k={k}")
    D = add_one_kl_losses(P, m, trials, seed)
    thr = kl_tail_threshold(k, m, c0, t)
    qs = {f"{q:g}": float(np.quantile(D, q)) for q in (0.5, 0.9, 0.99, 0.999)}
    return TailReport(
        k, m, trials, c0, thr, float(D.mean()), qs,
        float(np.mean(D >= thr)), float(D.max()), math.log(m + k),
    )


# --- Chebyshev sums -----------------------------------------------------------


def chebyshev_sums(x: float, y: float, n: int) -> tuple[float, float]:
    """``sum_l x(1-x)^{n-l-1} y(1-y)^{l-1}`` and the same weighted by ``max(1, log(l y))``."""
    ell = np.arange(1, n, dtype=float)
    base = x * (1 - x) ** (n - ell - 1) * y * (1 - y) ** (ell - 1)
    with np.errstate(divide="ignore"):
        logp = np.maximum(1.0, np.log(ell * y)) if y > 0 else np.ones_like(ell)
    return float(base.sum()), float((base * logp).sum())


def chebyshev_sum_check(x: float, y: float, n: int) -> tuple[bool, bool]:
    """Whether the plain sum is ``<= 1/(n-1)`` and the weighted one ``<= 2/(n-1)``."""
    if not (0.0 <= x <= 1.0 and 0.0 <= y <= 1.0):
        raise ParameterOutOfRange("x and y must lie in [0, 1]")
    if n < 2:
        raise ParameterOutOfRange("need n >= 2")
    s1, s2 = chebyshev_sums(x, y, n)
    tol = 1e-12
    return s1 <= 1.0 / (n - 1) + tol, s2 <= 2.0 / (n - 1) + tol


# --- Hoffman ----------------------------------------------------------------


def hoffman_margin(A) -> tuple[float, float]:
    """``(max |lambda| over non-Perron eigenvalues, 1 - d * min entry)``."""
    A = np.asarray(A, dtype=float)
    d = A.shape[0]
    eps = float(A.min())
    lam = np.linalg.eigvals(A)
    perron = int(np.argmin(np.abs(lam - 1.0)))
    rest = np.delete(lam, perron)
    return (float(np.abs(rest).max()) if rest.size else 0.0), 1.0 - d * eps


def hoffman_check(A) -> bool:
    """Every eigenvalue other than the Perron root has modulus at most ``1 - d * min(A)``."""
    top, bound = hoffman_margin(A)
    return top <= bound + 1e-9
