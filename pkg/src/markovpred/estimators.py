"""Next-state prediction rules and the sequential add-one assignment.

Every predictor maps an observed trajectory ``x`` (0-based states) to a
probability vector over the next state. Predictors are small frozen
dataclasses exposing ``__call__(x, k)`` for one trajectory and
``batch(X, k)`` for a ``(B, n)`` array of equal-length trajectories.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy.special import gammaln

from .chains import (
    ChainLike,
    TransitionCounts,
    as_order_m,
    block_codes,
    transition_counts,
    tuple_index,
)
from .errors import ParameterOutOfRange, WrongAlphabet

# below this gap parameter log log(1/gamma0) > 0 and the step rule is usable
HYBRID_STEP_THRESHOLD = math.exp(-math.e)


def add_c_predict(counts: TransitionCounts, current_state, c: float = 1.0, k: Optional[int] = None) -> np.ndarray:
    """``(N_ij + c) / (N_i + c k)`` for the row of ``current_state``.

    ``current_state`` is a state, or a length-``m`` context tuple for order-``m``
    counts.
    """
    if c <= 0:
        raise ParameterOutOfRange(f"smoothing constant must be positive, got {c}")
    k = counts.k if k is None else k
    if np.ndim(current_state) == 0:
        row = int(current_state)
    else:
        row = tuple_index(current_state, k)
    n_ij = counts.n_ij[row].astype(float)
    return (n_ij + c) / (counts.n_i[row] + c * k)


def _final_context_counts(X: np.ndarray, k: int, m: int) -> np.ndarray:
    """Per-position indicator tensor ``hit[b, l, j]`` of transitions out of the final context.

    Transition ``l`` goes from window ``X[b, l:l+m]`` to ``X[b, l+m]``; it is a
    hit for symbol ``j`` when the window equals the last ``m`` symbols of the
    row and the successor is ``j``. Shape ``(B, n - m, k)``.
    """
    B, n = X.shape
    if n <= m:
        return np.zeros((B, 0, k), dtype=np.int64)
    codes = block_codes(X[:, :-1], k, m)
    final = block_codes(X[:, n - m :], k, m)[:, 0]
    match = codes == final[:, None]
    nxt = X[:, m:]
    return (match[:, :, None] & (nxt[:, :, None] == np.arange(k))).astype(np.int64)


def _add_c_batch(X: np.ndarray, k: int, c: float, m: int) -> np.ndarray:
    hit = _final_context_counts(X, k, m)
    n_cj = hit.sum(axis=1).astype(float)
    return (n_cj + c) / (n_cj.sum(axis=1, keepdims=True) + c * k)


# --- Cesaro-averaged add-one ---------------------------------------------


def _cesaro_range(n: int, m: int, variant: str) -> tuple[int, int]:
    if variant == "all":
        return 1, n
    if variant == "tail":
        return min(m, n), n
    raise ParameterOutOfRange(f"unknown Cesaro variant {variant!r}; use 'all' or 'tail'")


def cesaro_add_one_predict(x, k: int, variant: str = "tail", m: int = 1) -> np.ndarray:
    """Average of order-``m`` add-one predictions over suffixes of ``x``.

    The suffix of length ``s`` is ``x[n-s:]``; its add-one prediction uses the
    transitions inside that suffix only (uniform when it holds none).
    ``variant="all"`` averages ``s = 1..n``; ``variant="tail"`` averages
    ``s = m..n``, the form whose risk is controlled by the redundancy of the
    add-one assignment. Both coincide for ``m = 1``.

    Runs in ``O(n k)``: growing the suffix by one symbol on the left adds at
    most one transition, and only transitions out of the final context matter.
    """
    x = np.asarray(x, dtype=np.int64)
    n = x.size
    if n < 1:
        raise ValueError("need at least one observation")
    lo, hi = _cesaro_range(n, m, variant)
    final = x[n - m :] if n >= m else None
    n_cj = np.zeros(k)
    acc = np.zeros(k)
    for s in range(1, hi + 1):
        # suffix x[n-s:] gains the transition starting at position n-s
        start = n - s
        if final is not None and start + m < n and np.array_equal(x[start : start + m], final):
            n_cj[x[start + m]] += 1
        if s >= lo:
            acc += (n_cj + 1.0) / (n_cj.sum() + k)
    return acc / (hi - lo + 1)


def cesaro_naive(x, k: int, variant: str = "tail", m: int = 1) -> np.ndarray:
    """Direct recomputation of every suffix estimate, ``O(n^2 k)``."""
    x = np.asarray(x, dtype=np.int64)
    n = x.size
    lo, hi = _cesaro_range(n, m, variant)
    acc = np.zeros(k)
    for s in range(lo, hi + 1):
        suffix = x[n - s :]
        counts = transition_counts(suffix, k, m)
        ctx = tuple(x[n - m :]) if n >= m else (0,) * m
        acc += add_c_predict(counts, ctx if m > 1 else ctx[0], 1.0, k)
    return acc / (hi - lo + 1)


def _cesaro_batch(X: np.ndarray, k: int, variant: str, m: int) -> np.ndarray:
    B, n = X.shape
    lo, hi = _cesaro_range(n, m, variant)
    hit = _final_context_counts(X, k, m)
    # suffix of length s holds transitions starting at l >= n - s
    # reverse cumulative sum gives the counts for s = m+1 .. n
    rev = np.cumsum(hit[:, ::-1, :], axis=1)
    counts = np.zeros((B, n, k))
    if rev.shape[1]:
        counts[:, m:, :] = rev
    # counts[:, s-1, :] = counts in suffix of length s
    sel = counts[:, lo - 1 : hi, :]
    est = (sel + 1.0) / (sel.sum(axis=2, keepdims=True) + k)
    return est.mean(axis=1)


# --- binary hybrid --------------------------------------------------------


def step_length(x) -> int:
    """``l`` if ``x`` is ``a^{n-l} b^l`` with ``a != b`` and ``1 <= l < n``, else 0."""
    x = np.asarray(x)
    n = x.size
    if n < 2:
        return 0
    changes = np.flatnonzero(x[1:] != x[:-1])
    if changes.size != 1:
        return 0
    return int(n - 1 - changes[0])


def binary_hybrid_predict(x, gamma0: float, k: int = 2) -> np.ndarray:
    """Gap-aware predictor for two-state chains.

    On a step sequence ``a^{n-l} b^l`` the probability of leaving ``b`` is
    ``1 / (l log(1/gamma0))``; on every other sequence the add-1/2 rule is
    applied at the terminal state. Constant sequences count as non-step.
    For ``gamma0 >= e^{-e}`` the step rule is disabled and add-1/2 is used
    throughout.
    """
    if k != 2:
        raise WrongAlphabet(f"the hybrid predictor is binary, got k={k}")
    if not 0.0 < gamma0 < 1.0:
        raise ParameterOutOfRange(f"gamma0 must lie in (0, 1), got {gamma0}")
    x = np.asarray(x, dtype=np.int64)
    ell = step_length(x)
    if ell and gamma0 < HYBRID_STEP_THRESHOLD:
        q = min(1.0, 1.0 / (ell * math.log(1.0 / gamma0)))
        out = np.empty(2)
        b = x[-1]
        out[1 - b] = q
        out[b] = 1.0 - q
        return out
    return _add_c_batch(x[None, :], 2, 0.5, 1)[0]


def _hybrid_batch(X: np.ndarray, gamma0: float) -> np.ndarray:
    out = _add_c_batch(X, 2, 0.5, 1)
    if gamma0 >= HYBRID_STEP_THRESHOLD or X.shape[1] < 2:
        return out
    change = X[:, 1:] != X[:, :-1]
    step = change.sum(axis=1) == 1
    if np.any(step):
        n = X.shape[1]
        pos = np.argmax(change[step], axis=1)
        ell = n - 1 - pos
        q = np.minimum(1.0, 1.0 / (ell * math.log(1.0 / gamma0)))
        b = X[step, -1]
        rows = np.zeros((step.sum(), 2))
        rows[np.arange(b.size), 1 - b] = q
        rows[np.arange(b.size), b] = 1.0 - q
        out[step] = rows
    return out


# --- sequential assignment -----------------------------------------------


class AssignmentLogProb(NamedTuple):
    log_q: float
    steps: np.ndarray  # log Q(x_t | x^{t-1}), t = 1..n


def sequential_assignment_logprob(x, k: int, m: int = 1) -> AssignmentLogProb:
    """``log Q(x^n)`` for the add-one assignment, evaluated step by step.

    ``Q(x^m) = k^{-m}``, then each further symbol gets the order-``m`` add-one
    probability given everything seen so far.
    """
    x = np.asarray(x, dtype=np.int64)
    n = x.size
    if n < 1:
        raise ValueError("need at least one symbol")
    steps = np.empty(n)
    steps[: min(m, n)] = -math.log(k)
    n_ij = np.zeros((k ** m, k), dtype=np.int64)
    n_i = np.zeros(k ** m, dtype=np.int64)
    ctx = tuple_index(x[:m], k) if n >= m else 0
    size = k ** m
    for t in range(m, n):
        j = x[t]
        steps[t] = math.log((n_ij[ctx, j] + 1) / (n_i[ctx] + k))
        n_ij[ctx, j] += 1
        n_i[ctx] += 1
        ctx = (ctx * k + j) % size
    return AssignmentLogProb(float(steps.sum()), steps)


def assignment_logprob_closed_form(x, k: int, m: int = 1) -> float:
    """Count-product form ``k^{-m} prod_a [prod_j N_aj! / (k (k+1) ... (N_a + k - 1))]``."""
    x = np.asarray(x, dtype=np.int64)
    n = x.size
    if n <= m:
        return -n * math.log(k)
    counts = transition_counts(x, k, m)
    return float(-m * math.log(k) + _count_log_term(counts.n_ij, k))


def _count_log_term(n_ij: np.ndarray, k: int) -> np.ndarray:
    """Sum over contexts of ``log prod_j N_aj! - log[(N_a + k - 1)! / (k - 1)!]`` along the last two axes."""
    n_i = n_ij.sum(axis=-1)
    return gammaln(n_ij + 1.0).sum(axis=(-1, -2)) - (gammaln(n_i + k) - gammaln(k)).sum(axis=-1)


def assignment_logprob_batch(X: np.ndarray, k: int, m: int = 1) -> np.ndarray:
    """Closed-form ``log Q`` for every row of ``X``."""
    X = np.asarray(X, dtype=np.int64)
    B, n = X.shape
    if n <= m:
        return np.full(B, -n * math.log(k))
    size = k ** m
    ctx = block_codes(X[:, :-1], k, m)
    flat = (np.arange(B)[:, None] * size + ctx) * k + X[:, m:]
    n_ij = np.bincount(flat.ravel(), minlength=B * size * k).reshape(B, size, k)
    return -m * math.log(k) + _count_log_term(n_ij, k)


# --- predictor objects ----------------------------------------------------


@dataclass(frozen=True)
class AddC:
    """Add-``c`` smoothing at order ``m``; ``c = 1`` is Laplace's rule."""

    c: float = 1.0
    m: int = 1

    def __post_init__(self):
        if self.c <= 0:
            raise ParameterOutOfRange(f"smoothing constant must be positive, got {self.c}")
        if self.m < 1:
            raise ParameterOutOfRange("order must be >= 1")

    @property
    def name(self) -> str:
        if self.c == 1.0 and self.m != 1:
            return f"add_one:m={self.m}"
        return f"add_c:c={self.c:g}" + (f",m={self.m}" if self.m != 1 else "")

    def __call__(self, x, k: int) -> np.ndarray:
        return _add_c_batch(np.asarray(x, dtype=np.int64)[None, :], k, self.c, self.m)[0]

    def batch(self, X, k: int) -> np.ndarray:
        return _add_c_batch(np.asarray(X, dtype=np.int64), k, self.c, self.m)


@dataclass(frozen=True)
class Cesaro:
    """Cesaro-averaged add-one at order ``m``."""

    variant: str = "tail"
    m: int = 1

    def __post_init__(self):
        _cesaro_range(self.m + 1, self.m, self.variant)

    @property
    def name(self) -> str:
        return f"cesaro:variant={self.variant}" + (f",m={self.m}" if self.m != 1 else "")

    def __call__(self, x, k: int) -> np.ndarray:
        return cesaro_add_one_predict(x, k, self.variant, self.m)

    def batch(self, X, k: int) -> np.ndarray:
        return _cesaro_batch(np.asarray(X, dtype=np.int64), k, self.variant, self.m)


@dataclass(frozen=True)
class Hybrid:
    """Binary step/add-1/2 hybrid with gap parameter ``gamma0``."""

    gamma0: float

    m = 1

    def __post_init__(self):
        if not 0.0 < self.gamma0 < 1.0:
            raise ParameterOutOfRange(f"gamma0 must lie in (0, 1), got {self.gamma0}")

    @property
    def name(self) -> str:
        return f"hybrid:gamma0={self.gamma0:g}"

    def __call__(self, x, k: int = 2) -> np.ndarray:
        return binary_hybrid_predict(x, self.gamma0, k)

    def batch(self, X, k: int = 2) -> np.ndarray:
        if k != 2:
            raise WrongAlphabet(f"the hybrid predictor is binary, got k={k}")
        return _hybrid_batch(np.asarray(X, dtype=np.int64), self.gamma0)


@dataclass(frozen=True, eq=False)
class TrueRow:
    """Oracle that knows the chain and returns its true next-state row."""

    chain: ChainLike

    @property
    def m(self) -> int:
        return as_order_m(self.chain).m

    @property
    def name(self) -> str:
        return "truth"

    def __call__(self, x, k: int) -> np.ndarray:
        return self.batch(np.asarray(x)[None, :], k)[0]

    def batch(self, X, k: int) -> np.ndarray:
        T = as_order_m(self.chain)
        X = np.asarray(X, dtype=np.int64)
        ctx = block_codes(X[:, X.shape[1] - T.m :], k, T.m)[:, 0]
        return T.table[ctx]


PREDICTOR_KINDS = ("add_c", "add_one", "cesaro", "hybrid")


def _parse_params(body: str) -> dict:
    out = {}
    if not body:
        return out
    for part in body.split(","):
        key, sep, val = part.partition("=")
        if not sep:
            raise ValueError(f"malformed predictor parameter {part!r}; expected key=value")
        out[key.strip()] = val.strip()
    return out


def parse_predictor(spec: str):
    """Build a predictor from a string such as ``"add_c:c=1"`` or ``"cesaro:variant=tail"``.

    Recognised kinds: ``add_c`` (``c``, ``m``), ``add_one`` (``m``),
    ``cesaro`` (``variant``, ``m``) and ``hybrid`` (``gamma0``).
    """
    kind, _, body = spec.strip().partition(":")
    params = _parse_params(body)

    def take(name, conv, default):
        return conv(params.pop(name)) if name in params else default

    if kind == "add_c":
        pred = AddC(take("c", float, 1.0), take("m", int, 1))
    elif kind == "add_one":
        pred = AddC(1.0, take("m", int, 1))
    elif kind == "cesaro":
        pred = Cesaro(take("variant", str, "tail"), take("m", int, 1))
    elif kind == "hybrid":
        if "gamma0" not in params:
            raise ValueError("hybrid predictor needs gamma0")
        pred = Hybrid(take("gamma0", float, None))
    else:
        raise ValueError(f"unknown predictor kind {kind!r}; expected one of {PREDICTOR_KINDS}")
    if params:
        raise ValueError(f"unknown parameters for {kind}: {sorted(params)}")
    return pred


BATCH_CELLS = 1 << 22


def predict_all(pred, X: np.ndarray, k: int) -> np.ndarray:
    """``pred.batch`` when available, else a row-by-row loop.

    Long trajectories are fed to ``batch`` in row slices so the ``(rows, n, k)``
    intermediates stay bounded.
    """
    X = np.asarray(X, dtype=np.int64)
    if not hasattr(pred, "batch"):
        return np.stack([np.asarray(pred(row, k), dtype=float) for row in X])
    step = max(1, BATCH_CELLS // max(1, X.shape[1] * k))
    if X.shape[0] <= step:
        return pred.batch(X, k)
    return np.concatenate([pred.batch(X[lo : lo + step], k) for lo in range(0, X.shape[0], step)])


def order_of(pred, default: int = 1) -> int:
    return int(getattr(pred, "m", default))


def relabel(x: Sequence[int], perm: Sequence[int]) -> np.ndarray:
    """Apply a state permutation to a trajectory."""
    return np.asarray(perm)[np.asarray(x, dtype=np.int64)]
