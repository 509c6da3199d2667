"""Stochastic-matrix and higher-order chain primitives.

States are 0-based throughout: a chain on ``k`` states lives on ``{0, ..., k-1}``.
An order-``m`` transition table has ``k**m`` rows indexed row-major by the
context tuple, i.e. ``index(x_1, ..., x_m) = sum_t x_t * k**(m - t)`` with the
oldest symbol most significant.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence, Union

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import (
    DegenerateStationary,
    NotReversible,
    NotStochastic,
    ReducibleChain,
)
from .seeding import as_generator

ROW_SUM_TOL = 1e-12
PROB_ATOL = 1e-10
ZERO_CUTOFF = 1e-15
DENSE_SOLVE_LIMIT = 2048


def _validate_rows(P: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(P)):
        raise NotStochastic(f"{what} has non-finite entries")
    if np.any(P < 0):
        raise NotStochastic(f"{what} has negative entries")
    bad = np.abs(P.sum(axis=1) - 1.0) > ROW_SUM_TOL
    if np.any(bad):
        row = int(np.flatnonzero(bad)[0])
        raise NotStochastic(f"{what}: row {row} sums to {P[row].sum()!r}")


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TransitionMatrix:
    """First-order row-stochastic ``k x k`` matrix; ``P[i, j] = M(j | i)``."""

    P: np.ndarray

    def __post_init__(self):
        P = np.asarray(self.P, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1] or P.shape[0] < 2:
            raise NotStochastic(f"expected a square matrix with k >= 2, got shape {P.shape}")
        _validate_rows(P, "transition matrix")
        object.__setattr__(self, "P", _frozen(P))

    @property
    def k(self) -> int:
        return self.P.shape[0]

    @property
    def m(self) -> int:
        return 1

    @property
    def table(self) -> np.ndarray:
        return self.P

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.P, dtype=dtype)


@dataclass(frozen=True, eq=False)
class OrderMTransition:
    """Order-``m`` table: ``table[index(x^m), j] = M(j | x^m)``."""

    table: np.ndarray
    k: int
    m: int

    def __post_init__(self):
        T = np.asarray(self.table, dtype=float)
        if self.m < 1 or self.k < 2:
            raise NotStochastic(f"need k >= 2 and m >= 1, got k={self.k}, m={self.m}")
        if T.shape != (self.k ** self.m, self.k):
            raise NotStochastic(
                f"order-{self.m} table over {self.k} symbols must have shape "
                f"({self.k ** self.m}, {self.k}), got {T.shape}"
            )
        _validate_rows(T, f"order-{self.m} table")
        object.__setattr__(self, "table", _frozen(T))

    def row(self, context: Sequence[int]) -> np.ndarray:
        return self.table[tuple_index(context, self.k)]

    @classmethod
    def from_first_order(cls, M: "TransitionMatrix | np.ndarray") -> "OrderMTransition":
        P = as_array(M)
        return cls(P, P.shape[0], 1)


ChainLike = Union[TransitionMatrix, OrderMTransition, np.ndarray]


def as_array(M: ChainLike) -> np.ndarray:
    if isinstance(M, TransitionMatrix):
        return M.P
    if isinstance(M, OrderMTransition):
        return M.table
    return np.asarray(M, dtype=float)


def as_order_m(M: ChainLike) -> OrderMTransition:
    if isinstance(M, OrderMTransition):
        return M
    if isinstance(M, TransitionMatrix):
        return OrderMTransition(M.P, M.k, 1)
    P = np.asarray(M, dtype=float)
    return OrderMTransition(P, P.shape[1], 1)


# --- tuple indexing -------------------------------------------------------


def tuple_index(x: Sequence[int], k: int) -> int:
    idx = 0
    for s in x:
        idx = idx * k + int(s)
    return idx


def index_tuple(idx: int, k: int, m: int) -> tuple[int, ...]:
    out = []
    for _ in range(m):
        idx, r = divmod(int(idx), k)
        out.append(r)
    return tuple(reversed(out))


def all_tuples(k: int, m: int) -> np.ndarray:
    """All of ``[k]^m`` as a ``(k**m, m)`` array, in row-major index order."""
    if m == 0:
        return np.zeros((1, 0), dtype=np.int64)
    grids = np.indices((k,) * m).reshape(m, -1).T
    return grids.astype(np.int64)


def block_codes(x: np.ndarray, k: int, m: int) -> np.ndarray:
    """Row-major codes of the length-``m`` windows of ``x`` (last axis).

    Works on a single trajectory or a ``(B, n)`` batch; returns shape
    ``(..., n - m + 1)``.
    """
    x = np.asarray(x, dtype=np.int64)
    n = x.shape[-1]
    if n < m:
        return np.zeros(x.shape[:-1] + (0,), dtype=np.int64)
    codes = np.zeros(x.shape[:-1] + (n - m + 1,), dtype=np.int64)
    for t in range(m):
        codes = codes * k + x[..., t : n - m + 1 + t]
    return codes


# --- first-order structure ------------------------------------------------


def check_irreducible(M: ChainLike) -> bool:
    """Strong connectivity of the support graph ``{(i, j): M(j|i) > 0}``."""
    P = as_array(M)
    support = csr_matrix(P > ZERO_CUTOFF)
    ncomp, _ = connected_components(support, directed=True, connection="strong")
    return ncomp == 1


def _solve_stationary(P) -> np.ndarray:
    """Unique left null vector of ``P - I`` normalised to sum 1."""
    size = P.shape[0]
    if size <= DENSE_SOLVE_LIMIT:
        P = P.toarray() if hasattr(P, "toarray") else np.asarray(P)
        A = np.vstack([P.T - np.eye(size), np.ones((1, size))])
        b = np.zeros(size + 1)
        b[-1] = 1.0
        pi, *_ = np.linalg.lstsq(A, b, rcond=None)
    else:
        from scipy.sparse import eye, lil_matrix
        from scipy.sparse.linalg import spsolve

        A = lil_matrix((P.T - eye(size)).tocsr())
        A[size - 1, :] = np.ones(size)
        b = np.zeros(size)
        b[-1] = 1.0
        pi = spsolve(A.tocsc(), b)
    pi = np.where(np.abs(pi) < ZERO_CUTOFF, 0.0, pi)
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def stationary_distribution(M: ChainLike) -> np.ndarray:
    """Stationary law ``pi`` with ``pi M = pi``.

    Raises:
        ReducibleChain: the support graph is not strongly connected, so the
            stationary law is not unique.
    """
    P = as_array(M)
    if not check_irreducible(P):
        raise ReducibleChain("transition graph is not strongly connected")
    return _solve_stationary(P)


def stationary_power(M: ChainLike, tol: float = 1e-14, max_iter: int = 1_000_000) -> np.ndarray:
    """Power-iteration cross-check for ``stationary_distribution``.

    Iterates the lazy chain ``(I + M) / 2`` so periodic chains still converge.
    """
    P = as_array(M)
    lazy = 0.5 * (np.eye(P.shape[0]) + P)
    pi = np.full(P.shape[0], 1.0 / P.shape[0])
    for _ in range(max_iter):
        nxt = pi @ lazy
        if np.abs(nxt - pi).sum() < tol:
            return nxt / nxt.sum()
        pi = nxt
    return pi / pi.sum()


def check_reversible(M: ChainLike, pi: np.ndarray, atol: float = PROB_ATOL) -> bool:
    """Detailed balance ``pi_i M(j|i) == pi_j M(i|j)`` for all pairs."""
    P = as_array(M)
    flow = np.asarray(pi, dtype=float)[:, None] * P
    return bool(np.allclose(flow, flow.T, rtol=0.0, atol=atol))


class SpectralReport(NamedTuple):
    eigenvalues: np.ndarray
    gamma: float
    gamma_star: float


def _symmetrized_eigenvalues(A: np.ndarray, pi: np.ndarray) -> np.ndarray:
    s = np.sqrt(pi)
    S = s[:, None] * A / s[None, :]
    S = 0.5 * (S + S.T)
    return np.sort(np.linalg.eigvalsh(S))[::-1]


def spectral_report(M: ChainLike) -> SpectralReport:
    """Eigenvalues, spectral gap and absolute spectral gap of a reversible chain.

    The spectrum is computed from the symmetric matrix ``D^{1/2} M D^{-1/2}``
    with ``D = diag(pi)``; non-reversible chains are rejected instead of
    extending the definition to complex spectra.
    """
    P = as_array(M)
    pi = stationary_distribution(P)
    if not check_reversible(P, pi):
        raise NotReversible("spectral gap is only defined here for reversible chains")
    lam = _symmetrized_eigenvalues(P, pi)
    gamma = 1.0 - lam[1]
    gamma_star = 1.0 - np.max(np.abs(lam[1:]))
    return SpectralReport(lam, float(gamma), float(gamma_star))


def absolute_spectral_gap(M: ChainLike) -> float:
    return spectral_report(M).gamma_star


# --- simulation -----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Trajectory:
    states: np.ndarray
    k: int
    seed: Optional[int] = None
    chain: Optional[ChainLike] = field(default=None, repr=False)

    def __post_init__(self):
        s = np.asarray(self.states, dtype=np.int64)
        if s.ndim != 1:
            raise ValueError("a trajectory is one-dimensional")
        if s.size and (s.min() < 0 or s.max() >= self.k):
            raise ValueError(f"states must lie in 0..{self.k - 1}")
        s = s.copy()
        s.setflags(write=False)
        object.__setattr__(self, "states", s)

    def __len__(self) -> int:
        return self.states.size

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.states, dtype=dtype)


def _cdf(rows: np.ndarray) -> np.ndarray:
    c = np.cumsum(rows, axis=-1)
    return c / c[..., -1:]


def _draw(cdf_rows: np.ndarray, u: np.ndarray) -> np.ndarray:
    # first j with cdf[j] > u
    return np.minimum((cdf_rows <= u[..., None]).sum(axis=-1), cdf_rows.shape[-1] - 1)


def simulate_batch(
    M: ChainLike,
    n: int,
    trials: int,
    seed=None,
    init: Optional[np.ndarray] = None,
    mode: str = "direct",
) -> np.ndarray:
    """Simulate ``trials`` independent trajectories of length ``n``.

    ``init`` is a law on the first block (``[k]^m`` flattened row-major); when
    omitted the stationary law is used. ``mode="rows"`` uses the row-array
    coupling: every context row gets its own iid stream of next-symbol draws
    and the chain consumes the first unused draw of its current row. Both
    modes sample the same law.

    Returns an int array of shape ``(trials, n)``.
    """
    T = as_order_m(M)
    k, m = T.k, T.m
    rng = as_generator(seed)
    if n < 1:
        raise ValueError("n must be >= 1")
    if init is None:
        init = order_m_stationary(T) if m > 1 else stationary_distribution(T.table)
    init = np.asarray(init, dtype=float)
    if init.shape != (k ** m,):
        raise ValueError(f"initial law must have {k ** m} entries")

    first = _draw(_cdf(init)[None, :], rng.random(trials))
    if n < m:
        # only a prefix of the first block is observed
        return all_tuples(k, m)[first][:, :n]
    X = np.empty((trials, n), dtype=np.int64)
    X[:, :m] = all_tuples(k, m)[first]
    if n == m:
        return X

    cdf = _cdf(T.table)
    ctx = first.copy()
    size = k ** m
    if mode == "direct":
        for t in range(m, n):
            s = _draw(cdf[ctx], rng.random(trials))
            X[:, t] = s
            ctx = (ctx * k + s) % size
    elif mode == "rows":
        steps = n - m
        W = _draw(cdf[None, :, None, :], rng.random((trials, size, steps)))
        ptr = np.zeros((trials, size), dtype=np.int64)
        rows = np.arange(trials)
        for t in range(m, n):
            s = W[rows, ctx, ptr[rows, ctx]]
            ptr[rows, ctx] += 1
            X[:, t] = s
            ctx = (ctx * k + s) % size
    else:
        raise ValueError(f"unknown simulation mode {mode!r}")
    return X


def simulate(
    M: ChainLike,
    n: int,
    seed=None,
    init: Optional[np.ndarray] = None,
    mode: str = "direct",
) -> Trajectory:
    """One trajectory of length ``n``; deterministic given an integer ``seed``."""
    X = simulate_batch(M, n, 1, seed=seed, init=init, mode=mode)
    k = as_order_m(M).k
    return Trajectory(X[0], k, seed=seed if isinstance(seed, (int, np.integer)) else None, chain=M)


# --- counts ---------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TransitionCounts:
    """``n_i[a]`` visits to context ``a`` that have a successor, ``n_ij[a, j]`` transitions."""

    n_i: np.ndarray
    n_ij: np.ndarray
    k: int
    m: int = 1


def transition_counts(x, k: int, m: int = 1) -> TransitionCounts:
    """Transition counts of ``x`` at order ``m``.

    ``n_i`` counts the windows ``x[l : l+m]`` for ``l < len(x) - m``, so
    ``n_i.sum() == max(len(x) - m, 0)`` and ``n_i == n_ij.sum(axis=1)``.
    """
    x = np.asarray(x, dtype=np.int64)
    n_ij = np.zeros((k ** m, k), dtype=np.int64)
    if x.size > m:
        ctx = block_codes(x[:-1], k, m)
        np.add.at(n_ij, (ctx, x[m:]), 1)
    n_ij.setflags(write=False)
    n_i = n_ij.sum(axis=1)
    n_i.setflags(write=False)
    return TransitionCounts(n_i, n_ij, k, m)


# --- higher order ---------------------------------------------------------


def block_chain(T: ChainLike):
    """First-order chain on ``[k]^m`` induced by an order-``m`` table (sparse)."""
    T = as_order_m(T)
    k, m = T.k, T.m
    size = k ** m
    src = np.repeat(np.arange(size), k)
    sym = np.tile(np.arange(k), size)
    dst = (src * k + sym) % size
    return csr_matrix((T.table.ravel(), (src, dst)), shape=(size, size))


def order_m_stationary(T: ChainLike) -> np.ndarray:
    """Stationary law on ``[k]^m`` (flattened row-major) of an order-``m`` chain.

    Raises:
        ReducibleChain: the induced block chain is not irreducible.
    """
    T = as_order_m(T)
    if T.m == 1:
        return stationary_distribution(T.table)
    B = block_chain(T)
    ncomp, _ = connected_components(B > ZERO_CUTOFF, directed=True, connection="strong")
    if ncomp != 1:
        raise ReducibleChain("induced block chain is not strongly connected")
    return _solve_stationary(B)


def reverse_index_map(k: int, m: int) -> np.ndarray:
    """``rev[index(x)] == index(reversed(x))`` over ``[k]^m``."""
    tuples = all_tuples(k, m)
    return block_codes(tuples[:, ::-1], k, m)[:, 0] if m else np.zeros(1, dtype=np.int64)


def check_order_m_reversible(T: ChainLike, pi: np.ndarray, atol: float = PROB_ATOL) -> bool:
    """Reversibility of a stationary order-``m`` chain.

    Checks ``pi(x^m) == pi(reverse x^m)`` and, for every ``x^{m+1}``,
    ``pi(x^m) M(x_{m+1}|x^m) == pi(rev x_2^{m+1}) M(x_1 | rev x_2^{m+1})``.
    """
    T = as_order_m(T)
    k, m = T.k, T.m
    pi = np.asarray(pi, dtype=float)
    rev = reverse_index_map(k, m)
    if not np.allclose(pi, pi[rev], rtol=0.0, atol=atol):
        return False
    xs = all_tuples(k, m + 1)
    head = block_codes(xs[:, :m], k, m)[:, 0]
    tail_rev = block_codes(xs[:, :0:-1], k, m)[:, 0]
    lhs = pi[head] * T.table[head, xs[:, m]]
    rhs = pi[tail_rev] * T.table[tail_rev, xs[:, 0]]
    return bool(np.allclose(lhs, rhs, rtol=0.0, atol=atol))


def lift_block_chain(T: ChainLike) -> TransitionMatrix:
    """First-order chain of overlapping ``(m+1)``-blocks of an order-``m`` chain.

    Block ``(a_1, ..., a_{m+1})`` moves to ``(a_2, ..., a_{m+1}, c)`` with
    probability ``T(c | a_2, ..., a_{m+1})``.
    """
    T = as_order_m(T)
    k, m = T.k, T.m
    size = k ** (m + 1)
    L = np.zeros((size, size))
    src = np.arange(size)
    suffix = src % (k ** m)
    for c in range(k):
        L[src, (src * k + c) % size] = T.table[suffix, c]
    return TransitionMatrix(L)


def lifted_stationary(T: ChainLike, pi: Optional[np.ndarray] = None) -> np.ndarray:
    """``pi(a^m) T(a_{m+1} | a^m)`` over ``[k]^{m+1}``."""
    T = as_order_m(T)
    if pi is None:
        pi = order_m_stationary(T)
    return (np.asarray(pi)[:, None] * T.table).ravel()


def adjoint(P: ChainLike, pi: np.ndarray) -> np.ndarray:
    """Time reversal ``P*(j|i) = pi_j P(i|j) / pi_i``."""
    P = as_array(P)
    pi = np.asarray(pi, dtype=float)
    return P.T * pi[None, :] / pi[:, None]


class PseudoSpectralGap(NamedTuple):
    value: float
    r: int
    terms: np.ndarray


def pseudo_spectral_gap(
    P: ChainLike,
    pi: Optional[np.ndarray] = None,
    r_max: Optional[int] = None,
    m: int = 1,
) -> PseudoSpectralGap:
    """``max_{1 <= r <= r_max} gamma((P*)^r P^r) / r``.

    ``(P*)^r P^r`` is self-adjoint in ``L^2(pi)``, so its gap is read off the
    symmetrized matrix. ``r_max`` defaults to ``2 (m + 1)``; pass the order of
    the chain a lifted matrix came from.

    Raises:
        DegenerateStationary: some ``pi`` entry is zero (the adjoint is undefined).
    """
    A = as_array(P)
    if pi is None:
        pi = stationary_distribution(A)
    pi = np.asarray(pi, dtype=float)
    if np.any(pi <= 0):
        raise DegenerateStationary("pseudo spectral gap needs a strictly positive stationary law")
    if r_max is None:
        r_max = 2 * (m + 1)
    if r_max < 1:
        raise ValueError("r_max must be >= 1")
    Ps = adjoint(A, pi)
    Pr = np.eye(A.shape[0])
    Psr = np.eye(A.shape[0])
    terms = np.empty(r_max)
    for r in range(1, r_max + 1):
        Pr = Pr @ A
        Psr = Psr @ Ps
        lam = _symmetrized_eigenvalues(Psr @ Pr, pi)
        terms[r - 1] = (1.0 - lam[1]) / r
    best = int(np.argmax(terms))
    return PseudoSpectralGap(float(terms[best]), best + 1, terms)


# --- matrix files ---------------------------------------------------------


def format_matrix(M: ChainLike) -> str:
    """Text form: ``"k"`` or ``"k m"`` header, then ``k**m`` rows of ``k`` numbers."""
    T = as_order_m(M)
    head = f"{T.k}" if T.m == 1 else f"{T.k} {T.m}"
    lines = [head] + [" ".join("%.17g" % v for v in row) for row in T.table]
    return "\n".join(lines) + "\n"


def parse_matrix(text: str) -> Union[TransitionMatrix, OrderMTransition]:
    rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not rows:
        raise NotStochastic("empty matrix file")
    head = [int(v) for v in rows[0]]
    if len(head) not in (1, 2):
        raise NotStochastic("header must be 'k' or 'k m'")
    k = head[0]
    m = head[1] if len(head) == 2 else 1
    table = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float)
    if table.shape != (k ** m, k):
        raise NotStochastic(f"expected {k ** m} rows of {k} entries, got shape {table.shape}")
    return TransitionMatrix(table) if m == 1 else OrderMTransition(table, k, m)


def write_matrix_file(path, M: ChainLike) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(format_matrix(M))


def read_matrix_file(path) -> Union[TransitionMatrix, OrderMTransition]:
    with open(path) as fh:
        return parse_matrix(fh.read())


def random_chain(k: int, m: int = 1, seed=None, concentration: float = 1.0) -> OrderMTransition:
    """Order-``m`` table with iid Dirichlet rows (strictly positive almost surely)."""
    rng = as_generator(seed)
    return OrderMTransition(rng.dirichlet(np.full(k, concentration), size=k ** m), k, m)


def random_reversible(k: int, seed=None) -> TransitionMatrix:
    """Random reversible chain: random walk on a complete graph with random symmetric weights."""
    rng = as_generator(seed)
    W = rng.random((k, k))
    W = W + W.T
    return TransitionMatrix(W / W.sum(axis=1, keepdims=True))
