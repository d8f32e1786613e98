"""Numerical substrate: input validation, symmetric eigendecomposition,
PSD square roots, a couple of special functions and seeded random streams.
"""

import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy import special

from .errors import ConvergenceError, DomainError, InputError, NotPSDError

__all__ = [
    "as_features",
    "as_symmetric",
    "sym_eig",
    "psd_sqrt",
    "log_gamma",
    "std_normal_cdf",
    "RngState",
    "as_rng",
    "rng_gaussian",
    "map_ordered",
]

MAX_SWEEPS = 100
_EPS = np.finfo(np.float64).eps
_MASK64 = (1 << 64) - 1


def as_features(X, name="X", min_rows=1):
    """Validate and return a 2-D float64 feature matrix (one sample per row).

    1-D input is read as a column of scalar samples.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise InputError(f"{name} must be 2-D, got shape {X.shape}")
    if X.shape[1] < 1:
        raise InputError(f"{name} has no columns")
    if X.shape[0] < min_rows:
        raise InputError(f"{name} needs at least {min_rows} rows, got {X.shape[0]}")
    if not np.all(np.isfinite(X)):
        raise InputError(f"{name} contains NaN or Inf")
    return X


def as_symmetric(A, name="A"):
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
        raise InputError(f"{name} must be a non-empty square matrix, got {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InputError(f"{name} contains NaN or Inf")
    scale = np.abs(A).max()
    if np.abs(A - A.T).max() > 1e-12 * max(scale, 1e-300):
        raise InputError(f"{name} is not symmetric")
    # mirror the upper triangle so symmetry is exact from here on
    return np.triu(A) + np.triu(A, 1).T


def _round_robin(n):
    """Pairings for one cyclic sweep: n - 1 rounds of n/2 disjoint (p, q) pairs."""
    players = list(range(n))
    rounds = []
    for _ in range(n - 1):
        p = np.array(players[: n // 2])
        q = np.array(players[n // 2 :][::-1])
        lo, hi = np.minimum(p, q), np.maximum(p, q)
        rounds.append((lo, hi))
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def sym_eig(A):
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Rotations are applied in round-robin order so that each round acts on
    disjoint index pairs and can be vectorised.  A pair is rotated only when
    its off-diagonal entry is large relative to the geometric mean of the two
    diagonal entries; the iteration stops after a sweep with no rotations.

    Returns
    -------
    eigenvalues : ndarray, shape (d,)
        In descending order.
    eigenvectors : ndarray, shape (d, d)
        Orthonormal columns, ``A ~= V @ diag(eigenvalues) @ V.T``.

    Raises
    ------
    ConvergenceError
        If the rotations have not converged after ``MAX_SWEEPS`` sweeps.
    """
    A = as_symmetric(A).copy()
    d = A.shape[0]
    V = np.eye(d)
    if d == 1:
        return A[0].copy(), V

    n = d + (d % 2)
    rounds = _round_robin(n)
    if n != d:
        # drop pairs involving the padding index
        rounds = [(p[q < d], q[q < d]) for p, q in rounds]

    floor = _EPS * _EPS * max(np.linalg.norm(A), 1e-300)
    for _ in range(MAX_SWEEPS):
        rotated = False
        for p, q in rounds:
            apq = A[p, q]
            app = A[p, p]
            aqq = A[q, q]
            active = np.abs(apq) > np.maximum(_EPS * np.sqrt(np.abs(app * aqq)), floor)
            if not active.any():
                continue
            rotated = True
            p, q, apq, app, aqq = p[active], q[active], apq[active], app[active], aqq[active]
            theta = (aqq - app) / (2.0 * apq)
            big = np.abs(theta) > 1e150
            root = np.sqrt(np.where(big, 1.0, theta * theta + 1.0))
            t = np.where(
                big,
                0.5 / np.where(big, theta, 1.0),
                np.where(theta >= 0, 1.0, -1.0) / (np.abs(theta) + root),
            )
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c

            Ap, Aq = A[:, p], A[:, q]
            A[:, p] = c * Ap - s * Aq
            A[:, q] = s * Ap + c * Aq
            Ap, Aq = A[p, :], A[q, :]
            A[p, :] = c[:, None] * Ap - s[:, None] * Aq
            A[q, :] = s[:, None] * Ap + c[:, None] * Aq
            A[p, q] = 0.0
            A[q, p] = 0.0

            Vp, Vq = V[:, p], V[:, q]
            V[:, p] = c * Vp - s * Vq
            V[:, q] = s * Vp + c * Vq
        if not rotated:
            lam = np.diag(A).copy()
            order = np.argsort(-lam, kind="stable")
            return lam[order], V[:, order]
    raise ConvergenceError(f"Jacobi iteration did not converge in {MAX_SWEEPS} sweeps")


def psd_sqrt(A):
    """Symmetric PSD square root.

    Eigenvalues down to ``-1e-10 * ||A||_F`` are treated as round-off and
    clamped to zero; anything more negative raises :class:`NotPSDError`.
    """
    A = as_symmetric(A)
    lam, V = sym_eig(A)
    tol = 1e-10 * np.linalg.norm(A)
    if lam[-1] < -tol:
        raise NotPSDError(f"smallest eigenvalue {lam[-1]:.3e} below -{tol:.3e}")
    root = np.sqrt(np.clip(lam, 0.0, None))
    S = (V * root) @ V.T
    return 0.5 * (S + S.T)


def log_gamma(x):
    if not x > 0:
        raise DomainError(f"log_gamma needs x > 0, got {x}")
    return math.lgamma(x)


def std_normal_cdf(x):
    """Standard normal CDF, evaluated through erfc so both tails stay accurate."""
    out = 0.5 * special.erfc(-np.asarray(x, dtype=np.float64) / math.sqrt(2.0))
    return float(out) if np.ndim(out) == 0 else out


def _splitmix64(x):
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


class RngState:
    """A (seed, stream) pair driving a counter-based Philox generator.

    Identical pairs give identical draws on every platform.  ``derive(i)``
    returns an independent child stream, which is how repetitions get their
    own randomness regardless of how they are scheduled.
    """

    def __init__(self, seed, stream=0):
        seed, stream = int(seed), int(stream)
        if not (0 <= seed <= _MASK64 and 0 <= stream <= _MASK64):
            raise InputError("seed and stream must be unsigned 64-bit integers")
        self.seed = seed
        self.stream = stream
        self.generator = np.random.Generator(np.random.Philox(key=seed | (stream << 64)))

    def __repr__(self):
        return f"RngState(seed={self.seed}, stream={self.stream})"

    def derive(self, index):
        return RngState(self.seed, _splitmix64(self.stream ^ _splitmix64(int(index) + 1)))

    def normal(self, size=None):
        return self.generator.standard_normal(size)

    def uniform(self, size=None):
        return self.generator.random(size)

    def integers(self, high, size=None):
        return self.generator.integers(0, high, size=size)

    def choice(self, n, size):
        """``size`` distinct indices from ``range(n)``."""
        return self.generator.choice(n, size=size, replace=False)

    def permutation(self, n):
        return self.generator.permutation(n)


def as_rng(rng):
    """Accept an :class:`RngState` or an integer seed."""
    if isinstance(rng, RngState):
        return rng
    if isinstance(rng, (int, np.integer)):
        return RngState(int(rng))
    raise InputError(f"expected RngState or integer seed, got {type(rng).__name__}")


def rng_gaussian(state, n):
    """``n`` iid standard normal draws; advances ``state``."""
    return as_rng(state).normal(int(n))


def map_ordered(fn, items, threads=1):
    """``list(map(fn, items))`` on up to ``threads`` workers, results in input order."""
    items = list(items)
    if threads is None or threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
