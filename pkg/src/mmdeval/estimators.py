"""MMD-family statistics: U/V estimators of squared MMD, block averaging and
KID, witness functions and their gradient penalty, energy distance, the
Cramér surrogate loss and energy-score based objectives.

Estimates are never clamped at zero.  An unbiased estimator of a
nonnegative quantity has to go negative sometimes.
"""

from dataclasses import asdict, dataclass

import numpy as np

from .errors import InputError, NonDifferentiableError
from .kernels import Distance, Poly, sq_distances
from .numeric import as_features, as_rng, map_ordered

__all__ = [
    "Estimate",
    "mmd2_unbiased",
    "mmd2_biased",
    "mmd2_block_average",
    "kid",
    "energy_distance",
    "cramer_surrogate",
    "witness_eval",
    "witness_grad",
    "witness_grad_penalty",
    "energy_score",
    "score_based_cramer_objective",
]


@dataclass(frozen=True)
class Estimate:
    value: float
    std_error: float = None
    block_size: int = None
    reps: int = None
    flags: tuple = ()

    def to_dict(self):
        out = asdict(self)
        out["flags"] = list(self.flags)
        return out


def _pair(X, Y, min_x=1, min_y=1):
    X = as_features(X, "X", min_x)
    Y = as_features(Y, "Y", min_y)
    if X.shape[1] != Y.shape[1]:
        raise InputError(f"X has {X.shape[1]} columns but Y has {Y.shape[1]}")
    return X, Y


def _offdiag_mean(K):
    m = K.shape[0]
    return (K.sum() - np.trace(K)) / (m * (m - 1))


def _canonical(X, Y):
    """Put the pair in a fixed order so that swapping arguments is bit-exact."""
    if (Y.shape, Y.tobytes()) < (X.shape, X.tobytes()):
        return Y, X
    return X, Y


def _mmd2_u(spec, X, Y):
    X, Y = _canonical(X, Y)
    Kxx = spec.matrix(X, X)
    Kyy = spec.matrix(Y, Y)
    Kxy = spec.matrix(X, Y)
    return _offdiag_mean(Kxx) + _offdiag_mean(Kyy) - 2.0 * Kxy.mean()


def mmd2_unbiased(spec, X, Y):
    """Unbiased U-statistic estimate of the squared MMD (may be negative)."""
    X, Y = _pair(X, Y, 2, 2)
    return Estimate(float(_mmd2_u(spec, X, Y)))


def mmd2_biased(spec, X, Y):
    """V-statistic estimate: all pairs including i == j, divisors m^2 and n^2."""
    X, Y = _canonical(*_pair(X, Y))
    value = spec.matrix(X, X).mean() + spec.matrix(Y, Y).mean() - 2.0 * spec.matrix(X, Y).mean()
    return Estimate(float(value))


def _block_values(spec, X, Y, block_size, reps, rng, threads):
    m, n = X.shape[0], Y.shape[0]

    def one(r):
        child = rng.derive(r)
        ix = np.arange(m) if block_size == m else np.sort(child.choice(m, block_size))
        iy = np.arange(n) if block_size == n else np.sort(child.choice(n, block_size))
        return _mmd2_u(spec, X[ix], Y[iy])

    return np.array(map_ordered(one, range(reps), threads))


def _summarise(values, block_size, flags=()):
    reps = len(values)
    se = float(values.std(ddof=1) / np.sqrt(reps)) if reps >= 2 else None
    return Estimate(float(values.mean()), se, int(block_size), reps, tuple(flags))


def mmd2_block_average(spec, X, Y, block_size, reps, rng, threads=1):
    """Mean of ``reps`` unbiased estimates on subsamples of ``block_size`` rows.

    Each repetition draws rows without replacement, independently from ``X``
    and ``Y``, using its own stream derived from ``rng``; the result does not
    depend on ``threads``.
    """
    X, Y = _pair(X, Y, 2, 2)
    if block_size < 2:
        raise InputError(f"block_size must be at least 2, got {block_size}")
    if block_size > min(X.shape[0], Y.shape[0]):
        raise InputError(f"block_size {block_size} exceeds sample sizes {X.shape[0]}, {Y.shape[0]}")
    if reps < 1:
        raise InputError("reps must be positive")
    values = _block_values(spec, X, Y, int(block_size), int(reps), as_rng(rng), threads)
    return _summarise(values, block_size)


def kid(X, Y, rng, block_size=1000, reps=100, threads=1):
    """Kernel Inception Distance between two feature sets.

    Block-averaged unbiased squared MMD under the cubic kernel
    ``(<x, y> / d + 1)^3``.  ``block_size`` larger than either sample (or
    ``None``/0) is reduced to the smaller sample size and the estimate
    carries the ``"block_clamped"`` flag.
    """
    X, Y = _pair(X, Y, 2, 2)
    limit = min(X.shape[0], Y.shape[0])
    flags = ()
    if not block_size or block_size > limit:
        block_size = limit
        flags = ("block_clamped",)
    if block_size < 2:
        raise InputError(f"block_size must be at least 2, got {block_size}")
    values = _block_values(Poly(3, None, 1.0), X, Y, int(block_size), int(reps), as_rng(rng), threads)
    return _summarise(values, block_size, flags)


def _rho(X, Y, beta):
    D2 = sq_distances(X, Y)
    if beta == 2:
        return D2
    if beta == 1:
        return np.sqrt(D2)
    return D2 ** (0.5 * beta)


def _check_beta(beta):
    if not 0 < beta <= 2:
        raise InputError(f"beta must lie in (0, 2], got {beta}")


def energy_distance(X, Y, beta=1.0):
    """Unbiased estimate of the energy distance with rho = ||x - y||^beta."""
    _check_beta(beta)
    X, Y = _canonical(*_pair(X, Y, 2, 2))
    value = (
        -0.5 * _offdiag_mean(_rho(X, X, beta))
        - 0.5 * _offdiag_mean(_rho(Y, Y, beta))
        + _rho(X, Y, beta).mean()
    )
    return Estimate(float(value))


def _norms(X):
    return np.sqrt(np.einsum("ij,ij->i", X, X))


def cramer_surrogate(X, Y):
    """Plug-in Cramér GAN critic loss.

    ``E rho(X, X') + E rho(Y, 0) - E rho(X, 0) - E rho(X', Y)`` with the
    within-X term averaged over distinct pairs.  This is not a divergence:
    it vanishes for some pairs of different distributions.
    """
    X, Y = _pair(X, Y, 2, 1)
    value = (
        _offdiag_mean(_rho(X, X, 1.0))
        + _norms(Y).mean()
        - _norms(X).mean()
        - _rho(X, Y, 1.0).mean()
    )
    return Estimate(float(value))


def witness_eval(spec, X, Y, T):
    """Empirical witness ``mean_i k(x_i, t) - mean_j k(y_j, t)`` at each row of ``T``."""
    X, Y = _pair(X, Y)
    T = as_features(T, "T")
    if T.shape[1] != X.shape[1]:
        raise InputError("query points have the wrong dimension")
    return spec.matrix(T, X).mean(axis=1) - spec.matrix(T, Y).mean(axis=1)


def witness_grad(spec, X, Y, T):
    """Gradient of :func:`witness_eval` with respect to each query point."""
    X, Y = _pair(X, Y)
    T = as_features(T, "T")
    m, n = X.shape[0], Y.shape[0]
    _, gx = spec.weighted_grads(X, T, np.full((m, T.shape[0]), 1.0 / m), anchor=False)
    _, gy = spec.weighted_grads(Y, T, np.full((n, T.shape[0]), 1.0 / n), anchor=False)
    return gx - gy


def witness_grad_penalty(spec, X, Y, rng, n_interp=64, max_retries=10):
    """Mean of ``(||grad f(t)|| - 1)^2`` over random interpolates ``t``.

    Each interpolate is ``a x_i + (1 - a) y_j`` with ``i``, ``j`` uniform and
    ``a ~ U(0, 1)``.  For the distance kernel, interpolates landing exactly
    on a sample point are redrawn.
    """
    X, Y = _pair(X, Y)
    rng = as_rng(rng)
    if n_interp < 1:
        raise InputError("n_interp must be positive")

    def draw(k):
        i = rng.integers(X.shape[0], k)
        j = rng.integers(Y.shape[0], k)
        a = rng.uniform(k)[:, None]
        return a * X[i] + (1.0 - a) * Y[j]

    T = draw(n_interp)
    if isinstance(spec, Distance):
        data = np.vstack([X, Y])
        for _ in range(max_retries):
            hit = np.array([np.any(np.all(data == t, axis=1)) for t in T])
            if not hit.any():
                break
            T[hit] = draw(int(hit.sum()))
        else:
            raise NonDifferentiableError("interpolates keep coinciding with sample points")
    G = witness_grad(spec, X, Y, T)
    pen = (np.sqrt(np.einsum("ij,ij->i", G, G)) - 1.0) ** 2
    se = float(pen.std(ddof=1) / np.sqrt(n_interp)) if n_interp >= 2 else None
    return Estimate(float(pen.mean()), se, None, int(n_interp))


def energy_score(X, y, beta=1.0):
    """Energy score of forecast sample ``X`` at outcome ``y``.

    ``0.5 E rho(X, X') - E rho(X, y)``, the first term over distinct pairs.
    """
    _check_beta(beta)
    X = as_features(X, "X", 2)
    y = np.asarray(y, dtype=np.float64).reshape(1, -1)
    if y.shape[1] != X.shape[1]:
        raise InputError("y has the wrong dimension")
    return float(0.5 * _offdiag_mean(_rho(X, X, beta)) - _rho(X, y, beta).mean())


def score_based_cramer_objective(X, Y):
    """``-0.5 E rho(X, X') + E rho(X, Y) - E rho(Y, 0)`` with Euclidean rho."""
    X, Y = _pair(X, Y, 2, 1)
    return float(
        -0.5 * _offdiag_mean(_rho(X, X, 1.0)) + _rho(X, Y, 1.0).mean() - _norms(Y).mean()
    )
