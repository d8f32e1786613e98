"""Fréchet distance / FID, its exact expectation for 1-D normals, moments of
censored (ReLU'd) normals, and the Inception score."""

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DomainError, InputError, NotPSDError
from .numeric import as_features, as_rng, as_symmetric, log_gamma, psd_sqrt, std_normal_cdf, sym_eig

__all__ = [
    "GaussianMoments",
    "fit_moments",
    "frechet_distance",
    "fid_estimate",
    "d_m_coefficient",
    "expected_fid_1d_normal",
    "censored_normal_moments_1d",
    "censored_normal_moments",
    "inception_score",
]

FID_CLAMP_TOL = 1e-8


@dataclass(frozen=True)
class GaussianMoments:
    """Mean vector and covariance matrix.

    ``cov_stderr`` is set when the covariance was estimated by Monte Carlo.
    """

    mean: np.ndarray
    cov: np.ndarray
    cov_stderr: np.ndarray = None

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=np.float64))
        cov = as_symmetric(np.atleast_2d(self.cov), "cov")
        if mean.ndim != 1 or cov.shape != (mean.size, mean.size):
            raise InputError(f"mean {mean.shape} and cov {cov.shape} disagree")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self):
        return self.mean.size


def fit_moments(X):
    """Sample mean and unbiased (n - 1) sample covariance."""
    X = as_features(X, "X", 2)
    mu = X.mean(axis=0)
    Xc = X - mu
    cov = Xc.T @ Xc / (X.shape[0] - 1)
    return GaussianMoments(mu, 0.5 * (cov + cov.T))


def _frechet(a, b):
    if a.dim != b.dim:
        raise InputError(f"dimension mismatch: {a.dim} vs {b.dim}")
    # tr((Sa Sb)^1/2) = tr((Sa^1/2 Sb Sa^1/2)^1/2); the right side stays symmetric
    root_a = psd_sqrt(a.cov)
    M = root_a @ b.cov @ root_a
    lam, _ = sym_eig(0.5 * (M + M.T))
    tol = 1e-10 * max(np.linalg.norm(M), 1e-300)
    if lam[-1] < -tol:
        raise NotPSDError(f"covariance product has eigenvalue {lam[-1]:.3e}")
    tr_sqrt = np.sqrt(np.clip(lam, 0.0, None)).sum()
    diff = a.mean - b.mean
    value = float(diff @ diff + np.trace(a.cov) + np.trace(b.cov) - 2.0 * tr_sqrt)
    if -FID_CLAMP_TOL < value < 0.0:
        return 0.0, True
    if value < 0.0:
        raise NotPSDError(f"Fréchet distance came out negative ({value:.3e})")
    return value, False


def frechet_distance(a, b):
    """Fréchet (Wasserstein-2) distance between Gaussians with moments ``a`` and ``b``.

    Round-off negatives down to ``-1e-8`` are reported as 0.
    """
    return _frechet(a, b)[0]


def fid_estimate(X, Y):
    """Plug-in FID between two feature samples."""
    X = as_features(X, "X", 2)
    Y = as_features(Y, "Y", 2)
    return frechet_distance(fit_moments(X), fit_moments(Y))


def d_m_coefficient(m):
    """E[sample std] / sigma for m normal draws: sqrt(2) G(m/2) / (sqrt(m-1) G((m-1)/2)).

    ``m=None`` stands for an infinite sample and gives 1.
    """
    if m is None:
        return 1.0
    if m < 2 or int(m) != m:
        raise DomainError(f"d_m needs an integer m >= 2, got {m}")
    log_d = 0.5 * math.log(2.0) + log_gamma(m / 2.0) - 0.5 * math.log(m - 1) - log_gamma((m - 1) / 2.0)
    return math.exp(log_d)


def _inflation(n):
    return 1.0 if n is None else (n + 1.0) / n


def expected_fid_1d_normal(mu_p, sigma_p, mu_q, sigma_q, m, n=None):
    """Exact expectation of the plug-in FID between samples of two 1-D normals.

    ``m`` and ``n`` are the sample sizes from P and Q; ``None`` means that
    side uses its true moments (infinitely many samples).
    """
    if not (sigma_p > 0 and sigma_q > 0):
        raise DomainError("standard deviations must be positive")
    for size in (m, n):
        if size is not None and (size < 2 or int(size) != size):
            raise DomainError(f"sample sizes must be integers >= 2, got {size}")
    return (
        (mu_p - mu_q) ** 2
        + _inflation(m) * sigma_p**2
        + _inflation(n) * sigma_q**2
        - 2.0 * d_m_coefficient(m) * d_m_coefficient(n) * sigma_p * sigma_q
    )


def censored_normal_moments_1d(mu, sigma):
    """Mean and variance of max(0, N(mu, sigma^2)); broadcasts over arrays."""
    mu = np.asarray(mu, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    if np.any(~(sigma > 0)):
        raise DomainError("sigma must be positive")
    z = mu / sigma
    cdf = std_normal_cdf(z)
    pdf = np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
    mean = mu * cdf + sigma * pdf
    second = (mu * mu + sigma * sigma) * cdf + mu * sigma * pdf
    var = np.maximum(second - mean * mean, 0.0)
    if mean.ndim == 0:
        return float(mean), float(var)
    return mean, var


def censored_normal_moments(mu, cov, rng, mc_samples=10**6, batches=10, chunk=50_000):
    """Moments of relu(N(mu, cov)).

    Means and variances use the exact 1-D formulas.  Off-diagonal
    covariances are within-batch sample covariances averaged over
    ``batches`` equal batches of ``mc_samples`` draws in total;
    ``cov_stderr`` is the spread of the batch estimates over sqrt(batches).
    """
    cov = as_symmetric(cov, "cov")
    mu = np.broadcast_to(np.asarray(mu, dtype=np.float64), (cov.shape[0],)).copy()
    if batches < 2 or mc_samples < batches:
        raise InputError("need at least two Monte Carlo batches")
    rng = as_rng(rng)
    d = mu.size
    sd = np.sqrt(np.diag(cov))
    if np.any(sd <= 0):
        raise DomainError("covariance must have a positive diagonal")
    mean, var = censored_normal_moments_1d(mu, sd)
    root = psd_sqrt(cov)

    per_batch = mc_samples // batches
    estimates = np.empty((batches, d, d))
    for b in range(batches):
        stream = rng.derive(b)
        acc = np.zeros((d, d))
        total = np.zeros(d)
        left = per_batch
        while left:
            k = min(chunk, left)
            # centring on the exact means keeps the accumulated products small
            R = np.maximum(stream.normal((k, d)) @ root + mu, 0.0) - mean
            acc += R.T @ R
            total += R.sum(axis=0)
            left -= k
        shift = total / per_batch
        estimates[b] = (acc - per_batch * np.outer(shift, shift)) / (per_batch - 1)
    C = estimates.mean(axis=0)
    se = estimates.std(axis=0, ddof=1) / math.sqrt(batches)
    idx = np.diag_indices(d)
    C[idx] = var
    se[idx] = 0.0
    return GaussianMoments(mean, 0.5 * (C + C.T), 0.5 * (se + se.T))


def inception_score(probs):
    """exp of the mean KL divergence from each row to the mean row."""
    P = as_features(probs, "probs")
    if np.any(P < 0) or np.any(np.abs(P.sum(axis=1) - 1.0) > 1e-8):
        raise InputError("each row must be a probability distribution")
    marginal = P.mean(axis=0)
    kl = special.xlogy(P, P).sum(axis=1) - special.xlogy(P, marginal).sum(axis=1)
    return float(np.exp(kl.mean()))
