"""Relative similarity test between two candidate samples and a reference,
and the learning-rate controller driven by its p-values."""

import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .errors import InputError, InsufficientSamplesError
from .numeric import as_features, as_rng, std_normal_cdf

__all__ = [
    "TestResult",
    "relative_similarity_test",
    "ControllerConfig",
    "AdaptationState",
    "lr_controller_step",
]

MIN_SAMPLES = 10


@dataclass(frozen=True)
class TestResult:
    """``statistic`` is MMD_u^2(candidate, ref) - MMD_u^2(baseline, ref).

    ``p_value = Phi(statistic / sqrt(variance))``; small values favour the
    candidate being closer to the reference.
    """

    statistic: float
    variance: float
    p_value: float
    n_used: int
    mmd2_candidate: float
    mmd2_baseline: float

    def to_dict(self):
        return asdict(self)


def _offdiag_mean(K):
    n = K.shape[0]
    return (K.sum() - np.trace(K)) / (n * (n - 1))


def _variance_unbiased(D):
    """Unbiased variance of the order-2 U-statistic with symmetric core ``D``.

    ``D`` has a zero diagonal.  Uses unbiased estimates of E[D_ij D_il],
    E[D_ij^2] and (E D)^2 from distinct index tuples.
    """
    n = D.shape[0]
    r = D.sum(axis=1)
    s2 = np.sum(D * D)
    r2 = r @ r
    total = r.sum()
    shared = (r2 - s2) / (n * (n - 1) * (n - 2))
    square = s2 / (n * (n - 1))
    disjoint = (total * total - 4.0 * r2 + 2.0 * s2) / (n * (n - 1) * (n - 2) * (n - 3))
    zeta1 = shared - disjoint
    zeta2 = square - disjoint
    return (4.0 * (n - 2) * zeta1 + 2.0 * zeta2) / (n * (n - 1))


def _variance_first_order(D):
    n = D.shape[0]
    proj = D.sum(axis=1) / (n - 1)
    return 4.0 / n * proj.var(ddof=1)


def relative_similarity_test(spec, candidate, baseline, reference, rng, variance="unbiased"):
    """Test whether ``candidate`` is closer than ``baseline`` to ``reference`` in MMD.

    All three sets are shuffled (candidate and baseline with the same
    seeded permutation when their sizes match) and truncated to the smallest
    size ``n``, then rows are paired by index.  With the paired cores
    ``h_a(i, j) = k(a_i, a_j) + k(z_i, z_j) - k(a_i, z_j) - k(a_j, z_i)`` the
    variance of the difference of the two MMD estimates is estimated from
    ``D = h_candidate - h_baseline``:

    ``"unbiased"``
        exact unbiased variance of the U-statistic with core ``D``, including
        the second-order term.  Stays calibrated when all three
        distributions coincide, where the first-order term vanishes.
    ``"first-order"``
        ``4/n`` times the sample variance of the row means of ``D``.

    The variance is floored at ``1e-12 (|t1| + |t2| + 1e-30)^2``.
    """
    C = as_features(candidate, "candidate")
    B = as_features(baseline, "baseline")
    Z = as_features(reference, "reference")
    if not C.shape[1] == B.shape[1] == Z.shape[1]:
        raise InputError("candidate, baseline and reference must share a dimension")
    n = min(C.shape[0], B.shape[0], Z.shape[0])
    if n < MIN_SAMPLES:
        raise InsufficientSamplesError(f"need at least {MIN_SAMPLES} rows in every set, got {n}")
    if variance not in ("unbiased", "first-order"):
        raise InputError(f"unknown variance estimator {variance!r}")
    rng = as_rng(rng)
    C = C[rng.derive(0).permutation(C.shape[0])[:n]]
    B = B[rng.derive(0).permutation(B.shape[0])[:n]]
    Z = Z[rng.derive(1).permutation(Z.shape[0])[:n]]

    Kzz = spec.matrix(Z, Z)
    t, H = [], []
    for A in (C, B):
        Kaa = spec.matrix(A, A)
        Kaz = spec.matrix(A, Z)
        t.append(float(_offdiag_mean(Kaa) + _offdiag_mean(Kzz) - 2.0 * Kaz.mean()))
        core = Kaa + Kzz - Kaz - Kaz.T
        np.fill_diagonal(core, 0.0)
        H.append(core)
    D = H[0] - H[1]
    var = _variance_unbiased(D) if variance == "unbiased" else _variance_first_order(D)
    floor = 1e-12 * (abs(t[0]) + abs(t[1]) + 1e-30) ** 2
    var = float(max(var, floor))
    stat = t[0] - t[1]
    p = float(std_normal_cdf(stat / math.sqrt(var)))
    return TestResult(stat, var, p, n, t[0], t[1])


@dataclass(frozen=True)
class ControllerConfig:
    alpha: float = 0.05
    patience: int = 3
    decay: float = 0.5
    min_lr: float = 0.0

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise InputError("alpha must lie in (0, 1)")
        if self.patience < 1:
            raise InputError("patience must be positive")
        if not 0 < self.decay < 1:
            raise InputError("decay must lie in (0, 1)")
        if self.min_lr < 0:
            raise InputError("min_lr must be nonnegative")


@dataclass(frozen=True)
class AdaptationState:
    lr: float
    consecutive_failures: int = 0
    config: ControllerConfig = field(default_factory=ControllerConfig)

    def __post_init__(self):
        if not self.lr > 0 or self.lr < self.config.min_lr:
            raise InputError(f"lr must be positive and at least min_lr, got {self.lr}")


def lr_controller_step(state, p_value):
    """Record one test outcome; returns ``(new_state, "kept" | "decayed")``.

    A p-value at or above ``alpha`` is a failure to improve.  ``patience``
    failures in a row multiply the learning rate by ``decay`` (never below
    ``min_lr``) and reset the streak; any success resets it too.
    """
    if not 0.0 <= p_value <= 1.0:
        raise InputError(f"p_value must lie in [0, 1], got {p_value}")
    cfg = state.config
    if p_value < cfg.alpha:
        return replace(state, consecutive_failures=0), "kept"
    failures = state.consecutive_failures + 1
    if failures >= cfg.patience:
        lr = max(state.lr * cfg.decay, cfg.min_lr)
        return replace(state, lr=lr, consecutive_failures=0), "decayed"
    return replace(state, consecutive_failures=failures), "kept"
