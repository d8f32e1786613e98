"""Monte Carlo experiments showing where distance estimators are biased.

* data-splitting Wasserstein and max-MMD estimators (biased downwards),
* KID vs FID across sample sizes on synthetic Gaussians,
* FID ordering reversals for 1-D normals and for censored normals.

Every experiment returns a :class:`BiasReport` and is deterministic given
its ``rng``.
"""

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .estimators import kid
from .numeric import as_rng, psd_sqrt, std_normal_cdf
from .scores import (
    GaussianMoments,
    censored_normal_moments,
    expected_fid_1d_normal,
    fid_estimate,
    fit_moments,
    frechet_distance,
)

__all__ = [
    "BiasRow",
    "BiasReport",
    "wasserstein_splitting_bias",
    "max_mmd_splitting_bias",
    "score_bias_curves",
    "fid_1d_plugin",
    "fid_1d_expectation_check",
    "fid_ordering_reversal_1d",
    "fid_ordering_reversal_relu",
]

CHUNK = 100_000


@dataclass(frozen=True)
class BiasRow:
    n: int
    mean: float
    std: float
    stderr: float
    analytic: float = None
    label: str = ""

    @classmethod
    def from_values(cls, n, values, analytic=None, label=""):
        values = np.asarray(values, dtype=np.float64)
        std = float(values.std(ddof=1)) if values.size > 1 else 0.0
        return cls(int(n), float(values.mean()), std, std / math.sqrt(values.size), analytic, label)


@dataclass
class BiasReport:
    experiment: str
    params: dict
    rows: list
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.rows = sorted(self.rows, key=lambda r: r.n)

    def row(self, label):
        for r in self.rows:
            if r.label == label:
                return r
        raise KeyError(label)

    def to_dict(self):
        return {
            "experiment": self.experiment,
            "params": self.params,
            "rows": [vars(r) for r in self.rows],
            "extra": self.extra,
        }

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["n", "label", "mean", "std", "stderr", "analytic"])
        for r in self.rows:
            writer.writerow([r.n, r.label, repr(r.mean), repr(r.std), repr(r.stderr),
                             "" if r.analytic is None else repr(r.analytic)])
        return buf.getvalue()


def _chunked(total, rng, draw):
    """Concatenate ``draw(stream, k)`` over fixed-size chunks with derived streams."""
    out, done, i = [], 0, 0
    while done < total:
        k = min(CHUNK, total - done)
        out.append(draw(rng.derive(i), k))
        done += k
        i += 1
    return np.concatenate(out)


def wasserstein_splitting_bias(reps, rng, stubborn=False):
    """Expected value of a one-pair data-splitting Wasserstein estimate.

    P = N(1, 1), Q = N(0, 1).  From one training pair the critic is t if
    the P draw exceeds the Q draw and -t otherwise; that critic's population
    objective is +1 or -1.  The "stubborn" rule always picks t.
    """
    if reps < 1:
        raise InputError("reps must be positive")
    rng = as_rng(rng)

    def draw(stream, k):
        x = 1.0 + stream.normal(k)
        y = stream.normal(k)
        if stubborn:
            return np.ones(k)
        return np.where(x > y, 1.0, -1.0)

    values = _chunked(int(reps), rng, draw)
    analytic = 1.0 if stubborn else 1.0 - 2.0 * std_normal_cdf(-1.0 / math.sqrt(2.0))
    row = BiasRow.from_values(1, values, analytic, "stubborn" if stubborn else "argmax")
    return BiasReport("wasserstein", {"reps": int(reps), "stubborn": stubborn}, [row],
                      {"supremum": 1.0})


def _pair_form(S, Q, k):
    """sum_{i != j} x_i x_j^T for batches: outer(sum) - sum of outers."""
    return (np.einsum("ri,rj->rij", S, S) - Q) / (k * (k - 1))


def top_direction_sq(A):
    """theta_1^2 for the unit top eigenvector of each symmetric 2x2 in ``A``."""
    a, b, c = A[:, 0, 0], A[:, 0, 1], A[:, 1, 1]
    gap = np.hypot(a - c, 2.0 * b)
    with np.errstate(invalid="ignore", divide="ignore"):
        cos2 = np.where(gap > 0, (a - c) / gap, 0.0)
    return 0.5 * (1.0 + cos2)


def max_mmd_splitting_bias(m_tr, n_tr, reps, rng):
    """Objective value of the best linear projection chosen on training data.

    P = N((1, 0), I), Q = N((0, 0), I), linear kernel on ``theta^T x`` with
    ``||theta|| = 1``.  Per repetition the unbiased MMD estimate on the
    training samples is the quadratic form ``theta^T A theta``; its maximiser
    is the top eigenvector of the symmetric part of ``A``, and the population
    objective of that choice is ``theta_1^2`` (supremum 1).
    """
    if m_tr < 2 or n_tr < 2:
        raise InputError("training sizes must be at least 2")
    rng = as_rng(rng)
    shift = np.array([1.0, 0.0])

    def draw(stream, k):
        X = stream.normal((k, m_tr, 2)) + shift
        Y = stream.normal((k, n_tr, 2))
        Sx, Sy = X.sum(axis=1), Y.sum(axis=1)
        Qx = np.einsum("rni,rnj->rij", X, X)
        Qy = np.einsum("rni,rnj->rij", Y, Y)
        A = _pair_form(Sx, Qx, m_tr) + _pair_form(Sy, Qy, n_tr)
        A -= 2.0 / (m_tr * n_tr) * np.einsum("ri,rj->rij", Sx, Sy)
        A = 0.5 * (A + A.transpose(0, 2, 1))
        return top_direction_sq(A)

    # keep chunks small in memory for large training sets
    per_chunk = max(1, min(CHUNK, 2_000_000 // (m_tr + n_tr)))
    values, done, i = [], 0, 0
    while done < reps:
        k = min(per_chunk, reps - done)
        values.append(draw(rng.derive(i), k))
        done += k
        i += 1
    values = np.concatenate(values)
    row = BiasRow.from_values(m_tr, values, None, "theta1_sq")
    return BiasReport("max-mmd", {"m_tr": m_tr, "n_tr": n_tr, "reps": int(reps)}, [row],
                      {"supremum": 1.0, "min": float(values.min()), "max": float(values.max())})


def score_bias_curves(metric, d, dist_pair, n_list, reps, rng, shift=1.0, kid_block=100, kid_reps=10):
    """Mean and spread of KID or FID between fresh Gaussian samples, per n.

    Both samples are N(0, I_d) (``dist_pair="same"``) or the second has
    its first coordinate shifted by ``shift`` (``"shifted"``; population
    FID and squared-mean gap ``shift**2``).  KID uses blocks of
    ``min(kid_block, n)``.
    """
    if metric not in ("kid", "fid"):
        raise InputError(f"metric must be 'kid' or 'fid', got {metric!r}")
    if dist_pair not in ("same", "shifted"):
        raise InputError(f"dist_pair must be 'same' or 'shifted', got {dist_pair!r}")
    rng = as_rng(rng)
    offset = np.zeros(d)
    if dist_pair == "shifted":
        offset[0] = shift
    analytic_fid = float(offset @ offset)
    rows = []
    for n in n_list:
        if n < 2:
            raise InputError("every n must be at least 2")
        values = []
        for r in range(reps):
            stream = rng.derive(n).derive(r)
            X = stream.normal((n, d))
            Y = stream.normal((n, d)) + offset
            if metric == "kid":
                values.append(kid(X, Y, stream.derive(0), min(kid_block, n), kid_reps).value)
            else:
                values.append(fid_estimate(X, Y))
        analytic = analytic_fid if metric == "fid" else (0.0 if dist_pair == "same" else None)
        rows.append(BiasRow.from_values(n, values, analytic, metric))
    params = {"metric": metric, "d": d, "dist_pair": dist_pair, "n_list": list(n_list),
              "reps": reps, "shift": shift}
    return BiasReport(f"{metric}-curve", params, rows)


def fid_1d_plugin(x, y=None, ref_mean=0.0, ref_var=1.0):
    """Vectorised 1-D plug-in FID; rows of ``x`` (and ``y``) are independent samples.

    Without ``y`` the reference side uses the exact moments
    ``ref_mean``/``ref_var``.
    """
    mx, vx = x.mean(axis=-1), x.var(axis=-1, ddof=1)
    if y is None:
        my, vy = ref_mean, ref_var
    else:
        my, vy = y.mean(axis=-1), y.var(axis=-1, ddof=1)
    return (mx - my) ** 2 + vx + vy - 2.0 * np.sqrt(vx * vy)


def fid_1d_expectation_check(mu_p, sigma_p, mu_q, sigma_q, m, n, reps, rng):
    """Monte Carlo mean of the 1-D plug-in FID next to its exact expectation."""
    rng = as_rng(rng)

    def draw(stream, k):
        x = mu_p + sigma_p * stream.normal((k, m))
        y = mu_q + sigma_q * stream.normal((k, n))
        return fid_1d_plugin(x, y)

    values = _chunked(int(reps), rng, draw)
    analytic = expected_fid_1d_normal(mu_p, sigma_p, mu_q, sigma_q, m, n)
    row = BiasRow.from_values(m, values, analytic, "fid_1d")
    params = {"mu_p": mu_p, "sigma_p": sigma_p, "mu_q": mu_q, "sigma_q": sigma_q,
              "m": m, "n": n, "reps": int(reps)}
    return BiasReport("fid-1d-expectation", params, [row],
                      {"population": (mu_p - mu_q) ** 2 + (sigma_p - sigma_q) ** 2})


def fid_ordering_reversal_1d(m, reps, rng):
    """P1 = N(0, (1 - 1/m)^2), P2 = Q = N(0, 1), reference moments exact.

    P1 is truly farther from Q, yet the plug-in estimate from ``m`` samples
    is smaller in expectation.  Both models are fed the same standard normal
    draws (P1's scaled by 1 - 1/m), so ``extra["diff_stderr"]`` is the
    standard error of the paired difference.
    """
    if m < 2:
        raise InputError("m must be at least 2")
    rng = as_rng(rng)
    s1 = 1.0 - 1.0 / m

    def draw(stream, k):
        z = stream.normal((k, m))
        f1 = fid_1d_plugin(s1 * z)
        f2 = fid_1d_plugin(z)
        return np.stack([f1, f2, f1 - f2], axis=1)

    values = _chunked(int(reps), rng, draw)
    e1 = expected_fid_1d_normal(0.0, s1, 0.0, 1.0, m, None)
    e2 = expected_fid_1d_normal(0.0, 1.0, 0.0, 1.0, m, None)
    rows = [
        BiasRow.from_values(m, values[:, 0], e1, "P1"),
        BiasRow.from_values(m, values[:, 1], e2, "P2"),
        BiasRow.from_values(m, values[:, 2], e1 - e2, "P1-P2"),
    ]
    diff = rows[2]
    extra = {
        "true_fid_p1": 1.0 / m**2,
        "true_fid_p2": 0.0,
        "analytic_diff": e1 - e2,
        "mc_diff": diff.mean,
        "diff_stderr": diff.stderr,
        "reversed": bool(diff.mean + 3.0 * diff.stderr < 0.0),
    }
    return BiasReport("fid-reversal-1d", {"m": m, "reps": int(reps)}, rows, extra)


def relu_models(d, rng):
    """Moments (mu, Sigma) of the pre-ReLU normals for P1, P2 and Q.

    P1 = N(0, I), P2 = N(1, 0.8 S + 0.2 I) with S = (4/d) C C^T for a
    seeded standard normal C, Q = N(1, I).
    """
    C = as_rng(rng).normal((d, d))
    S = 4.0 / d * (C @ C.T)
    eye = np.eye(d)
    return {
        "P1": (np.zeros(d), eye),
        "P2": (np.ones(d), 0.8 * S + 0.2 * eye),
        "Q": (np.ones(d), eye),
    }


def fid_ordering_reversal_relu(d=64, m_list=(640, 6400), rng=0, mc_samples=10**6, reps=10,
                               truth_batches=10):
    """True vs estimated FID for censored normals; the reversal is reported, not asserted.

    Ground truth uses exact censored moments on the diagonal and Monte Carlo
    off-diagonal covariances.  ``extra["truth_stderr"]`` is the spread of
    the true FID across ``truth_batches`` independent moment estimates.
    Estimates draw ``m`` samples from each model and compare with the
    true moments of Q.
    """
    if d < 2:
        raise InputError("d must be at least 2")
    m_list = [int(m) for m in np.atleast_1d(m_list)]
    if min(m_list) < 2:
        raise InputError("every m must be at least 2")
    rng = as_rng(rng)
    models = relu_models(d, rng.derive(0))
    truth = {
        name: censored_normal_moments(mu, cov, rng.derive(1).derive(i), mc_samples, truth_batches)
        for i, (name, (mu, cov)) in enumerate(models.items())
    }
    q = truth["Q"]
    true_fid = {name: frechet_distance(truth[name], q) for name in ("P1", "P2")}
    truth_se = {}
    for name in ("P1", "P2"):
        truth_se[name] = _truth_stderr(models[name], models["Q"], rng.derive(2).derive(len(name)),
                                       mc_samples, truth_batches)

    rows = []
    for m in m_list:
        for name in ("P1", "P2"):
            mu, cov = models[name]
            root = psd_sqrt(cov)
            values = []
            for r in range(reps):
                stream = rng.derive(3).derive(m).derive(r)
                X = np.maximum(stream.normal((m, d)) @ root + mu, 0.0)
                values.append(frechet_distance(fit_moments(X), q))
            rows.append(BiasRow.from_values(m, values, true_fid[name], name))
    order = {}
    for m in m_list:
        p1 = next(r for r in rows if r.n == m and r.label == "P1")
        p2 = next(r for r in rows if r.n == m and r.label == "P2")
        order[str(m)] = "P1<P2" if p1.mean < p2.mean else "P1>=P2"
    extra = {
        "true_fid": true_fid,
        "truth_stderr": truth_se,
        "true_order": "P1<P2" if true_fid["P1"] < true_fid["P2"] else "P1>=P2",
        "estimated_order": order,
    }
    params = {"d": d, "m_list": m_list, "mc_samples": mc_samples, "reps": reps}
    return BiasReport("fid-reversal-relu", params, rows, extra)


def _truth_stderr(model, ref, rng, mc_samples, batches):
    """Standard error of the true FID from independent per-batch moment estimates."""
    per = max(mc_samples // batches, 2)
    vals = []
    for b in range(batches):
        a = censored_normal_moments(*model, rng.derive(b), per, 2)
        q = censored_normal_moments(*ref, rng.derive(batches + b), per, 2)
        vals.append(frechet_distance(GaussianMoments(a.mean, a.cov), GaussianMoments(q.mean, q.cov)))
    return float(np.std(vals, ddof=1) / math.sqrt(batches))
