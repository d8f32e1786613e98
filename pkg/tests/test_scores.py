import math

import numpy as np
import pytest
from scipy import integrate, linalg, stats

from mmdeval.errors import DomainError, InputError
from mmdeval.numeric import RngState
from mmdeval.scores import (
    GaussianMoments,
    censored_normal_moments,
    censored_normal_moments_1d,
    d_m_coefficient,
    expected_fid_1d_normal,
    fid_estimate,
    fit_moments,
    frechet_distance,
    inception_score,
)

from conftest import random_spd

# high-precision reference values (mpmath, 30 digits)
D_M = {
    2: 0.797884560802865356,
    10: 0.972659274121588243,
    20: 0.986934267524655291,
    50: 0.994911304669732824,
    1000: 0.999749781101513203,
}
EXPECTED_FID_0_1_VS_1_2 = 2.20235176109511231  # P=N(0,1), Q=N(1,4), m=20, n=50
EXPECTED_FID_SAME_20 = 0.151921503171144282  # P=Q=N(0,1), m=n=20


def test_fit_moments_small_cases(nprng):
    g = fit_moments([[-1.0], [1.0]])
    assert g.mean[0] == 0.0 and g.cov[0, 0] == 2.0
    assert np.all(fit_moments(np.ones((4, 3))).cov == 0)
    X = nprng.standard_normal((3, 2))
    mu = [sum(X[i, k] for i in range(3)) / 3 for k in range(2)]
    cov = [[sum((X[i, a] - mu[a]) * (X[i, b] - mu[b]) for i in range(3)) / 2 for b in range(2)] for a in range(2)]
    g = fit_moments(X)
    np.testing.assert_allclose(g.mean, mu, rtol=1e-14)
    np.testing.assert_allclose(g.cov, cov, rtol=1e-14, atol=1e-15)
    with pytest.raises(InputError):
        fit_moments([[1.0, 2.0]])


def test_frechet_hand_values():
    assert frechet_distance(GaussianMoments([0.0], [[1.0]]), GaussianMoments([0.0], [[4.0]])) == 1.0
    a = GaussianMoments([0.0, 0.0], np.diag([1.0, 4.0]))
    b = GaussianMoments([0.0, 0.0], np.diag([9.0, 1.0]))
    assert frechet_distance(a, b) == pytest.approx(5.0, abs=1e-12)


@pytest.mark.parametrize("d", [1, 3, 16, 64])
def test_frechet_against_scipy_sqrtm(nprng, d):
    Sa = random_spd(nprng, d)
    Sb = random_spd(nprng, d)
    ma, mb = nprng.standard_normal(d), nprng.standard_normal(d)
    ref = np.sum((ma - mb) ** 2) + np.trace(Sa) + np.trace(Sb) - 2 * np.real(np.trace(linalg.sqrtm(Sa @ Sb)))
    a, b = GaussianMoments(ma, Sa), GaussianMoments(mb, Sb)
    assert frechet_distance(a, b) == pytest.approx(ref, rel=1e-9, abs=1e-9)
    assert abs(frechet_distance(a, b) - frechet_distance(b, a)) <= 1e-8
    assert frechet_distance(a, a) <= 1e-8


def test_frechet_rotation_invariance(nprng):
    d = 12
    Sa, Sb = random_spd(nprng, d), random_spd(nprng, d)
    ma, mb = nprng.standard_normal(d), nprng.standard_normal(d)
    Q, _ = np.linalg.qr(nprng.standard_normal((d, d)))
    base = frechet_distance(GaussianMoments(ma, Sa), GaussianMoments(mb, Sb))
    rot = frechet_distance(GaussianMoments(Q @ ma, Q @ Sa @ Q.T), GaussianMoments(Q @ mb, Q @ Sb @ Q.T))
    assert abs(base - rot) <= 1e-8


def test_fid_estimate_examples():
    s = RngState(3)
    X = s.normal((50, 4))
    assert fid_estimate(X, X) <= 1e-8
    x = s.normal((10**5, 1))
    y = s.normal((10**5, 1)) + 1
    assert fid_estimate(x, y) == pytest.approx(1.0, abs=0.05)


def test_fid_same_distribution_bias_decreases():
    s = RngState(9)
    vals = [fid_estimate(s.normal((n, 8)), s.normal((n, 8))) for n in (100, 1000, 10_000)]
    assert all(v > 0 for v in vals)
    assert vals[0] > vals[1] > vals[2]


@pytest.mark.parametrize("m, expected", sorted(D_M.items()))
def test_d_m_reference_values(m, expected):
    assert d_m_coefficient(m) == pytest.approx(expected, abs=1e-12)


def test_d_m_below_one_everywhere():
    ms = np.arange(2, 10**6 + 1)
    values = np.array([d_m_coefficient(int(m)) for m in ms])
    assert np.all((values > 0) & (values < 1))
    assert values[-1] > 0.99999
    assert d_m_coefficient(None) == 1.0


@pytest.mark.parametrize("m", [1, 0, -3, 2.5])
def test_d_m_domain(m):
    with pytest.raises(DomainError):
        d_m_coefficient(m)


def test_expected_fid_values():
    assert expected_fid_1d_normal(0, 1, 1, 2, 20, 50) == pytest.approx(EXPECTED_FID_0_1_VS_1_2, rel=1e-13)
    assert expected_fid_1d_normal(0, 1, 0, 1, 20, 20) == pytest.approx(EXPECTED_FID_SAME_20, rel=1e-12)
    # infinite sentinel gives the population value exactly
    assert expected_fid_1d_normal(0.5, 1.5, -1.0, 3.0, None, None) == 1.5**2 + 1.5**2


def test_expected_fid_monte_carlo():
    s = RngState(17)
    x = s.normal((20_000, 20))
    y = s.normal((20_000, 20))
    fid = (x.mean(1) - y.mean(1)) ** 2 + x.var(1, ddof=1) + y.var(1, ddof=1) - 2 * x.std(1, ddof=1) * y.std(1, ddof=1)
    se = fid.std(ddof=1) / math.sqrt(len(fid))
    assert abs(fid.mean() - EXPECTED_FID_SAME_20) <= 3 * se


def test_censored_1d_against_quadrature():
    for mu, sigma in [(0.0, 1.0), (0.7, 2.0), (-1.3, 0.5)]:
        pdf = stats.norm(mu, sigma).pdf
        m1 = integrate.quad(lambda x: x * pdf(x), 0, np.inf)[0]
        m2 = integrate.quad(lambda x: x * x * pdf(x), 0, np.inf)[0]
        mean, var = censored_normal_moments_1d(mu, sigma)
        assert mean == pytest.approx(m1, rel=1e-9)
        assert var == pytest.approx(m2 - m1 * m1, rel=1e-9)
    mean, var = censored_normal_moments_1d(0.0, 1.0)
    assert mean == pytest.approx(0.398942280401432678, abs=1e-14)
    assert var == pytest.approx(0.340845056908104664, abs=1e-14)


def test_censored_1d_limits():
    mean, var = censored_normal_moments_1d(10.0, 1.0)
    assert abs(mean - 10) <= 1e-8 and abs(var - 1) <= 1e-8
    mean, var = censored_normal_moments_1d(-10.0, 1.0)
    assert abs(mean) <= 1e-8 and abs(var) <= 1e-8
    with pytest.raises(DomainError):
        censored_normal_moments_1d(0.0, 0.0)


def test_censored_multivariate_diagonal_and_means():
    mu = np.array([0.3, -0.2, 1.0])
    cov = np.diag([1.0, 2.0, 0.5])
    g = censored_normal_moments(mu, cov, RngState(4), mc_samples=200_000)
    m1, v1 = censored_normal_moments_1d(mu, np.sqrt(np.diag(cov)))
    assert np.array_equal(g.mean, m1)
    assert np.array_equal(np.diag(g.cov), v1)
    off = ~np.eye(3, dtype=bool)
    assert np.all(np.abs(g.cov[off]) <= 3 * g.cov_stderr[off])


def test_censored_bivariate_against_quadrature():
    rho = 0.5
    cov = np.array([[1.0, rho], [rho, 1.0]])
    dist = stats.multivariate_normal([0.0, 0.0], cov)
    cross = integrate.dblquad(lambda y, x: x * y * dist.pdf([x, y]), 0, 10, 0, 10, epsabs=1e-11)[0]
    mean = 1 / math.sqrt(2 * math.pi)
    g = censored_normal_moments([0.0, 0.0], cov, RngState(6), mc_samples=10**6)
    assert abs(g.cov[0, 1] - (cross - mean * mean)) <= 3 * g.cov_stderr[0, 1]


def test_censored_is_seed_deterministic():
    cov = np.array([[1.0, 0.3], [0.3, 2.0]])
    a = censored_normal_moments([0.1, 0.2], cov, RngState(5), mc_samples=20_000)
    b = censored_normal_moments([0.1, 0.2], cov, RngState(5), mc_samples=20_000)
    assert np.array_equal(a.cov, b.cov)


def test_inception_score_fixtures():
    assert inception_score(np.full((5, 4), 0.25)) == pytest.approx(1.0, abs=1e-15)
    assert abs(inception_score(np.eye(7)) - 7) <= 1e-12
    assert inception_score(np.tile([0.0, 1.0, 0.0], (4, 1))) == 1.0
    with pytest.raises(InputError):
        inception_score([[0.5, 0.6]])
    with pytest.raises(InputError):
        inception_score([[1.5, -0.5]])


def test_inception_score_bounds(nprng):
    for _ in range(50):
        C = int(nprng.integers(2, 12))
        P = nprng.dirichlet(np.full(C, nprng.uniform(0.05, 3)), size=int(nprng.integers(1, 30)))
        s = inception_score(P)
        assert 1 - 1e-10 <= s <= C + 1e-10
