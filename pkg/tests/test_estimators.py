import math

import numpy as np
import pytest

from mmdeval.errors import InputError, NonDifferentiableError
from mmdeval.estimators import (
    cramer_surrogate,
    energy_distance,
    energy_score,
    kid,
    mmd2_biased,
    mmd2_block_average,
    mmd2_unbiased,
    score_based_cramer_objective,
    witness_eval,
    witness_grad,
    witness_grad_penalty,
)
from mmdeval.kernels import Distance, Dot, Poly, RbfMixture, RqMixture, kernel_value
from mmdeval.numeric import RngState


def loop_mmd2_u(spec, X, Y):
    m, n = len(X), len(Y)
    sxx = sum(kernel_value(spec, X[i], X[j]) for i in range(m) for j in range(m) if i != j)
    syy = sum(kernel_value(spec, Y[i], Y[j]) for i in range(n) for j in range(n) if i != j)
    sxy = sum(kernel_value(spec, x, y) for x in X for y in Y)
    return sxx / (m * (m - 1)) + syy / (n * (n - 1)) - 2 * sxy / (m * n)


def col(*v):
    return np.array(v, dtype=float)[:, None]


@pytest.mark.parametrize("spec", [RbfMixture(), RqMixture(), Poly(), Distance(0.7)], ids=repr)
def test_unbiased_matches_double_loop(spec, nprng):
    X = nprng.standard_normal((9, 3))
    Y = nprng.standard_normal((6, 3)) + 0.5
    assert mmd2_unbiased(spec, X, Y).value == pytest.approx(loop_mmd2_u(spec, X, Y), rel=1e-12, abs=1e-14)


def test_hand_examples():
    assert mmd2_unbiased(Dot(), col(0, 2), col(1, 1)).value == -1.0
    assert mmd2_biased(Dot(), col(0, 2), col(1, 1)).value == 0.0
    a = np.array([[1.0, 2.0], [1.0, 2.0]])
    assert mmd2_unbiased(RqMixture(), a, a).value == 0.0


def test_biased_is_mean_difference_for_dot(nprng):
    X = nprng.standard_normal((20, 4))
    Y = nprng.standard_normal((30, 4))
    diff = X.mean(0) - Y.mean(0)
    assert mmd2_biased(Dot(), X, Y).value == pytest.approx(diff @ diff, rel=1e-10)
    assert abs(mmd2_biased(RbfMixture(), X, X).value) <= 1e-12


def test_exchange_symmetry(nprng):
    X = nprng.standard_normal((50, 5))
    Y = nprng.standard_normal((40, 5))
    for spec in (RqMixture(), Distance(1.0)):
        assert mmd2_unbiased(spec, X, Y).value == mmd2_unbiased(spec, Y, X).value


@pytest.mark.parametrize("c", [2.0, 0.25, 8.0])
def test_kernel_scaling_equivariance(nprng, c):
    X = nprng.standard_normal((10, 3))
    Y = nprng.standard_normal((12, 3))
    base = mmd2_unbiased(Poly(1, 1.0, 0.0), X, Y).value
    assert mmd2_unbiased(Poly(1, c, 0.0), X, Y).value == c * base


def test_too_few_rows():
    with pytest.raises(InputError):
        mmd2_unbiased(Dot(), col(1), col(1, 2))
    with pytest.raises(InputError):
        mmd2_unbiased(Dot(), np.ones((3, 2)), np.ones((3, 3)))


@pytest.mark.parametrize("beta", [0.5, 1.0, 1.5, 2.0])
def test_energy_equals_distance_mmd_for_any_anchor(nprng, beta):
    X = nprng.standard_normal((30, 4))
    Y = nprng.standard_normal((25, 4)) * 1.3
    e = energy_distance(X, Y, beta).value
    for z0 in (None, nprng.standard_normal(4), 10 * nprng.standard_normal(4)):
        assert mmd2_unbiased(Distance(beta, z0), X, Y).value == pytest.approx(e, rel=1e-12)


def test_distance_mmd_translation_invariant(nprng):
    X = nprng.standard_normal((20, 3))
    Y = nprng.standard_normal((20, 3)) + 1
    shift = np.array([3.0, -2.0, 5.0])
    a = mmd2_unbiased(Distance(1.0), X, Y).value
    b = mmd2_unbiased(Distance(1.0), X + shift, Y + shift).value
    assert b == pytest.approx(a, rel=1e-10)
    assert kernel_value(Distance(1.0), X[0], Y[0]) != pytest.approx(kernel_value(Distance(1.0), X[0] + shift, Y[0] + shift))


def test_energy_beta2_is_mean_difference(nprng):
    X = nprng.standard_normal((15, 3))
    Y = nprng.standard_normal((11, 3))
    diff = X.mean(0) - Y.mean(0)
    m, n = len(X), len(Y)
    # the U-statistic removes the within-sample trace terms
    cx = (np.sum(X.sum(0) ** 2) - np.sum(X * X)) / (m * (m - 1))
    cy = (np.sum(Y.sum(0) ** 2) - np.sum(Y * Y)) / (n * (n - 1))
    expected = cx + cy - 2 * X.mean(0) @ Y.mean(0)
    assert energy_distance(X, Y, 2.0).value == pytest.approx(expected, rel=1e-10)
    assert expected != pytest.approx(diff @ diff)


@pytest.mark.parametrize("t", [0.5, 1.0, 7.0])
def test_point_mass_fixtures(t):
    X = col(0, 0)
    Y = col(t, t)
    assert energy_distance(X, Y).value == t
    assert cramer_surrogate(X, Y).value == 0.0
    assert energy_score(X, [t]) == -t
    assert score_based_cramer_objective(X, Y) == 0.0
    assert score_based_cramer_objective(X, col(t)) == 0.0
    assert cramer_surrogate(X, col(0)).value == 0.0


def test_energy_score_hand_value():
    assert energy_score(col(0, 2), [0.0]) == 0.0


def test_energy_scores_combine_to_energy_distance(nprng):
    X = nprng.standard_normal((12, 2))
    Y = nprng.standard_normal((9, 2)) + 0.7
    n = len(Y)
    # S(Q, y_j) averaged over j, with the j-th point left out of Q's sample
    sqq = np.mean([energy_score(np.delete(Y, j, 0), Y[j]) for j in range(n)])
    spq = np.mean([energy_score(X, y) for y in Y])
    assert sqq - spq == pytest.approx(energy_distance(X, Y).value, rel=1e-12)


def test_score_based_objective_decomposition(nprng):
    X = nprng.standard_normal((10, 3))
    Y = nprng.standard_normal((7, 3))
    m = len(X)
    within = sum(np.linalg.norm(X[i] - X[j]) for i in range(m) for j in range(m) if i != j) / (m * (m - 1))
    cross = np.mean([np.linalg.norm(x - y) for x in X for y in Y])
    norms = np.mean([np.linalg.norm(y) for y in Y])
    assert score_based_cramer_objective(X, Y) == pytest.approx(-0.5 * within + cross - norms, rel=1e-12)


def test_cramer_surrogate_same_distribution_is_small():
    vals = []
    for r in range(200):
        s = RngState(3, r)
        vals.append(cramer_surrogate(s.normal((40, 2)), s.normal((40, 2))).value)
    vals = np.array(vals)
    assert abs(vals.mean()) <= 3 * vals.std(ddof=1) / math.sqrt(len(vals))


def test_block_average_degenerate_and_deterministic(nprng):
    X = nprng.standard_normal((30, 3))
    Y = nprng.standard_normal((30, 3))
    full = mmd2_unbiased(RqMixture(), X, Y).value
    one = mmd2_block_average(RqMixture(), X, Y, 30, 1, RngState(1))
    assert one.value == full and one.std_error is None
    a = mmd2_block_average(RqMixture(), X, Y, 10, 20, RngState(4))
    b = mmd2_block_average(RqMixture(), X, Y, 10, 20, RngState(4), threads=3)
    assert a == b
    with pytest.raises(InputError):
        mmd2_block_average(RqMixture(), X, Y, 31, 2, RngState(1))


def test_block_average_unbiased_monte_carlo():
    s = RngState(8)
    est = mmd2_block_average(RqMixture(), s.normal((400, 4)), s.normal((400, 4)), 50, 200, s)
    assert abs(est.value) <= 3 * est.std_error


def test_unbiased_over_fresh_samples():
    vals = np.array([mmd2_unbiased(RqMixture(), *RngState(21, r).normal((2, 30, 3))).value for r in range(500)])
    assert abs(vals.mean()) <= 3 * vals.std(ddof=1) / math.sqrt(500)


def test_kid_constant_and_shifted():
    X = np.ones((20, 3))
    assert kid(X, X.copy(), RngState(0), block_size=10, reps=5).value == 0.0
    s = RngState(2)
    X = s.normal((1000, 16))
    est = kid(X, s.normal((1000, 16)) + 1.0, s, block_size=100, reps=50)
    assert est.value > 5 * est.std_error


def test_kid_block_clamp_flag():
    s = RngState(2)
    est = kid(s.normal((50, 4)), s.normal((60, 4)), s, block_size=1000, reps=3)
    assert est.block_size == 50
    assert "block_clamped" in est.flags


def test_witness_linear_and_decay(nprng):
    X = nprng.standard_normal((10, 3))
    Y = nprng.standard_normal((8, 3))
    T = nprng.standard_normal((5, 3))
    np.testing.assert_allclose(witness_eval(Dot(), X, Y, T), T @ (X.mean(0) - Y.mean(0)), rtol=1e-12)
    assert np.all(witness_eval(RqMixture(), X, X, T) == 0)
    far = np.full((1, 3), 1e4)
    assert abs(witness_eval(RbfMixture(), X, Y, far)[0]) <= 1e-8


@pytest.mark.parametrize("spec", [RqMixture(), RbfMixture(), Distance(1.0), Poly()], ids=repr)
def test_witness_grad_against_differences(spec, nprng):
    X = nprng.standard_normal((6, 2))
    Y = nprng.standard_normal((5, 2)) + 1
    T = nprng.standard_normal((3, 2))
    G = witness_grad(spec, X, Y, T)
    h = 1e-6
    for k in range(2):
        e = np.zeros(2)
        e[k] = h
        fd = (witness_eval(spec, X, Y, T + e) - witness_eval(spec, X, Y, T - e)) / (2 * h)
        np.testing.assert_allclose(G[:, k], fd, rtol=1e-6, atol=1e-9)


def test_penalty_linear_and_identical(nprng):
    X = nprng.standard_normal((10, 3))
    Y = nprng.standard_normal((12, 3))
    gap = np.linalg.norm(X.mean(0) - Y.mean(0))
    pen = witness_grad_penalty(Dot(), X, Y, RngState(5), n_interp=32)
    assert pen.value == pytest.approx((gap - 1) ** 2, rel=1e-12)
    assert witness_grad_penalty(RqMixture(), X, X, RngState(5)).value == 1.0


def test_penalty_distance_kernel_resamples_coincident_points():
    X = col(0, 0)
    Y = col(0, 0)
    with pytest.raises(NonDifferentiableError):
        witness_grad_penalty(Distance(1.0), X, Y, RngState(1), n_interp=4, max_retries=3)
    X = col(0.0, 1.0)
    Y = col(2.0, 3.0)
    pen = witness_grad_penalty(Distance(1.0), X, Y, RngState(1), n_interp=16)
    assert pen.value >= 0
