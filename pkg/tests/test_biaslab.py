import json
import math

import numpy as np
import pytest

from mmdeval.biaslab import (
    BiasReport,
    BiasRow,
    fid_1d_expectation_check,
    fid_1d_plugin,
    fid_ordering_reversal_1d,
    fid_ordering_reversal_relu,
    max_mmd_splitting_bias,
    relu_models,
    score_bias_curves,
    top_direction_sq,
    wasserstein_splitting_bias,
)
from mmdeval.errors import InputError
from mmdeval.numeric import RngState
from mmdeval.scores import censored_normal_moments, d_m_coefficient, frechet_distance

WASSERSTEIN_ANALYTIC = 0.520499877813046538  # 1 - 2 Phi(-1/sqrt 2), mpmath


def test_row_and_report_plumbing():
    row = BiasRow.from_values(5, [1.0, 2.0, 3.0], analytic=2.0, label="x")
    assert (row.mean, row.std) == (2.0, 1.0)
    assert row.stderr == 1 / math.sqrt(3)
    rep = BiasReport("demo", {}, [BiasRow.from_values(9, [0.0, 1.0]), row])
    assert [r.n for r in rep.rows] == [5, 9]
    assert rep.row("x") is row
    assert rep.to_csv().splitlines()[0] == "n,label,mean,std,stderr,analytic"
    json.dumps(rep.to_dict())


def test_wasserstein_analytic_and_stubborn():
    rep = wasserstein_splitting_bias(200_000, RngState(1))
    row = rep.rows[0]
    assert row.analytic == pytest.approx(WASSERSTEIN_ANALYTIC, abs=1e-15)
    assert round(row.analytic, 2) == 0.52
    assert abs(row.mean - row.analytic) <= 3 * row.stderr
    assert row.mean + 3 * row.stderr < 1.0
    assert wasserstein_splitting_bias(1000, RngState(1), stubborn=True).rows[0].mean == 1.0


def test_reports_deterministic_per_seed():
    a = wasserstein_splitting_bias(150_000, RngState(3)).to_dict()
    assert a == wasserstein_splitting_bias(150_000, RngState(3)).to_dict()


def test_top_direction_against_eigh(nprng):
    A = nprng.standard_normal((500, 2, 2))
    A = A + A.transpose(0, 2, 1)
    got = top_direction_sq(A)
    ref = np.array([np.linalg.eigh(a)[1][0, -1] ** 2 for a in A])
    np.testing.assert_allclose(got, ref, atol=1e-12)
    assert np.all((got >= 0) & (got <= 1))


def test_max_mmd_small_training_sets():
    row = max_mmd_splitting_bias(2, 2, 20_000, RngState(2)).rows[0]
    assert 0.55 <= row.mean <= 0.65
    assert row.mean + 3 * row.stderr < 1.0


def test_max_mmd_bias_shrinks():
    small = max_mmd_splitting_bias(5, 5, 5000, RngState(4)).rows[0].mean
    large = max_mmd_splitting_bias(100, 100, 2000, RngState(4)).rows[0].mean
    assert small < large <= 1.0


def test_kid_curve_unbiased():
    rep = score_bias_curves("kid", 16, "same", [10, 100, 1000], 100, RngState(5), kid_reps=1)
    for row in rep.rows:
        assert abs(row.mean) <= 3 * row.stderr


def test_fid_curves():
    same = score_bias_curves("fid", 16, "same", [100, 1000, 10_000], 3, RngState(6))
    means = [r.mean for r in same.rows]
    assert all(m > 0 for m in means) and means[0] > means[1] > means[2]
    shifted = score_bias_curves("fid", 16, "shifted", [10_000], 2, RngState(7))
    assert abs(shifted.rows[0].mean - 1.0) <= 0.1


def test_score_curve_validation():
    with pytest.raises(InputError):
        score_bias_curves("is", 4, "same", [10], 2, RngState(0))
    with pytest.raises(InputError):
        score_bias_curves("fid", 4, "other", [10], 2, RngState(0))


def test_fid_1d_plugin_exact_reference():
    x = np.array([[1.0, 3.0]])
    # mean 2, var 2 against N(0, 1): 4 + 2 + 1 - 2 sqrt 2
    assert fid_1d_plugin(x)[0] == pytest.approx(7 - 2 * math.sqrt(2), rel=1e-15)


def test_fid_1d_expectation_small():
    row = fid_1d_expectation_check(0, 1, 1, 2, 20, 50, 5000, RngState(8)).rows[0]
    assert abs(row.mean - row.analytic) <= 3 * row.stderr


def test_reversal_formula_m10():
    rep = fid_ordering_reversal_1d(10, 200_000, RngState(9))
    x = rep.extra
    assert x["true_fid_p1"] == pytest.approx(0.01) and x["true_fid_p2"] == 0.0
    closed = 0.1 * (0.01 - 0.1 + 2 * (d_m_coefficient(10) - 1))
    assert x["analytic_diff"] == pytest.approx(closed, rel=1e-12)
    assert x["analytic_diff"] < 0
    assert abs(x["mc_diff"] - x["analytic_diff"]) <= 3 * x["diff_stderr"]
    assert x["reversed"]
    for label in ("P1", "P2"):
        r = rep.row(label)
        assert abs(r.mean - r.analytic) <= 3 * r.stderr


def test_relu_models_recipe():
    models = relu_models(6, RngState(3))
    mu, cov = models["P2"]
    assert np.array_equal(mu, np.ones(6))
    assert np.all(np.linalg.eigvalsh(cov) >= 0.2 - 1e-12)
    assert np.array_equal(models["P1"][1], np.eye(6))


def test_relu_reversal_report_consistency():
    d = 8
    rep = fid_ordering_reversal_relu(d, (10 * d, 100 * d), RngState(10), mc_samples=100_000, reps=6)
    fine = fid_ordering_reversal_relu(d, (10 * d,), RngState(10).derive(99), mc_samples=10**6, reps=1)
    for name in ("P1", "P2"):
        se = math.hypot(rep.extra["truth_stderr"][name], fine.extra["truth_stderr"][name])
        assert abs(rep.extra["true_fid"][name] - fine.extra["true_fid"][name]) <= 3 * se
        small, large = (r for r in rep.rows if r.label == name)
        assert small.n == 10 * d and small.mean > large.mean
    assert rep.extra["true_order"] in ("P1<P2", "P1>=P2")


def test_censored_truth_against_itself_is_zero():
    mu, cov = relu_models(6, RngState(11))["P2"]
    a = censored_normal_moments(mu, cov, RngState(12), 200_000)
    assert frechet_distance(a, a) <= 1e-8
