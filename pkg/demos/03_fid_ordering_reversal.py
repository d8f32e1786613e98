"""
When the worse model gets the better FID
========================================

P1 = N(0, (1 - 1/m)^2) is truly farther from Q = N(0, 1) than P2 = Q
itself.  The plug-in FID from m samples says otherwise, on average.
"""

# %%
from mmdeval import RngState
from mmdeval.biaslab import fid_ordering_reversal_1d, fid_ordering_reversal_relu
from mmdeval.scores import d_m_coefficient, expected_fid_1d_normal

for m in (5, 10, 50):
    rep = fid_ordering_reversal_1d(m, 100_000, RngState(m))
    x = rep.extra
    print(f"m={m:>3}: true FID {x['true_fid_p1']:.4f} vs 0, "
          f"expected estimates differ by {x['analytic_diff']:+.5f} "
          f"(MC {x['mc_diff']:+.5f} +- {x['diff_stderr']:.5f})")

# %%
# The culprit is the sample standard deviation, which is biased low by d_m.
for m in (2, 5, 10, 100, 1000):
    print(f"d_{m} = {d_m_coefficient(m):.6f}")
print("E[FID], m=20 vs n=50 samples:", expected_fid_1d_normal(0, 1, 1, 2, 20, 50))
print("population FID:             ", expected_fid_1d_normal(0, 1, 1, 2, None, None))

# %%
# The same effect in a higher-dimensional, non-Gaussian setting: ReLU'd
# Gaussians.  Whether the order flips depends on the random covariance.
rep = fid_ordering_reversal_relu(d=32, m_list=(320, 3200), rng=RngState(3), mc_samples=200_000, reps=4)
print("true FID:", {k: round(v, 3) for k, v in rep.extra["true_fid"].items()}, rep.extra["true_order"])
for r in rep.rows:
    print(f"  {r.label} m={r.n}: estimate {r.mean:.3f} +- {r.stderr:.3f}")
print("estimated order per m:", rep.extra["estimated_order"])
