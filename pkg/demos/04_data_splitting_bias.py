"""
Choosing a critic on training data biases the test estimate
===========================================================

Two toy constructions where the critic is picked on a tiny training set
and then evaluated on the population.  The supremum is 1 in both.
"""

# %%
from mmdeval import RngState
from mmdeval.biaslab import max_mmd_splitting_bias, wasserstein_splitting_bias

# %%
# Wasserstein: one training pair from P = N(1, 1) and Q = N(0, 1) picks
# the critic t or -t.  A wrong pick scores -1.
rep = wasserstein_splitting_bias(10**6, RngState(4))
row = rep.rows[0]
print(f"argmax critic: {row.mean:.4f} +- {row.stderr:.4f} (exact {row.analytic:.4f})")
print("stubborn critic:", wasserstein_splitting_bias(1000, RngState(4), stubborn=True).rows[0].mean)

# %%
# Max-MMD with a unit-norm linear feature: the direction estimated from
# m_tr = n_tr training points loses most of its value when m_tr is tiny.
for m in (2, 5, 20, 100, 500):
    row = max_mmd_splitting_bias(m, m, 20_000 if m < 100 else 4000, RngState(m)).rows[0]
    print(f"m_tr = n_tr = {m:>3}: expected objective {row.mean:.4f} +- {row.stderr:.4f}")
