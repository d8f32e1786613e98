"""
KID is unbiased, FID is not
===========================

Both samples come from N(0, I_16), so either score should be 0.
"""

# %%
from mmdeval import RngState
from mmdeval.biaslab import score_bias_curves

rng = RngState(1)
n_list = [50, 200, 1000, 5000]

# %%
kid = score_bias_curves("kid", 16, "same", n_list, reps=20, rng=rng.derive(0))
fid = score_bias_curves("fid", 16, "same", n_list, reps=20, rng=rng.derive(1))

print(f"{'n':>6} {'KID mean':>12} {'KID se':>10} {'FID mean':>10} {'FID se':>8}")
for k, f in zip(kid.rows, fid.rows):
    print(f"{k.n:>6} {k.mean:>12.2e} {k.stderr:>10.1e} {f.mean:>10.4f} {f.stderr:>8.4f}")

# %%
# KID's means scatter around 0 at every n.  FID shrinks roughly like 1/n
# but never reaches 0 for finite samples, so comparing FIDs computed at
# different n compares the bias as much as the models.
shifted = score_bias_curves("fid", 16, "shifted", [100, 1000, 10000], reps=5, rng=rng.derive(2))
for r in shifted.rows:
    print(f"shifted pair, n={r.n}: FID {r.mean:.3f} (population value {r.analytic})")

# %%
# The same table as CSV, ready for a plotting tool.
print(fid.to_csv())
