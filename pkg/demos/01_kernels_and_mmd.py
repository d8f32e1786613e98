"""
Kernels, squared MMD and the energy distance
============================================

Three estimators of the same population quantity, and one loss that
looks similar but is not a divergence.
"""

# %%
import numpy as np

from mmdeval import RngState, RqMixture, Distance, mmd2_unbiased, mmd2_biased, energy_distance
from mmdeval.estimators import cramer_surrogate

rng = RngState(0)
X = rng.normal((300, 2))
Y = rng.normal((300, 2)) + np.array([0.5, 0.0])

# %%
# The U-statistic drops the i == j terms, the V-statistic keeps them.
# On samples from the same distribution the first hovers around zero
# (and is often negative), the second is always positive.
spec = RqMixture()
Y0 = rng.normal((300, 2))
print("same distribution   U:", mmd2_unbiased(spec, X, Y0).value, " V:", mmd2_biased(spec, X, Y0).value)
print("shifted by 0.5      U:", mmd2_unbiased(spec, X, Y).value, " V:", mmd2_biased(spec, X, Y).value)

# %%
# The distance-induced kernel turns the unbiased MMD into the energy
# distance, whatever anchor point z0 is used.
for z0 in (None, np.array([3.0, -4.0]), np.array([100.0, 0.0])):
    print("anchor", z0, "->", mmd2_unbiased(Distance(1.0, z0), X, Y).value)
print("energy distance     ", energy_distance(X, Y).value)

# %%
# Replacing one sample with the origin breaks this.  Two point masses at
# 0 and at t are different distributions, yet the surrogate is exactly 0.
for t in (0.5, 1.0, 7.0):
    P = np.zeros((2, 1))
    Q = np.full((2, 1), t)
    print(f"t={t}: surrogate {cramer_surrogate(P, Q).value}, energy {energy_distance(P, Q).value}")
