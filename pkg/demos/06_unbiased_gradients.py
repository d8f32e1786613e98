"""
Minibatch MMD gradients are unbiased
====================================

Fix a ReLU critic and generator, average the gradient of the unbiased
MMD over many small minibatches, and compare with the gradient on a
very large sample.
"""

# %%
import numpy as np

from mmdeval import RngState, RqMixture
from mmdeval.gradnet import GaussianSampler, Net, gradient_unbiasedness_mc, mmd_loss_grad, random_gradcheck

critic = Net.random([4, 16, 3], RngState(8))
generator = Net.random([2, 16, 4], RngState(9))
print(critic, generator, "parameters:", critic.n_params + generator.n_params)

# %%
# First make sure the analytic gradient is right.
report = random_gradcheck([4, 16, 3], RqMixture(), RngState(10), generator_sizes=[2, 16, 4])
print(f"finite differences: max rel. error {report.max_rel_error:.1e}, cosine {report.cosine:.8f}")

# %%
loss, grad = mmd_loss_grad(critic, generator, RqMixture(), RngState(11).normal((8, 4)), RngState(12).normal((8, 2)))
print(f"one minibatch of 8: loss {loss:.4f}, gradient norm {np.linalg.norm(grad):.4f}")

# %%
for m in (2, 8, 32):
    rep = gradient_unbiasedness_mc(
        critic, generator, RqMixture(), GaussianSampler(np.full(4, 0.5)), GaussianSampler(np.zeros(2)),
        m=m, reps=3000, rng=RngState(13, m), proxy_n=20_000, proxy_block=500,
    )
    print(f"m={m:>2}: cosine to large-sample gradient {rep.cosine:.4f}, "
          f"{100 * rep.within_3se:.0f}% of coordinates within 3 SE")
