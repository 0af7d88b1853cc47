# %% [markdown]
# # Checking hand-written gradients
#
# Every backward pass in the package is compared with central differences.
# Here the generator is unrolled twelve steps with its Gumbel noise frozen,
# so the relaxed samples are a deterministic function of the weights.

# %%
import numpy as np

from gumbel_gan.network import LstmParams, draw_generator_noise, generate, generate_backward
from gumbel_gan.numeric import grad_check, numerical_gradient
from gumbel_gan.random import gumbel_noise, make_rng

rng = make_rng(3)
params = LstmParams.init(8, 6, 6, rng)
z_c, z_h = draw_generator_noise(params, 4, rng)
noise = gumbel_noise(rng, (4, 12, 6))
weights = rng.normal(size=(4, 12, 6))


def loss_and_grads(tensors):
    p = LstmParams(8, 6, 6, tensors)
    sample = generate(p, z_c, z_h, 1.0, noise=noise)
    return float((sample.soft * weights).sum()), generate_backward(p, sample, weights)


# %% [markdown]
# With the small default init some gradient entries are around 1e-7, so
# roundoff in the finite difference (about 1e-16 * |loss| / eps) dominates
# their relative error. A larger step trades roundoff for truncation error.

# %%
_, analytic = loss_and_grads(dict(params.tensors))
numeric = numerical_gradient(lambda t: loss_and_grads(t)[0], dict(params.tensors), eps=1e-5)
worst = max(np.abs(analytic[k] - numeric[k]).max() for k in analytic)
print(f"largest absolute discrepancy at eps=1e-5: {worst:.1e}")
for eps in [1e-4, 1e-5, 1e-6]:
    err = grad_check(loss_and_grads, dict(params.tensors), eps=eps)
    print(f"eps={eps:.0e}  worst relative error {err:.2e}")

# %% [markdown]
# Weights of a more typical trained magnitude keep every entry well above
# the roundoff floor.

# %%
big = {k: rng.normal(0, 0.3, v.shape) for k, v in params.tensors.items()}
print(f"scale 0.3, eps=1e-5: worst relative error {grad_check(loss_and_grads, big):.2e}")
