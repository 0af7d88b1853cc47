# %% [markdown]
# # Sampling categoricals with Gumbel noise
#
# Adding Gumbel noise to logits and taking the argmax gives an exact sample
# from softmax(h). Replacing argmax with a tempered softmax gives a smooth,
# differentiable stand-in whose sharpness is set by tau.

# %%
import numpy as np

from gumbel_gan.numeric import softmax_rows
from gumbel_gan.random import AnnealSchedule, gumbel_max_sample, gumbel_softmax_sample, make_rng, tau_at

rng = make_rng(0)
h = np.log([0.5, 0.3, 0.2])

# %%
n = 100_000
idx = gumbel_max_sample(np.tile(h, (n, 1)), rng)
print("softmax     ", softmax_rows(h[None])[0].round(3))
print("gumbel-max  ", (np.bincount(idx, minlength=3) / n).round(3))

# %% [markdown]
# Temperature sweep: the mean of the largest entry climbs towards 1 as tau
# falls, and each sample drifts towards the uniform vector as tau grows.

# %%
for tau in [100.0, 5.0, 1.0, 0.1, 0.01]:
    y = gumbel_softmax_sample(np.tile(h, (10_000, 1)), tau, rng)
    print(f"tau={tau:<6} mean max entry {y.max(axis=1).mean():.3f}   example {y[0].round(3)}")

# %% [markdown]
# Training anneals tau linearly from 5 to 1 and then holds it.

# %%
schedule = AnnealSchedule()
for it in [0, 2500, 5000, 7500, 10_000, 20_000]:
    print(f"iteration {it:>6}: tau = {tau_at(schedule, it):.2f}")
