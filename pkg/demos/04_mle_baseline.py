# %% [markdown]
# # Maximum-likelihood baseline
#
# A character LSTM trained with teacher forcing. It learns the language
# quickly and gives a reference point for the adversarial model.
# Runs in about twenty seconds.

# %%
from gumbel_gan.grammar import Grammar, make_dataset
from gumbel_gan.network import LstmParams, sample_mle
from gumbel_gan.grammar import decode, recognize
from gumbel_gan.random import make_rng
from gumbel_gan.training import GanConfig, evaluate_validity, train_mle

config = GanConfig(hidden_size=32, batch_size=200, total_iters=2000)
data = make_dataset(Grammar(), 5000, 12, make_rng(config.seed))

untrained = LstmParams.init(32, 6, 6, make_rng(0))
print("untrained validity:", evaluate_validity(untrained, "mle", 500, make_rng(7)))

# %%
result = train_mle(config, data)
print(f"NLL first/last batch: {result.nll_log[0]:.3f} / {result.nll_log[-1]:.3f}")
print(f"held-out NLL: {result.heldout_nll:.3f}")
print("trained validity:", evaluate_validity(result.params, "mle", 500, make_rng(7)))

# %%
for s in decode(sample_mle(result.params, 10, make_rng(8))):
    print(repr(s), recognize(s))
