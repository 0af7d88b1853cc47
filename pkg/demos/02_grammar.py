# %% [markdown]
# # The toy expression language
#
# Sentences are arithmetic expressions over one variable, padded with spaces
# to twelve characters. This script samples a corpus, checks it with the
# recognizer, and counts the language by length.

# %%
from collections import Counter

from gumbel_gan.grammar import Grammar, enumerate_language, recognize, sample_corpus, valid_prefix_length
from gumbel_gan.random import make_rng

lines = sample_corpus(Grammar(), 10, 12, make_rng(1))
for s in lines:
    print(repr(s), recognize(s))

# %%
corpus = sample_corpus(Grammar(), 5000, 12, make_rng(2))
print("length histogram:", sorted(Counter(len(s.rstrip()) for s in corpus).items()))
print("all valid:", all(recognize(s) for s in corpus))

# %%
language = enumerate_language(Grammar(), 7)
print("expressions by length:", sorted(Counter(len(s) for s in language).items()))

# %% [markdown]
# The valid-prefix length says how far a broken string got before it
# could no longer be completed.

# %%
for s in ["x+x*x       ", "x+*x        ", "x x         ", "+x          "]:
    print(repr(s), valid_prefix_length(s))
