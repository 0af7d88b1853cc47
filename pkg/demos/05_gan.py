# %% [markdown]
# # Adversarial training on relaxed samples
#
# The generator emits Gumbel-softmax vectors, the discriminator reads them,
# and real sequences are smoothed the same way so the two sources look
# alike. A small run (about half a minute) is enough to see validity move
# off zero. Results land in ./gan_demo_run.

# %%
import csv
from pathlib import Path

from gumbel_gan.grammar import Grammar, decode, make_dataset, recognize
from gumbel_gan.random import AnnealSchedule, make_rng
from gumbel_gan.training import GanConfig, GanTrainer, discretize, train_gan

config = GanConfig(hidden_size=16, batch_size=64, total_iters=2000,
                   schedule=AnnealSchedule(5.0, 1.0, 1000, 2000), eval_every=250, eval_samples=500)
data = make_dataset(Grammar(), 5000, 12, make_rng(config.seed))
print("validity before training:", GanTrainer(config, data).validity(0, 500))

# %%
out = Path("gan_demo_run")
trainer = train_gan(config, data, out)

with open(out / "losses.csv") as fh:
    for row in csv.DictReader(fh):
        if row["validity_rate"]:
            print(f"iter {row['iteration']:>5}  d_loss {float(row['d_loss']):.3f}  "
                  f"g_loss {float(row['g_loss']):+.3f}  tau {float(row['tau']):.2f}  "
                  f"validity {float(row['validity_rate']):.3f}")

# %%
for s in discretize(trainer.gen, "gan", 10, make_rng(9)):
    print(repr(s), recognize(s))
