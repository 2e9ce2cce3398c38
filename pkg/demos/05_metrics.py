"""Per-frame average precision and the action-conditional metrics on hand-made data."""
# %%
import numpy as np

from mstct.metrics import action_conditional_metrics, evaluate, per_frame_ap

# %% [markdown]
# AP averages the precision at the rank of every positive frame.  With
# positives ranked first and third: (1/1 + 2/3) / 2.

# %%
print(per_frame_ap([0.9, 0.8, 0.7, 0.1], [1, 0, 1, 0]))

# %% [markdown]
# Ties keep the original frame order, so the result never depends on sort
# internals.

# %%
print(per_frame_ap([0.5, 0.5], [0, 1]), per_frame_ap([0.5, 0.5], [1, 0]))

# %% [markdown]
# Two classes that tend to follow each other.  The conditional metrics score
# class j only on frames within tau of an occurrence of class i, so growing
# tau widens the context window.

# %%
labels = np.zeros((30, 2))
labels[3:8, 0] = labels[9:14, 1] = 1
labels[18:22, 0] = labels[23:28, 1] = 1
rng = np.random.default_rng(1)
preds = np.clip(0.7 * labels + 0.3 * rng.random(labels.shape), 0, 1)
for tau in (0, 2, 5, 20):
    m = action_conditional_metrics(preds, labels, tau)
    print(f"tau={tau:2d}  P {m.precision:.3f} R {m.recall:.3f} F1 {m.f1:.3f} mAP {m.mAP:.3f}  pairs {m.pairs}")

# %% [markdown]
# `evaluate` bundles everything into the report written by `mstct eval`.

# %%
print(evaluate(preds, labels, taus=(0, 20)).to_json())
