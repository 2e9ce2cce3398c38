"""Stage shapes of the temporal encoder and the analytic compute estimate."""
# %%
import numpy as np

from mstct import model as M
from mstct import numerics as nx

# %% [markdown]
# Channel widths grow by gamma per stage (rounded up to a multiple of H)
# while the token count halves after the first stage.

# %%
cfg = M.full_scale_config()
print("stage dims   ", cfg.stage_dims())
print("stage lengths", cfg.stage_lengths())

# %% [markdown]
# The analytic table lists input and output sizes of every layer.  Here is
# the first block of each stage.

# %%
for name, a, b in M.architecture_table(cfg):
    if ".b1." in name or name.endswith("merge"):
        print(f"{name:22s} {str(a):14s} -> {b}")

# %% [markdown]
# Running the real network with tracing gives the same list: the shapes are
# observed from the tensors, not recomputed from the config.

# %%
params = M.init_params(cfg, seed=0)
trace = []
with nx.no_grad():
    y, heat = M.forward(nx.Tensor(np.zeros((cfg.T, cfg.D0))), params, cfg, trace)
print("trace equals table:", trace == M.architecture_table(cfg))
print("parameters:", f"{params.num_parameters():,}", " outputs:", y.shape, heat.shape)

# %% [markdown]
# Compute: depthwise local convolutions keep the estimate near a dozen
# GFLOPs (2 FLOPs per multiply-accumulate); full convolutions cost far more.

# %%
for depthwise in (True, False):
    est = M.estimate_flops(cfg.with_(depthwise_local_conv=depthwise))
    print(f"depthwise={depthwise!s:5s}  MACs {est['macs'] / 1e9:6.2f} G  FLOPs {est['flops'] / 1e9:6.2f} G")

# %% [markdown]
# Each extra block per stage adds a roughly constant amount.

# %%
prev = None
for B in range(1, 5):
    macs = M.estimate_flops(cfg.with_(B=B))["macs"]
    print(f"B={B}: {macs / 1e9:.2f} GMAC" + ("" if prev is None else f"  (+{(macs - prev) / 1e9:.2f})"))
    prev = macs
