"""Reverse-mode autograd on float64 arrays, checked against finite differences."""
# %%
import numpy as np

from mstct import numerics as nx

rng = np.random.default_rng(0)

# %% [markdown]
# A tiny two-layer network.  Leaves created with `parameter` collect
# gradients; `backward` walks the graph in reverse topological order.

# %%
W1 = nx.parameter(rng.standard_normal((6, 4)) * 0.5, name="W1")
W2 = nx.parameter(rng.standard_normal((4, 1)) * 0.5, name="W2")
x = nx.Tensor(rng.standard_normal((10, 6)))


def loss():
    h = nx.gelu(nx.matmul(x, W1))
    return nx.mean(nx.square(nx.matmul(h, W2)))


L = loss()
nx.backward(L)
print("loss", L.item())
print("dL/dW2 column:", W2.grad.ravel())

# %% [markdown]
# `grad_check` perturbs sampled coordinates by +-1e-5 and reports the worst
# relative error |analytic - numeric| / max(1, |analytic|).

# %%
for p in (W1, W2):
    p.grad = None
print("max relative error", nx.grad_check(loss, [W1, W2], samples_per_param=None))

# %% [markdown]
# A temporal convolution with stride 2 and a depthwise kernel, same check.

# %%
xs = nx.parameter(rng.standard_normal((16, 8)))
wd = nx.parameter(rng.standard_normal((3, 8)))
print("conv1d depthwise:",
      nx.grad_check(lambda: nx.sum(nx.square(nx.conv1d(xs, wd, None, stride=2, pad=1, depthwise=True))),
                    [xs, wd], samples_per_param=None))

# %% [markdown]
# The same suite for every block of the desk model, as run by `mstct gradcheck`.

# %%
from mstct.cli import run_gradchecks

for name, err in run_gradchecks(seed=0, samples=2).items():
    print(f"{name:26s} {err:.2e}")
