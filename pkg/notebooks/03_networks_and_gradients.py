# %% [markdown]
# # Dense networks, Adam and gradient checks
#
# Everything is plain numpy: tanh hidden layers, identity output, manual
# backprop on row batches. Central finite differences check every gradient.

# %%
import numpy as np

from leorach.gradcheck import max_relative_error
from leorach.neural import (
    OptimizerState,
    adam_step,
    backward,
    decode,
    encode,
    forward,
    init_autoencoder,
    init_params,
)

net = init_params([4, 8, 3], seed=0)
x = np.random.default_rng(1).normal(size=(5, 4))
c = np.random.default_rng(2).normal(size=(5, 3))

y, cache = forward(net, x)
grads, dx = backward(net, cache, c)  # gradient of sum(c * y)


def loss():
    return float(np.sum(c * forward(net, x)[0]))


print("max relative error:", max_relative_error(loss, zip(net.arrays(), grads.arrays())))

# %% [markdown]
# ## Fitting a toy target with Adam

# %%
target = np.sin(x[:, :3])
state = OptimizerState.for_params(net, lr=1e-2)
for step in range(500):
    y, cache = forward(net, x)
    g, _ = backward(net, cache, 2 * (y - target))
    adam_step(net, g, state)
    if step % 100 == 0:
        print(step, float(np.mean((y - target) ** 2)))

# %% [markdown]
# ## An autoencoder bottleneck
#
# The code is shorter than its input. Training on low-rank data makes the
# reconstruction error drop.

# %%
ae = init_autoencoder(8, 4, seed=3, hidden=16)
rng = np.random.default_rng(4)
data = rng.normal(size=(256, 3)) @ rng.normal(size=(3, 8)) / 3
opts = [OptimizerState.for_params(ae.encoder, lr=3e-3), OptimizerState.for_params(ae.decoder, lr=3e-3)]
for step in range(1500):
    code, ce = forward(ae.encoder, data)
    rec, cd = forward(ae.decoder, code)
    gd, dcode = backward(ae.decoder, cd, 2 * (rec - data) / len(data))
    ge, _ = backward(ae.encoder, ce, dcode)
    adam_step(ae.encoder, ge, opts[0])
    adam_step(ae.decoder, gd, opts[1])
print("code width:", encode(ae, data).shape[1])
print("reconstruction MSE:", float(np.mean((decode(ae, encode(ae, data)) - data) ** 2)),
      "data variance:", float(data.var()))
