"""Tour of the float64 autograd core: tensors, the tape, and gradient checks.

Builds a small 3-D convolution graph, backpropagates, and compares every
gradient entry against central finite differences.
"""

import numpy as np

from ssal import autograd as ag
from ssal.autograd import Tape, Tensor, backprop

rng = np.random.default_rng(0)

# a tiny conv + sigmoid + mean pipeline
x = Tensor(rng.standard_normal((1, 2, 6, 6, 1)), requires_grad=True)  # [N,T,H,W,C]
k = Tensor(rng.standard_normal((2, 3, 3, 1, 3)) * 0.5, requires_grad=True)
b = Tensor(np.zeros(3), requires_grad=True)


def loss_fn():
    h = ag.relu(ag.bias_add(ag.conv3d_cl(x, k, (1, 1, 1), (0, 1, 1)), b))
    return ag.reduce(ag.square(h), "mean")


with Tape() as tape:
    loss = loss_fn()
print(f"loss = {loss.item():.6f}  ({len(tape.records)} recorded ops)")

backprop(loss, tape)
print(f"dL/dk shape {k.grad.shape}, dL/db = {np.round(b.grad, 5)}")

# finite-difference check on the bias
h = 1e-6
for i in range(3):
    old = b.data[i]
    b.data[i] = old + h
    up = loss_fn().item()
    b.data[i] = old - h
    down = loss_fn().item()
    b.data[i] = old
    fd = (up - down) / (2 * h)
    print(f"b[{i}]: analytic {b.grad[i]:+.8f}  finite-diff {fd:+.8f}  "
          f"rel err {abs(b.grad[i]-fd)/max(1,abs(fd)):.2e}")
