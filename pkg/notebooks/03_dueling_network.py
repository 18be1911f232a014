"""
The dueling network
===================

A small ReLU trunk feeds a scalar value head and a per-action advantage head.
The two are combined with the advantage mean subtracted, which makes the
split identifiable. Gradients are written out by hand and checked against
central differences.
"""
import numpy as np

from uavspeed.network import (NetArchitecture, combine, forward, grad_check, init_params,
                              loss_and_gradient, sgd_step)

print(combine(2.0, [1.0, 2.0, 3.0]))
print(combine(2.0, [11.0, 12.0, 13.0]), "(shifting every advantage changes nothing)")

###############################################################################
# Forward pass and finite-difference check

arch = NetArchitecture(hidden=(64, 64))
params = init_params(arch, seed=0)
X = np.random.default_rng(0).uniform(-1, 1, (5, 3))
q, _ = forward(params, X)
print("Q-values for five random feature vectors:\n", q.round(4))

errors = grad_check(NetArchitecture(hidden=(16, 16)), draws=5, batch_size=4)
print("max relative gradient error per draw:", np.array(errors))

###############################################################################
# Fitting a few targets
# ---------------------

actions, targets = np.array([0, 1, 2, 0, 1]), np.array([14.0, 13.5, 13.0, 14.5, 12.0])
for it in range(41):
    loss, grad = loss_and_gradient(params, X, actions, targets)
    if it % 10 == 0:
        print(f"iteration {it:>3}: loss {loss:.5f}")
    params = sgd_step(params, grad, 0.002)
