"""Tour of the autodiff core: tapes, gradients, and the finite-difference check.

Run: python3 demos/01_autodiff_basics.py
"""

import numpy as np

from hypermix.autodiff import (Tape, evaluate, finite_diff, gradient, matmul,
                               reduce_sum, relu)

# Build a tiny traced computation: sum(relu(x @ w))
rng = np.random.default_rng(0)
x = rng.normal(size=(3, 4))
w = rng.normal(size=(4, 2))

out, tape, (xv, wv) = evaluate(lambda a, b: reduce_sum(relu(matmul(a, b))), x, w)
print(f"forward value: {out.value[0, 0]:.6f}")
print(f"tape length:   {len(tape)} primitive records")

# Reverse sweep fills .grad on every traced variable
gradient(tape, out)
print(f"dL/dx shape:   {xv.grad.shape}, dL/dw shape: {wv.grad.shape}")

# Cross-check against the central-difference oracle
fd_x = finite_diff(lambda a: float(np.maximum(a @ w, 0.0).sum()), x, h=1e-5)
err = np.abs(xv.grad - fd_x).max()
print(f"max |analytic - finite difference| for x: {err:.2e}")
assert err < 1e-6

# A consumed tape refuses a second backward pass
try:
    gradient(tape, out)
except RuntimeError as exc:
    print(f"second backward correctly rejected: {exc}")
