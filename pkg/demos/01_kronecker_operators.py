"""Kronecker-structured operators: matvecs by contraction, fast diagonalization, flop counts.

Run: python3 demos/01_kronecker_operators.py
"""

import numpy as np

from hyperpower import GeneralizedKronSum, KroneckerOp, fastdiag_build, univariate_matrices

rng = np.random.default_rng(0)

# A three-factor product is never formed: each apply is three small matrix products.
factors = [rng.standard_normal((5, 5)) for _ in range(3)]
op = KroneckerOp(factors)
x = rng.standard_normal(op.shape[1])
dense = np.kron(factors[0], np.kron(factors[1], factors[2]))
print(f"kron matvec error vs dense: {np.linalg.norm(op.apply(x) - dense @ x):.2e}")

# Flop counts grow like N^(4/3) for equal factor sizes (N = n^3).
for n in (8, 16, 32, 64):
    flops = KroneckerOp([np.ones((n, n))] * 3).flops
    print(f"n={n:3d}  N={n ** 3:7d}  flops={flops:11d}  flops/N^(4/3)={flops / n ** 4:.1f}")

# Spline stiffness/mass pairs form a generalized Kronecker sum with a direct inverse.
mats = univariate_matrices(m=6, p=3)
ks = GeneralizedKronSum([(mats.K, mats.M)] * 3)
solver = fastdiag_build(ks)
b = rng.standard_normal(ks.shape[0])
print(f"fast diagonalization residual: {np.linalg.norm(ks.apply(solver.apply(b)) - b) / np.linalg.norm(b):.2e}")
