"""Kronecker product and generalized Kronecker sum operators.

Conventions
-----------
Factors are always listed as ``[D_d, ..., D_1]``, i.e. in the order they
appear in ``D_d ⊗ ... ⊗ D_1``. The flat vector index runs fastest over the
first direction::

    vec(X)_i = X[i_1, ..., i_d],   i = i_1 + (i_2 - 1) n_1 + ... (1-based)

which is exactly C-order reshaping of the vector to shape ``(n_d, ..., n_1)``
and also the layout produced by ``np.kron(D_d, ..., D_1)``.

Generalized Kronecker sums are stored per direction as pairs ``(A_k, M_k)``
listed for ``k = 1, ..., d`` and represent::

    A_1 ⊕̂ ... ⊕̂ A_d = Σ_k M_d ⊗ ... ⊗ A_k ⊗ ... ⊗ M_1
"""

from __future__ import annotations

from functools import reduce
from typing import Sequence

import numpy as np
import scipy.linalg as sla

from .linop import DimensionError, LinearOperator

SINGULAR_RTOL = 1e-12


class SingularOperatorError(np.linalg.LinAlgError):
    pass


def vec_index(multi_index: Sequence[int], dims: Sequence[int]) -> int:
    """1-based flat index of ``(i_1, ..., i_d)`` in an array of shape ``(n_1, ..., n_d)``.

    >>> vec_index((2, 3, 4), (2, 3, 4))
    24
    """
    if len(multi_index) != len(dims):
        raise IndexError("multi-index and dims differ in length")
    flat, stride = 1, 1
    for i, n in zip(multi_index, dims):
        if not 1 <= i <= n:
            raise IndexError(f"index {i} out of range 1..{n}")
        flat += (i - 1) * stride
        stride *= n
    return flat


def _as_matrix(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise DimensionError("Kronecker factors must be 2D")
    if not np.all(np.isfinite(a)):
        raise ValueError("Kronecker factor has non-finite entries")
    return a


def _sweep(x: np.ndarray, in_dims: Sequence[int], mats: Sequence[np.ndarray]) -> np.ndarray:
    """Apply ``mats[k]`` along direction ``k+1`` of the tensor ``x``.

    ``in_dims`` is ``(n_1, ..., n_d)`` and ``x`` is stored in C order as
    ``(n_d, ..., n_1)``. Each pass views the tensor as
    ``(outer, n_k, inner)`` and multiplies in place along the middle axis,
    so no transposed copies are made.
    """
    dims = list(in_dims)
    y = x
    for k, D in enumerate(mats):
        inner = int(np.prod(dims[:k]))
        outer = int(np.prod(dims[k + 1:]))
        if inner == 1:
            y = y.reshape(outer, dims[k]) @ D.T
        elif outer == 1:
            y = D @ y.reshape(dims[k], inner)
        else:
            y = np.matmul(D, y.reshape(outer, dims[k], inner))
        dims[k] = D.shape[0]
    return y.reshape(-1)


def _contraction_flops(rows: Sequence[int], cols: Sequence[int]) -> int:
    """Multiply-adds of the d-pass contraction with factors ``rows[k] x cols[k]`` (k = 1..d)."""
    flops = 0
    d = len(rows)
    for k in range(d):
        done = int(np.prod(rows[:k], dtype=np.int64))
        todo = int(np.prod(cols[k + 1:], dtype=np.int64))
        flops += rows[k] * cols[k] * done * todo
    return flops


def kron_dense(factors: Sequence[np.ndarray]) -> np.ndarray:
    return reduce(np.kron, [np.asarray(f, dtype=float) for f in factors])


class KroneckerOp(LinearOperator):
    """``D_d ⊗ ... ⊗ D_1`` applied by tensor contraction, never materialized."""

    def __init__(self, factors: Sequence, name: str = "Kron"):
        if len(factors) < 1:
            raise ValueError("need at least one factor")
        self.factors = [_as_matrix(f) for f in factors]
        # internal order: direction 1 first
        self._fwd = self.factors[::-1]
        rows = [f.shape[0] for f in self._fwd]
        cols = [f.shape[1] for f in self._fwd]
        self.row_dims, self.col_dims = tuple(rows), tuple(cols)
        shape = (int(np.prod(rows)), int(np.prod(cols)))
        super().__init__(shape, flops=_contraction_flops(rows, cols), name=name)

    @property
    def ndim(self):
        return len(self.factors)

    def _apply(self, x):
        return _sweep(x, self.col_dims, self._fwd)

    @property
    def T(self) -> "KroneckerOp":
        return KroneckerOp([f.T for f in self.factors], name=self.name + "^T")

    def todense(self) -> np.ndarray:
        return kron_dense(self.factors)


def kron_matvec(op: KroneckerOp, x) -> np.ndarray:
    return op.apply(x)


class GeneralizedKronSum(LinearOperator):
    """``A_1 ⊕̂ ... ⊕̂ A_d`` from per-direction pairs ``terms = [(A_1, M_1), ..., (A_d, M_d)]``."""

    def __init__(self, terms: Sequence[tuple], name: str = "KronSum"):
        self.terms = []
        for a, m in terms:
            a, m = _as_matrix(a), _as_matrix(m)
            if a.shape[0] != a.shape[1] or a.shape != m.shape:
                raise DimensionError("A_k and M_k must be square of equal size")
            self.terms.append((a, m))
        self.dims = tuple(a.shape[0] for a, _ in self.terms)   # (n_1, ..., n_d)
        d = len(self.terms)
        self.products = []
        for k in range(d):
            fwd = [self.terms[j][0] if j == k else self.terms[j][1] for j in range(d)]
            self.products.append(KroneckerOp(fwd[::-1]))
        n = int(np.prod(self.dims))
        super().__init__((n, n), flops=sum(p.flops for p in self.products), name=name)

    def _apply(self, x):
        y = self.products[0].apply(x)
        for p in self.products[1:]:
            y += p.apply(x)
        return y

    def children(self):
        return tuple(self.products)

    def todense(self) -> np.ndarray:
        return sum(p.todense() for p in self.products)


def kron_sum_apply(ksum: GeneralizedKronSum, x) -> np.ndarray:
    return ksum.apply(x)


class FastDiagSolver(LinearOperator):
    """Direct inverse of a generalized Kronecker sum by fast diagonalization.

    With ``M_k = L_k L_k^T`` and ``L_k^{-1} A_k L_k^{-T} = U_k Λ_k U_k^T``
    the transforms ``Ũ_k = L_k^{-T} U_k`` satisfy ``Ũ_k^T M_k Ũ_k = I`` and
    ``Ũ_k^T A_k Ũ_k = Λ_k``, hence

        (A_1 ⊕̂ ... ⊕̂ A_d)^{-1} = (Ũ_d ⊗ ... ⊗ Ũ_1) (Λ_1 ⊕ ... ⊕ Λ_d)^{-1} (Ũ_d ⊗ ... ⊗ Ũ_1)^T.
    """

    def __init__(self, transforms, eigenvalues, name: str = "FastDiag"):
        self.transforms = [np.asarray(u) for u in transforms]     # direction 1 first
        self.eigenvalues = [np.asarray(lam) for lam in eigenvalues]
        self.dims = tuple(u.shape[0] for u in self.transforms)
        # Λ_1 ⊕ ... ⊕ Λ_d laid out as (n_d, ..., n_1)
        grid = np.zeros(self.dims[::-1])
        d = len(self.dims)
        for k, lam in enumerate(self.eigenvalues):
            shape = [1] * d
            shape[d - 1 - k] = lam.size
            grid = grid + lam.reshape(shape)
        self.diagonal = grid.reshape(-1)
        scale = np.max(np.abs(self.diagonal))
        if scale == 0 or np.min(np.abs(self.diagonal)) <= SINGULAR_RTOL * scale:
            raise SingularOperatorError("generalized Kronecker sum is singular")
        self._inv_diag = 1.0 / self.diagonal
        self.forward = KroneckerOp([u.T for u in self.transforms[::-1]], name="U^T")
        self.backward = KroneckerOp(self.transforms[::-1], name="U")
        n = self.diagonal.size
        super().__init__((n, n), flops=self.forward.flops + self.backward.flops, name=name)

    def _apply(self, b):
        return self.backward.apply(self._inv_diag * self.forward.apply(b))

    def children(self):
        return (self.forward, self.backward)


def fastdiag_build(ksum: GeneralizedKronSum) -> FastDiagSolver:
    transforms, eigenvalues = [], []
    for k, (a, m) in enumerate(ksum.terms, start=1):
        if not np.allclose(a, a.T, rtol=0, atol=1e-12 * max(1.0, np.abs(a).max())):
            raise ValueError(f"A_{k} is not symmetric")
        try:
            low = sla.cholesky(m, lower=True)
        except np.linalg.LinAlgError as exc:
            raise np.linalg.LinAlgError(f"M_{k} is not symmetric positive definite") from exc
        tmp = sla.solve_triangular(low, a, lower=True)
        reduced = sla.solve_triangular(low, tmp.T, lower=True)   # L^{-1} A L^{-T}
        lam, u = np.linalg.eigh(0.5 * (reduced + reduced.T))
        transforms.append(sla.solve_triangular(low.T, u, lower=False))
        eigenvalues.append(lam)
    return FastDiagSolver(transforms, eigenvalues)


def fastdiag_solve(solver: FastDiagSolver, b) -> np.ndarray:
    return solver.apply(b)


class KronCholeskySolve(LinearOperator):
    """``(M_d ⊗ ... ⊗ M_1)^{-1}`` for SPD factors via per-direction Cholesky solves."""

    def __init__(self, factors: Sequence, name: str = "KronSolve"):
        self.factors = [_as_matrix(f) for f in factors]
        # explicit factor inverses from the Cholesky factors; one dense
        # contraction per direction, n_k^2 multiply-adds per fibre
        self._inv = []
        for f in self.factors[::-1]:
            c = sla.cho_factor(f, lower=True)
            self._inv.append(sla.cho_solve(c, np.eye(f.shape[0])))
        dims = [f.shape[0] for f in self.factors[::-1]]
        self.dims = tuple(dims)
        n = int(np.prod(dims))
        super().__init__((n, n), flops=_contraction_flops(dims, dims), name=name)

    def _apply(self, b):
        return _sweep(b, self.dims, self._inv)
