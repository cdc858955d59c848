"""Matrix-free linear operators with apply counting and flop accounting.

Every operator in the package (Kronecker products, Stokes blocks,
preconditioners, Schur approximations) is a :class:`LinearOperator`. Two
pieces of bookkeeping travel with each one:

``flops``
    Multiply-add count of the tensor contractions performed by a single
    apply. Only contraction work is counted; O(N) vector updates (axpy,
    diagonal scaling) are not. This is the quantity the cost model
    ``C_k = 2^k c_P + (2^k - 1) c_A`` is stated in.
``ncalls``
    Number of times :meth:`LinearOperator.apply` has been invoked since the
    last :meth:`LinearOperator.reset_counts`.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np


class DimensionError(ValueError):
    """Raised when a vector or operator does not conform."""


class LinearOperator:
    """A square or rectangular linear map given by an apply function.

    Parameters
    ----------
    shape : (int, int)
        ``(range size, domain size)``.
    apply : callable, optional
        Function mapping a 1D array of length ``shape[1]`` to one of length
        ``shape[0]``. Subclasses override :meth:`_apply` instead.
    flops : int
        Contraction multiply-adds per apply.
    name : str
        Label used in reports.
    """

    def __init__(self, shape, apply: Callable | None = None, flops: int = 0, name: str = ""):
        self.shape = (int(shape[0]), int(shape[1]))
        self._fn = apply
        self.flops = int(flops)
        self.name = name or type(self).__name__
        self.ncalls = 0

    def _apply(self, x: np.ndarray) -> np.ndarray:
        if self._fn is None:
            raise NotImplementedError
        return self._fn(x)

    def apply(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim != 1 or x.shape[0] != self.shape[1]:
            raise DimensionError(
                f"{self.name}: expected vector of length {self.shape[1]}, got shape {x.shape}"
            )
        self.ncalls += 1
        return self._apply(x)

    __call__ = apply

    def matvec(self, x):
        return self.apply(x)

    def reset_counts(self):
        self.ncalls = 0
        for child in self.children():
            child.reset_counts()

    def children(self) -> Sequence["LinearOperator"]:
        return ()

    def __repr__(self):
        return f"<{self.name} {self.shape[0]}x{self.shape[1]} flops={self.flops}>"

    def __add__(self, other):
        return SumOperator([self, other])

    def __rmul__(self, alpha):
        return ScaledOperator(float(alpha), self)

    def __matmul__(self, other):
        return ProductOperator([self, other])


class IdentityOperator(LinearOperator):
    def __init__(self, n: int):
        super().__init__((n, n), name="Identity")

    def _apply(self, x):
        return x.copy()


class MatrixOperator(LinearOperator):
    """Dense matrix wrapped as an operator (desk-scale and tests only)."""

    def __init__(self, matrix, name: str = "Matrix"):
        self.matrix = np.asarray(matrix, dtype=float)
        if self.matrix.ndim != 2:
            raise DimensionError("matrix must be 2D")
        super().__init__(self.matrix.shape, flops=self.matrix.size, name=name)

    def _apply(self, x):
        return self.matrix @ x


class ScaledOperator(LinearOperator):
    def __init__(self, alpha: float, op: LinearOperator):
        self.alpha = float(alpha)
        self.op = op
        super().__init__(op.shape, flops=op.flops, name=f"{alpha:g}*{op.name}")

    def _apply(self, x):
        return self.alpha * self.op.apply(x)

    def children(self):
        return (self.op,)


class SumOperator(LinearOperator):
    def __init__(self, ops: Sequence[LinearOperator]):
        ops = list(ops)
        shape = ops[0].shape
        if any(op.shape != shape for op in ops):
            raise DimensionError("summands must share a shape")
        self.ops = ops
        super().__init__(shape, flops=sum(op.flops for op in ops), name="Sum")

    def _apply(self, x):
        y = self.ops[0].apply(x)
        for op in self.ops[1:]:
            y += op.apply(x)
        return y

    def children(self):
        return tuple(self.ops)


class ProductOperator(LinearOperator):
    """Composition ``ops[0] @ ops[1] @ ... @ ops[-1]`` (rightmost applied first)."""

    def __init__(self, ops: Sequence[LinearOperator]):
        ops = list(ops)
        for left, right in zip(ops[:-1], ops[1:]):
            if left.shape[1] != right.shape[0]:
                raise DimensionError(f"cannot compose {left.name} with {right.name}")
        self.ops = ops
        super().__init__(
            (ops[0].shape[0], ops[-1].shape[1]),
            flops=sum(op.flops for op in ops),
            name="@".join(op.name for op in ops),
        )

    def _apply(self, x):
        for op in reversed(self.ops):
            x = op.apply(x)
        return x

    def children(self):
        return tuple(self.ops)


class BlockOperator(LinearOperator):
    """Block matrix of operators; ``None`` entries are zero blocks.

    Row and column block sizes are inferred from the non-empty blocks.
    """

    def __init__(self, blocks: Sequence[Sequence[LinearOperator | None]], name: str = "Block"):
        self.blocks = [list(row) for row in blocks]
        nrows, ncols = len(self.blocks), len(self.blocks[0])
        row_sizes = [None] * nrows
        col_sizes = [None] * ncols
        for i, row in enumerate(self.blocks):
            if len(row) != ncols:
                raise DimensionError("ragged block layout")
            for j, blk in enumerate(row):
                if blk is None:
                    continue
                for sizes, idx, size in ((row_sizes, i, blk.shape[0]), (col_sizes, j, blk.shape[1])):
                    if sizes[idx] is None:
                        sizes[idx] = size
                    elif sizes[idx] != size:
                        raise DimensionError(f"block ({i},{j}) does not conform")
        if None in row_sizes or None in col_sizes:
            raise DimensionError("every block row and column needs a non-empty block")
        self.row_sizes = row_sizes
        self.col_sizes = col_sizes
        self.row_offsets = np.concatenate([[0], np.cumsum(row_sizes)])
        self.col_offsets = np.concatenate([[0], np.cumsum(col_sizes)])
        flops = sum(b.flops for row in self.blocks for b in row if b is not None)
        super().__init__((self.row_offsets[-1], self.col_offsets[-1]), flops=flops, name=name)

    def _apply(self, x):
        xs = [x[self.col_offsets[j]:self.col_offsets[j + 1]] for j in range(len(self.col_sizes))]
        y = np.zeros(self.shape[0])
        for i, row in enumerate(self.blocks):
            yi = y[self.row_offsets[i]:self.row_offsets[i + 1]]
            for j, blk in enumerate(row):
                if blk is not None:
                    yi += blk.apply(xs[j])
        return y

    def children(self):
        return tuple(b for row in self.blocks for b in row if b is not None)


def block_diag(ops: Sequence[LinearOperator], name: str = "BlockDiag") -> BlockOperator:
    n = len(ops)
    return BlockOperator([[ops[i] if i == j else None for j in range(n)] for i in range(n)], name=name)


def transpose_block(op: BlockOperator, transpose: Callable[[LinearOperator], LinearOperator]) -> BlockOperator:
    """Block transpose, using ``transpose`` on each non-empty block."""
    rows = [[None] * len(op.blocks) for _ in op.blocks[0]]
    for i, row in enumerate(op.blocks):
        for j, blk in enumerate(row):
            if blk is not None:
                rows[j][i] = transpose(blk)
    return BlockOperator(rows, name=op.name + "^T")


def materialize(op: LinearOperator, limit: int = 5000) -> np.ndarray:
    """Dense matrix of ``op``, column by column from unit vectors."""
    rows, cols = op.shape
    if max(rows, cols) > limit:
        raise ValueError(f"refusing to materialize a {rows}x{cols} operator (limit {limit})")
    out = np.empty((rows, cols))
    e = np.zeros(cols)
    for j in range(cols):
        e[j] = 1.0
        out[:, j] = op.apply(e)
        e[j] = 0.0
    return out
