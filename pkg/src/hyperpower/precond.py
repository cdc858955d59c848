"""Block-diagonal Stokes preconditioners improved by hyper-power (Schulz) updates.

A single update maps an approximate inverse ``X`` of ``Ã`` to
``2X - X Ã X``; ``Ã`` is only ever applied, never inverted. Starting from
the fast-diagonalization velocity preconditioner ``P_{V,0}`` and the
pressure mass preconditioner ``P_{Q,0}``, the module builds

* ``P_{V,k}``: updates against the exact velocity block ``A``;
* ``P̂_{Q,k}``: updates against ``Bᵀ P_{V,l}^{-1} B``, with ``l = 0`` for
  the first update and ``l = k`` afterwards ("inner updates");
* ``P_{Q,k}``: updates against the fixed ``Bᵀ P_{V,0}^{-1} B``;
* ``P̄_{Q,k}``: updates against the exact ``Bᵀ A^{-1} B`` (dense, desk scale).

All sequences are returned as lists of inverse-preconditioner operators,
index ``j`` holding level ``j``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .krylov import lanczos_extremes
from .linop import (BlockOperator, DimensionError, LinearOperator, ProductOperator, ScaledOperator,
                    block_diag, materialize)
from .stokes import StokesSystem
from .tensorkron import KronCholeskySolve, fastdiag_build

DENSE_LIMIT = 5000
LANCZOS_ITERS = 30


class HyperPowerOperator(LinearOperator):
    """``v ↦ 2 X v - X Ã X v`` for an approximate inverse ``X`` of ``Ã``."""

    def __init__(self, pinv: LinearOperator, atilde: LinearOperator, name: str | None = None):
        n = pinv.shape[0]
        if pinv.shape != (n, n) or atilde.shape != (n, n):
            raise DimensionError("hyper-power update needs conforming square operators")
        self.pinv = pinv
        self.atilde = atilde
        self.level = level_of(pinv) + 1
        super().__init__((n, n), flops=2 * pinv.flops + atilde.flops,
                         name=name or f"HyperPower[{self.level}]")

    def _apply(self, v):
        y = self.pinv.apply(v)
        return 2.0 * y - self.pinv.apply(self.atilde.apply(y))

    def children(self):
        return (self.pinv, self.atilde)


def level_of(op: LinearOperator) -> int:
    return getattr(op, "level", 0)


def hyperpower_step(pinv: LinearOperator, atilde: LinearOperator) -> HyperPowerOperator:
    return HyperPowerOperator(pinv, atilde)


def neumann_apply(p0inv: LinearOperator, atilde: LinearOperator, order: int, v) -> np.ndarray:
    """``Σ_{j<order} (I - X Ã)^j X v`` evaluated by a Horner recurrence, ``X = p0inv``."""
    if order < 1 or order & (order - 1):
        raise ValueError(f"order must be a power of two, got {order}")
    y = p0inv.apply(np.asarray(v, dtype=float))
    s = y.copy()
    for _ in range(order - 1):
        s = y + s - p0inv.apply(atilde.apply(s))
    return s


def check_initial_spectrum(p0inv: LinearOperator, atilde: LinearOperator, iters: int = LANCZOS_ITERS,
                           label: str = "") -> tuple[float, float]:
    """Lanczos estimate of the extreme eigenvalues of ``p0inv @ atilde``; warns outside (0, 2)."""
    lo, hi = lanczos_extremes(p0inv, atilde, iters)
    if not (0.0 < lo and hi < 2.0):
        warnings.warn(
            f"{label or 'initial preconditioner'}: estimated spectrum [{lo:.4g}, {hi:.4g}] is not inside (0, 2); "
            "hyper-power updates may diverge or lose definiteness (consider omega scaling)",
            RuntimeWarning, stacklevel=3,
        )
    return lo, hi


def make_PV0(system: StokesSystem, omega: float = 1.0) -> BlockOperator:
    """Inverse of the block-diagonal part of ``A`` by fast diagonalization, optionally scaled by ω."""
    blocks = []
    for c in range(3):
        diag = system.A.blocks[c][c]                   # ν * Kronecker sum
        solver = fastdiag_build(diag.op)
        blocks.append(ScaledOperator(omega / diag.alpha, solver))
    op = block_diag(blocks, name="PV0inv")
    return op


def make_PQ0(system: StokesSystem, omega: float = 1.0) -> LinearOperator:
    """``ν (M̌₃ ⊗ M̌₂ ⊗ M̌₁)^{-1}``, the inverse of the ``1/ν``-scaled pressure mass matrix."""
    mc = system.mats.Mc
    return ScaledOperator(omega * system.nu, KronCholeskySolve([mc, mc, mc], name="MassSolve"))


def schur_approx(system: StokesSystem, pvinv: LinearOperator, name: str = "Schur") -> ProductOperator:
    """``Bᵀ X B`` for an approximate velocity inverse ``X``."""
    op = ProductOperator([system.Bt, pvinv, system.B])
    op.name = name
    return op


def build_sequence_V(system: StokesSystem, k: int, p0inv: LinearOperator | None = None,
                     check: bool = True) -> list[LinearOperator]:
    if k < 0:
        raise ValueError("k must be non-negative")
    seq = [p0inv if p0inv is not None else make_PV0(system)]
    if k >= 1 and check:
        check_initial_spectrum(seq[0], system.A, label="P_V0")
    for _ in range(k):
        seq.append(hyperpower_step(seq[-1], system.A))
    return seq


def inner_level(j: int) -> int:
    """Velocity level used inside the Schur approximation when building ``P̂_{Q,j}``."""
    return 0 if j == 1 else j


def build_sequence_Q_hat(system: StokesSystem, seq_v: list, k: int, p0inv: LinearOperator | None = None,
                         check: bool = True) -> list[LinearOperator]:
    needed = max((inner_level(j) for j in range(1, k + 1)), default=0)
    if len(seq_v) <= needed:
        raise ValueError(f"velocity sequence must reach level {needed}")
    seq = [p0inv if p0inv is not None else make_PQ0(system)]
    for j in range(1, k + 1):
        atilde = schur_approx(system, seq_v[inner_level(j)], name=f"BtPV{inner_level(j)}B")
        if j == 1 and check:
            check_initial_spectrum(seq[0], atilde, label="P_Q0")
        seq.append(hyperpower_step(seq[-1], atilde))
    return seq


def build_sequence_Q_fixed(system: StokesSystem, k: int, pv0inv: LinearOperator | None = None,
                           p0inv: LinearOperator | None = None, check: bool = True) -> list[LinearOperator]:
    pv0inv = pv0inv if pv0inv is not None else make_PV0(system)
    atilde = schur_approx(system, pv0inv, name="BtPV0B")
    seq = [p0inv if p0inv is not None else make_PQ0(system)]
    if k >= 1 and check:
        check_initial_spectrum(seq[0], atilde, label="P_Q0")
    for _ in range(k):
        seq.append(hyperpower_step(seq[-1], atilde))
    return seq


class DenseSolve(LinearOperator):
    """Cholesky-based ``A^{-1}`` of a dense SPD matrix."""

    def __init__(self, matrix, name: str = "DenseSolve"):
        matrix = np.asarray(matrix, dtype=float)
        self._chol = sla.cho_factor(matrix, lower=True)
        super().__init__(matrix.shape, flops=matrix.size, name=name)

    def _apply(self, x):
        return sla.cho_solve(self._chol, x)


def exact_schur(system: StokesSystem) -> ProductOperator:
    if system.n_V > DENSE_LIMIT:
        raise ValueError(f"exact Schur complement needs a dense factorization; n_V={system.n_V} > {DENSE_LIMIT}")
    ainv = DenseSolve(materialize(system.A), name="Ainv")
    return schur_approx(system, ainv, name="BtAinvB")


def build_sequence_Q_exact(system: StokesSystem, k: int, p0inv: LinearOperator | None = None,
                           check: bool = True) -> list[LinearOperator]:
    atilde = exact_schur(system)
    seq = [p0inv if p0inv is not None else make_PQ0(system)]
    if k >= 1 and check:
        check_initial_spectrum(seq[0], atilde, label="P_Q0")
    for _ in range(k):
        seq.append(hyperpower_step(seq[-1], atilde))
    return seq


def block_preconditioner(pvinv: LinearOperator, pqinv: LinearOperator) -> BlockOperator:
    return block_diag([pvinv, pqinv], name="Pinv")


def preconditioner_sequence(system: StokesSystem, k: int, schur: str = "hat", check: bool = True):
    """Block-diagonal inverse preconditioners for levels ``0..k`` with the chosen Schur variant."""
    seq_v = build_sequence_V(system, k, check=check)
    if schur == "hat":
        seq_q = build_sequence_Q_hat(system, seq_v, k, check=check)
    elif schur == "fixed":
        seq_q = build_sequence_Q_fixed(system, k, seq_v[0], check=check)
    elif schur == "exact":
        seq_q = build_sequence_Q_exact(system, k, check=check)
    else:
        raise ValueError(f"unknown Schur variant {schur!r}")
    return [block_preconditioner(v, q) for v, q in zip(seq_v, seq_q)]


@dataclass(frozen=True)
class CostModel:
    """Per-apply cost ``C_k = 2^k c_P + (2^k - 1) c_A`` of the level-k preconditioner."""

    c_P: float
    c_A: float
    k: int = 0

    @property
    def C_k(self) -> float:
        return 2 ** self.k * self.c_P + (2 ** self.k - 1) * self.c_A


def cost_estimate(model: CostModel) -> tuple[float, float]:
    """``(C_k, C_k / c_P)``."""
    return model.C_k, model.C_k / model.c_P


# fast diagonalization = 6 and velocity block = 15 three-factor Kronecker
# products per apply, each on one of three components of size N/3
KRONECKER_COUNT_MODEL = CostModel(c_P=6 * 3 ** (-4 / 3), c_A=15 * 3 ** (-4 / 3))
