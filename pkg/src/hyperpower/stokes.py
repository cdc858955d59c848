"""Kronecker-structured saddle-point system for Stokes flow in the unit cube.

Velocity component ``c`` is spanned by restricted degree-``p`` B-splines in
direction ``c`` and unit-integral degree-``p-1`` splines in the two other
directions; the pressure uses the latter in all three directions. Dropping
the first and last B-spline in the normal direction imposes ``u·n = 0``
strongly; the tangential no-slip and lid conditions enter through Nitsche
terms with ``α = C_pen / h``.

Scaling: the velocity block is ``A = ½ (a + σ)`` so that its diagonal
blocks are exactly ``ν`` times the generalized Kronecker sums
``Ť₃ ⊕̂ Ť₂ ⊕̂ K₁`` etc., and the right-hand side is halved accordingly.
The coupling block is ``B_{ij} = ∫ div(v_i) q_j``. The unknown pressure
``p̃`` of ``[[A, B], [Bᵀ, 0]]`` relates to the physical pressure by
``p = -2 p̃``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linop import BlockOperator, DimensionError, LinearOperator, ScaledOperator, transpose_block
from .spline import UnivariateBasis, UnivariateMatrices, default_penalty, univariate_matrices
from .tensorkron import GeneralizedKronSum, KroneckerOp

DIM = 3


@dataclass(frozen=True)
class StokesSpace:
    """Raviart–Thomas-type spline spaces on a uniform ``m^3`` grid with degree ``p``."""

    m: int
    p: int
    nbasis: UnivariateBasis = field(repr=False)
    mbasis: UnivariateBasis = field(repr=False)

    @property
    def n_N(self) -> int:
        return self.nbasis.n

    @property
    def n_M(self) -> int:
        return self.mbasis.n

    def component_dims(self, c: int) -> tuple[int, int, int]:
        """Per-direction sizes ``(n_1, n_2, n_3)`` of velocity component ``c`` (0-based)."""
        return tuple(self.n_N if j == c else self.n_M for j in range(DIM))

    @property
    def pressure_dims(self) -> tuple[int, int, int]:
        return (self.n_M,) * DIM

    @property
    def component_sizes(self) -> list[int]:
        return [int(np.prod(self.component_dims(c))) for c in range(DIM)]

    @property
    def n_V(self) -> int:
        return sum(self.component_sizes)

    @property
    def n_Q(self) -> int:
        return self.n_M ** DIM

    def velocity_slices(self) -> list[slice]:
        offs = np.concatenate([[0], np.cumsum(self.component_sizes)])
        return [slice(int(offs[c]), int(offs[c + 1])) for c in range(DIM)]


def build_space(m: int, p: int) -> StokesSpace:
    from .spline import make_basis

    if m < 2 or p < 2:
        raise ValueError(f"Stokes space needs m >= 2 and p >= 2, got m={m}, p={p}")
    return StokesSpace(m, p, make_basis(m, p, "N", restrict_boundary=True), make_basis(m, p, "M"))


def _kron_vec(vectors_by_direction) -> np.ndarray:
    """``v_3 ⊗ v_2 ⊗ v_1`` for per-direction vectors listed as ``(v_1, v_2, v_3)``."""
    out = np.ones(1)
    for v in vectors_by_direction[::-1]:
        out = np.kron(out, v)
    return out


def assemble_A(space: StokesSpace, nu: float, mats: UnivariateMatrices) -> BlockOperator:
    """Velocity block: ν-scaled Kronecker sums on the diagonal, ν/2-scaled products off it."""
    blocks = [[None] * DIM for _ in range(DIM)]
    for c in range(DIM):
        terms = [(mats.K, mats.M) if j == c else (mats.T, mats.Mc) for j in range(DIM)]
        blocks[c][c] = ScaledOperator(nu, GeneralizedKronSum(terms, name=f"A{c+1}{c+1}"))
    for r in range(DIM):
        for c in range(r + 1, DIM):
            fwd = [mats.C if j == r else mats.C.T if j == c else mats.Mc for j in range(DIM)]
            kop = KroneckerOp(fwd[::-1], name=f"A{r+1}{c+1}")
            blocks[r][c] = ScaledOperator(0.5 * nu, kop)
            blocks[c][r] = ScaledOperator(0.5 * nu, kop.T)
    return BlockOperator(blocks, name="A")


def assemble_B(space: StokesSpace, mats: UnivariateMatrices) -> BlockOperator:
    """Pressure-to-velocity coupling, one Kronecker product per velocity component."""
    blocks = []
    for c in range(DIM):
        fwd = [mats.Cc if j == c else mats.Mc for j in range(DIM)]
        blocks.append([KroneckerOp(fwd[::-1], name=f"B{c+1}")])
    return BlockOperator(blocks, name="B")


def assemble_rhs_lid(space: StokesSpace, nu: float, c_pen: float, lid_velocity=(1.0, 0.0, 0.0),
                     lid_axis: int = 3) -> np.ndarray:
    """Nitsche data for a moving lid on the face ``x_{lid_axis} = 1``.

    For a velocity test function ``v = e_c φ`` this is
    ``ν ∫_lid α g·v - ((∇ˢv) n)·g ds``, i.e. half of the symmetric Nitsche
    data term, consistent with ``A = ½ (a + σ)``.
    """
    g = np.asarray(lid_velocity, dtype=float)
    if g.shape != (DIM,):
        raise DimensionError("lid velocity must have three components")
    a = lid_axis - 1
    if not 0 <= a < DIM:
        raise ValueError(f"lid_axis must be 1, 2 or 3, got {lid_axis}")
    if g[a] != 0.0:
        raise ValueError("lid velocity must be tangential to the lid; normal data is imposed strongly")
    alpha = c_pen * space.m
    one = np.array([1.0])
    parts = []
    for c in range(DIM):
        bases = [space.nbasis if j == c else space.mbasis for j in range(DIM)]
        integ = [_integrals(b) for b in bases]
        val1 = [b.collocation(one, 0)[0] for b in bases]
        der1 = [b.collocation(one, 1)[0] for b in bases]
        f = np.zeros(int(np.prod([b.n for b in bases])))
        if c != a and g[c] != 0.0:
            vecs = [alpha * val1[j] - 0.5 * der1[j] if j == a else integ[j] for j in range(DIM)]
            f += g[c] * _kron_vec(vecs)
        if c == a:
            for i in range(DIM):
                if i == a or g[i] == 0.0:
                    continue
                vecs = [val1[j] if j == a else _deriv_integrals(bases[j]) if j == i else integ[j]
                        for j in range(DIM)]
                f -= 0.5 * g[i] * _kron_vec(vecs)
        parts.append(nu * f)
    return np.concatenate(parts)


def _integrals(basis: UnivariateBasis) -> np.ndarray:
    from .spline import gauss_rule

    rule = gauss_rule(basis.m, basis.degree + 1)
    return rule.weights @ basis.collocation(rule.points, 0)


def _deriv_integrals(basis: UnivariateBasis) -> np.ndarray:
    ends = basis.collocation(np.array([0.0, 1.0]), 0)
    return ends[1] - ends[0]


@dataclass
class StokesSystem:
    """Assembled saddle-point system ``[[A, B], [Bᵀ, 0]] (u, p̃) = (f, 0)``."""

    space: StokesSpace
    nu: float
    c_pen: float
    lid_axis: int
    lid_velocity: tuple
    mats: UnivariateMatrices = field(repr=False)
    A: BlockOperator = field(repr=False)
    B: BlockOperator = field(repr=False)
    rhs: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.Bt = transpose_block(self.B, lambda op: op.T)
        self.saddle = BlockOperator([[self.A, self.B], [self.Bt, None]], name="Saddle")

    @property
    def n_V(self) -> int:
        return self.space.n_V

    @property
    def n_Q(self) -> int:
        return self.space.n_Q

    @property
    def size(self) -> int:
        return self.n_V + self.n_Q

    @property
    def full_rhs(self) -> np.ndarray:
        return np.concatenate([self.rhs, np.zeros(self.n_Q)])

    def apply_saddle(self, z) -> np.ndarray:
        return self.saddle.apply(z)

    def split(self, z):
        z = np.asarray(z)
        return z[:self.n_V], z[self.n_V:]

    def constant_pressure(self) -> np.ndarray:
        """Coefficients of the pressure ``q ≡ 1`` in the unit-integral basis."""
        w = self.space.mbasis.integrals
        return _kron_vec([w, w, w])

    def normalize_pressure(self, pressure) -> tuple[np.ndarray, float]:
        """Shift the pressure to zero mean; returns the shifted coefficients and the shift."""
        # every unit-integral basis function integrates to one over the unit cube
        mean = float(np.sum(pressure))
        return pressure - mean * self.constant_pressure(), mean


def assemble_stokes(m: int, p: int, nu: float = 1.0, c_pen: float | None = None,
                    lid_velocity=(1.0, 0.0, 0.0), lid_axis: int = 3) -> StokesSystem:
    if nu <= 0:
        raise ValueError("viscosity must be positive")
    space = build_space(m, p)
    if c_pen is None:
        c_pen = default_penalty(p)
    mats = univariate_matrices(m, p, c_pen)
    A = assemble_A(space, nu, mats)
    B = assemble_B(space, mats)
    rhs = assemble_rhs_lid(space, nu, c_pen, lid_velocity, lid_axis)
    return StokesSystem(space, float(nu), float(c_pen), lid_axis, tuple(lid_velocity), mats, A, B, rhs)


def apply_saddle(system: StokesSystem, z) -> np.ndarray:
    return system.apply_saddle(z)


def apply_transpose_B(system: StokesSystem, u) -> np.ndarray:
    return system.Bt.apply(u)


def as_operator(system: StokesSystem) -> LinearOperator:
    return system.saddle
