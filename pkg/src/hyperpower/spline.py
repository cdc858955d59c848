"""Univariate B-splines on uniform open knot vectors and their Galerkin matrices.

Two flavours of basis are used:

* ``"N"``: ordinary B-splines ``N_{i,p}`` of degree ``p`` (partition of unity),
* ``"M"``: B-splines of degree ``p - 1`` rescaled to unit integral,
  ``M_i = N_{i,p-1} / ∫ N_{i,p-1}``.

With these, ``d/dx Σ α_i N_{i,p} = Σ (D_n α)_i M_{i,p-1}`` where ``D_n`` is
the first-difference matrix (:func:`difference_matrix`).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

KINDS = ("M", "K", "C", "Mcheck", "Kcheck", "Ccheck", "Ncheck", "Bcheck")


@dataclass(frozen=True)
class KnotVector:
    """Open uniform knot vector on [0, 1] with maximal regularity."""

    m: int
    degree: int

    def __post_init__(self):
        if self.m < 1:
            raise ValueError(f"need at least one element, got m={self.m}")
        if self.degree < 0:
            raise ValueError(f"degree must be non-negative, got {self.degree}")

    @property
    def breakpoints(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.m + 1)

    @property
    def knots(self) -> np.ndarray:
        p = self.degree
        return np.concatenate([np.zeros(p), self.breakpoints, np.ones(p)])

    @property
    def n(self) -> int:
        return self.m + self.degree

    @property
    def h(self) -> float:
        return 1.0 / self.m


def _find_span(t: np.ndarray, p: int, n: int, x: float) -> int:
    if x >= t[n]:
        return n - 1
    if x <= t[p]:
        return p
    return int(np.searchsorted(t, x, side="right") - 1)


def _cox_de_boor(t: np.ndarray, p: int, span: int, x: float) -> np.ndarray:
    """Values of the p+1 non-zero ``N_{span-p..span, p}(x)`` (triangular recursion)."""
    vals = np.zeros(p + 1)
    vals[0] = 1.0
    left = np.zeros(p + 1)
    right = np.zeros(p + 1)
    for j in range(1, p + 1):
        left[j] = x - t[span + 1 - j]
        right[j] = t[span + j] - x
        saved = 0.0
        for r in range(j):
            tmp = vals[r] / (right[r + 1] + left[j - r])
            vals[r] = saved + right[r + 1] * tmp
            saved = left[j - r] * tmp
        vals[j] = saved
    return vals


def _cox_de_boor_deriv(t: np.ndarray, p: int, span: int, x: float) -> np.ndarray:
    """First derivatives of the p+1 non-zero ``N_{span-p..span, p}`` at x."""
    if p == 0:
        return np.zeros(1)
    low = _cox_de_boor(t, p - 1, span, x)   # N_{span-p+1..span, p-1}
    ders = np.zeros(p + 1)
    for a in range(p + 1):
        i = span - p + a
        if a >= 1:
            ders[a] += p * low[a - 1] / (t[i + p] - t[i])
        if a <= p - 1:
            ders[a] -= p * low[a] / (t[i + p + 1] - t[i + 1])
    return ders


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss–Legendre rule with ``q`` points on each of ``m`` uniform elements."""

    m: int
    q: int
    points: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)


def gauss_rule(m: int, q: int) -> QuadratureRule:
    x, w = np.polynomial.legendre.leggauss(q)
    h = 1.0 / m
    left = np.arange(m)[:, None] * h
    pts = left + 0.5 * h * (x[None, :] + 1.0)
    wts = np.broadcast_to(0.5 * h * w, (m, q))
    return QuadratureRule(m, q, pts.ravel(), wts.ravel().copy())


class UnivariateBasis:
    """B-spline basis of kind ``"N"`` (degree p) or ``"M"`` (degree p-1, unit integrals).

    ``restrict_boundary`` drops the first and last function; the remaining
    functions vanish at both ends of the interval.
    """

    def __init__(self, m: int, p: int, kind: str = "N", restrict_boundary: bool = False):
        if m < 1 or p < 1:
            raise ValueError(f"need m >= 1 and p >= 1, got m={m}, p={p}")
        if kind not in ("N", "M"):
            raise ValueError(f"unknown basis kind {kind!r}")
        self.m, self.p, self.kind = m, p, kind
        self.restrict_boundary = restrict_boundary
        self.knotvector = KnotVector(m, p if kind == "N" else p - 1)
        self.degree = self.knotvector.degree
        self._t = self.knotvector.knots
        self._nfull = self.knotvector.n
        self.integrals = None
        if kind == "M":
            rule = gauss_rule(m, self.degree + 1)
            full = self._collocate_full(rule.points, 0)
            self.integrals = rule.weights @ full
        self._offset = 1 if restrict_boundary else 0
        self.n = self._nfull - 2 * self._offset
        if self.n < 1:
            raise ValueError("boundary restriction leaves an empty basis")

    def __repr__(self):
        r = ", restricted" if self.restrict_boundary else ""
        return f"UnivariateBasis(kind={self.kind}, m={self.m}, degree={self.degree}, n={self.n}{r})"

    @property
    def h(self) -> float:
        return 1.0 / self.m

    def _local(self, x: float, deriv: int):
        t, q = self._t, self.degree
        span = _find_span(t, q, self._nfull, x)
        if deriv == 0:
            vals = _cox_de_boor(t, q, span, x)
        elif deriv == 1:
            vals = _cox_de_boor_deriv(t, q, span, x)
        else:
            raise ValueError("only derivative orders 0 and 1 are supported")
        first = span - q
        if self.integrals is not None:
            vals = vals / self.integrals[first:first + q + 1]
        return first, vals

    def evaluate(self, x: float, deriv: int = 0):
        """Active functions at ``x``: ``(first index, values)`` in this basis' numbering."""
        if not 0.0 <= x <= 1.0:
            raise ValueError(f"x={x} outside [0, 1]")
        first, vals = self._local(float(x), deriv)
        first -= self._offset
        lo = max(0, -first)
        hi = min(vals.size, self.n - first)
        return first + lo, vals[lo:hi]

    def _collocate_full(self, points, deriv):
        out = np.zeros((len(points), self._nfull))
        for r, x in enumerate(points):
            first, vals = self._local(float(x), deriv)
            out[r, first:first + vals.size] = vals
        return out

    def collocation(self, points, deriv: int = 0) -> np.ndarray:
        """Dense ``(len(points), n)`` matrix of basis values or first derivatives."""
        full = self._collocate_full(np.atleast_1d(points), deriv)
        return full[:, self._offset:self._offset + self.n]


def make_basis(m: int, p: int, kind: str = "N", restrict_boundary: bool = False) -> UnivariateBasis:
    return UnivariateBasis(m, p, kind, restrict_boundary)


def eval_basis(basis: UnivariateBasis, x: float, derivative_order: int = 0):
    return basis.evaluate(x, derivative_order)


def difference_matrix(n: int) -> np.ndarray:
    """The (n-1) x n first-difference matrix, rows ``(-1, 1)``."""
    if n < 2:
        raise ValueError("difference matrix needs n >= 2")
    d = np.zeros((n - 1, n))
    idx = np.arange(n - 1)
    d[idx, idx] = -1.0
    d[idx, idx + 1] = 1.0
    return d


# (test kind, trial kind, test derivative, trial derivative) per volume integral
_VOLUME = {
    "M": ("N", "N", 0, 0),
    "K": ("N", "N", 1, 1),
    "C": ("N", "M", 0, 1),
    "Mcheck": ("M", "M", 0, 0),
    "Kcheck": ("M", "M", 1, 1),
    "Ccheck": ("N", "M", 1, 0),
}


def assemble_univariate(test: UnivariateBasis, trial: UnivariateBasis, kind: str,
                        rule: QuadratureRule | None = None) -> np.ndarray:
    """One of the univariate matrices, ``out[i, j]`` pairing test ``i`` with trial ``j``.

    Volume kinds are integrated with ``rule`` (default: ``p + 1`` Gauss points
    per element, exact for every integrand here). ``Ncheck`` and ``Bcheck``
    are the boundary evaluations ``M_i(1)M_j(1) + M_i(0)M_j(0)`` and
    ``M_i(1)M_j'(1) - M_i(0)M_j'(0)``.
    """
    if kind in ("Ncheck", "Bcheck"):
        if test.kind != "M" or trial.kind != "M":
            raise ValueError(f"{kind} is defined on M-bases")
        ends = np.array([0.0, 1.0])
        v_test = test.collocation(ends, 0)
        v_trial = trial.collocation(ends, 0 if kind == "Ncheck" else 1)
        sign = np.array([1.0, 1.0]) if kind == "Ncheck" else np.array([-1.0, 1.0])
        return (v_test * sign[:, None]).T @ v_trial
    if kind not in _VOLUME:
        raise ValueError(f"unknown matrix kind {kind!r}; expected one of {KINDS}")
    k_test, k_trial, d_test, d_trial = _VOLUME[kind]
    if test.kind != k_test or trial.kind != k_trial:
        raise ValueError(f"{kind} expects ({k_test}, {k_trial}) bases, got ({test.kind}, {trial.kind})")
    if test.m != trial.m:
        raise ValueError("test and trial bases live on different meshes")
    degree = (test.degree - d_test) + (trial.degree - d_trial)
    if rule is None:
        rule = gauss_rule(test.m, max(test.degree, trial.degree) + 1)
    if rule.m != test.m:
        raise ValueError("quadrature rule built for a different mesh")
    if 2 * rule.q - 1 < degree:
        raise ValueError(
            f"{rule.q}-point Gauss rule integrates degree {2 * rule.q - 1} exactly, integrand has degree {degree}"
        )
    a = test.collocation(rule.points, d_test)
    b = trial.collocation(rule.points, d_trial)
    return (a * rule.weights[:, None]).T @ b


def build_T(kcheck, ncheck, bcheck, c_pen: float, h: float) -> np.ndarray:
    """Nitsche-augmented matrix ``½(Ǩ + (2 C_pen / h) Ň - B̌ - B̌ᵀ)``; checked SPD."""
    if c_pen <= 0 or h <= 0:
        raise ValueError("C_pen and h must be positive")
    kcheck, ncheck, bcheck = (np.asarray(a, dtype=float) for a in (kcheck, ncheck, bcheck))
    t = 0.5 * (kcheck + (2.0 * c_pen / h) * ncheck - bcheck - bcheck.T)
    t = 0.5 * (t + t.T)
    try:
        sla.cholesky(t, lower=True)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(
            f"Nitsche matrix is not positive definite; penalty C_pen={c_pen} is likely too small"
        ) from exc
    return t


DEFAULT_PENALTY = 15.0


def default_penalty(p: int) -> float:
    """Nitsche constant used when none is given.

    15 for p ≤ 5, calibrated on the lid-driven cavity (smallest eigenvalue
    of the initially preconditioned velocity block ≈ 0.72 at m=2, p=4).
    Grows like p²/2 beyond that; the positive-definiteness threshold of
    ``Ť`` grows like p²/4.
    """
    return max(DEFAULT_PENALTY, 0.5 * p * p)


@dataclass(frozen=True)
class UnivariateMatrices:
    """All univariate matrices of one direction.

    ``M, K`` live on the boundary-restricted N-basis, ``Mc, Kc, Nc, Bc, T`` on
    the M-basis; ``C`` and ``Cc`` are (restricted N) x (M).
    """

    nbasis: UnivariateBasis
    mbasis: UnivariateBasis
    M: np.ndarray
    K: np.ndarray
    C: np.ndarray
    Mc: np.ndarray
    Kc: np.ndarray
    Cc: np.ndarray
    Nc: np.ndarray
    Bc: np.ndarray
    T: np.ndarray
    c_pen: float


def univariate_matrices(m: int, p: int, c_pen: float | None = None) -> UnivariateMatrices:
    if c_pen is None:
        c_pen = default_penalty(p)
    nb = make_basis(m, p, "N", restrict_boundary=True)
    mb = make_basis(m, p, "M")
    rule = gauss_rule(m, p + 1)
    mats = {k: assemble_univariate(*(pair), k, rule) for k, pair in {
        "M": (nb, nb), "K": (nb, nb), "C": (nb, mb),
        "Mcheck": (mb, mb), "Kcheck": (mb, mb), "Ccheck": (nb, mb),
        "Ncheck": (mb, mb), "Bcheck": (mb, mb),
    }.items()}
    t = build_T(mats["Kcheck"], mats["Ncheck"], mats["Bcheck"], c_pen, 1.0 / m)
    return UnivariateMatrices(
        nb, mb, mats["M"], mats["K"], mats["C"], mats["Mcheck"], mats["Kcheck"],
        mats["Ccheck"], mats["Ncheck"], mats["Bcheck"], t, float(c_pen),
    )
