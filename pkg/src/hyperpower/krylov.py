"""Preconditioned MINRES and a preconditioned Lanczos extreme-eigenvalue estimate."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .linop import DimensionError, IdentityOperator, LinearOperator


class BreakdownError(ArithmeticError):
    pass


@dataclass
class SolveStats:
    n_iter: int = 0
    converged: bool = False
    residuals: list = field(default_factory=list)       # ‖r_j‖_{P^{-1}} / ‖r_0‖_{P^{-1}}
    true_residual: float = float("nan")                 # ‖b - A x‖ / ‖b‖ at exit
    n_matvec: int = 0
    n_precond: int = 0
    wall_time: float = 0.0


def _as_op(op, n):
    if op is None:
        return IdentityOperator(n)
    if isinstance(op, LinearOperator):
        return op
    return LinearOperator((n, n), apply=op)


def minres(op, b, precond=None, tol: float = 1e-8, maxit: int | None = None):
    """Solve ``op x = b`` for symmetric ``op`` with an SPD preconditioner ``precond ≈ op^{-1}``.

    Zero initial guess. Stops when the preconditioned residual norm
    ``‖r‖_{P^{-1}}`` has dropped by ``tol`` relative to its initial value.
    Returns ``(x, SolveStats)``.
    """
    b = np.asarray(b, dtype=float)
    n = b.size
    op = _as_op(op, n)
    precond = _as_op(precond, n)
    if op.shape != (n, n) or precond.shape != (n, n):
        raise DimensionError("operator, preconditioner and right-hand side do not conform")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if maxit is None:
        maxit = 10 * n
    stats = SolveStats()
    t0 = time.perf_counter()
    x = np.zeros(n)

    r1 = b.copy()
    y = precond.apply(r1)
    stats.n_precond += 1
    beta1 = float(r1 @ y)
    if not np.isfinite(beta1):
        raise FloatingPointError("non-finite value in preconditioned right-hand side")
    if beta1 < 0:
        raise ValueError("preconditioner is not positive definite")
    b_norm = float(np.linalg.norm(b))
    if beta1 == 0.0:
        stats.converged = True
        stats.true_residual = 0.0
        stats.residuals.append(0.0)
        stats.wall_time = time.perf_counter() - t0
        return x, stats
    beta1 = np.sqrt(beta1)
    stats.residuals.append(1.0)

    r2 = r1
    beta, oldb = beta1, 0.0
    dbar, epsln = 0.0, 0.0
    phibar = beta1
    cs, sn = -1.0, 0.0
    w = np.zeros(n)
    w2 = np.zeros(n)
    anorm = 0.0
    eps = np.finfo(float).eps

    for itn in range(1, maxit + 1):
        v = y / beta
        y = op.apply(v)
        stats.n_matvec += 1
        if itn >= 2:
            y -= (beta / oldb) * r1
        alfa = float(v @ y)
        y -= (alfa / beta) * r2
        r1, r2 = r2, y
        y = precond.apply(r2)
        stats.n_precond += 1
        oldb = beta
        beta2 = float(r2 @ y)
        if not np.isfinite(beta2) or not np.isfinite(alfa):
            raise FloatingPointError("non-finite value during MINRES iteration")
        if beta2 < 0:
            raise ValueError("preconditioner is not positive definite")
        beta = np.sqrt(beta2)
        anorm = max(anorm, float(np.sqrt(alfa * alfa + beta2 + oldb * oldb)))

        oldeps = epsln
        delta = cs * dbar + sn * alfa
        gbar = sn * dbar - cs * alfa
        epsln = sn * beta
        dbar = -cs * beta
        gamma = np.hypot(gbar, beta)
        if gamma <= 10 * eps * anorm:
            raise BreakdownError(f"MINRES breakdown at iteration {itn}: operator singular on the Krylov space")
        cs, sn = gbar / gamma, beta / gamma
        phi = cs * phibar
        phibar = sn * phibar

        w1, w2 = w2, w
        w = (v - oldeps * w1 - delta * w2) / gamma
        x += phi * w

        rel = abs(phibar) / beta1
        stats.residuals.append(rel)
        stats.n_iter = itn
        if rel <= tol:
            stats.converged = True
            break
        if beta <= 10 * eps * anorm:
            # invariant subspace found without reaching the tolerance
            raise BreakdownError(f"MINRES breakdown at iteration {itn} with relative residual {rel:.3e}")

    res = b - op.apply(x)
    stats.true_residual = float(np.linalg.norm(res)) / b_norm if b_norm > 0 else 0.0
    stats.wall_time = time.perf_counter() - t0
    return x, stats


def lanczos_extremes(pinv, atilde, iters: int = 30, seed: int = 0):
    """Estimate ``(λ_min, λ_max)`` of ``pinv @ atilde`` by preconditioned Lanczos.

    Only applications of ``pinv`` (SPD) and ``atilde`` (symmetric) are needed.
    The start vector is taken in the range of ``atilde`` so that a constant
    null space (e.g. of a Schur complement) does not show up as λ = 0.
    """
    n = atilde.shape[0]
    rng = np.random.default_rng(seed)
    r = atilde.apply(rng.standard_normal(n))
    z = pinv.apply(r)
    beta = np.sqrt(max(float(r @ z), 0.0))
    if beta == 0.0:
        return 0.0, 0.0
    alphas, betas = [], []
    r_prev = np.zeros(n)
    for _ in range(iters):
        q = z / beta
        rq = r / beta
        w = atilde.apply(q)
        alpha = float(w @ q)
        w = w - alpha * rq - beta * r_prev
        zq = pinv.apply(w)
        alphas.append(alpha)
        r_prev = rq
        beta_new = np.sqrt(max(float(w @ zq), 0.0))
        if beta_new <= 1e-14 * max(1.0, abs(alpha)):
            break
        betas.append(beta_new)
        r, z, beta = w, zq, beta_new
    k = len(alphas)
    t = np.diag(alphas) + np.diag(betas[:k - 1], 1) + np.diag(betas[:k - 1], -1)
    lam = np.linalg.eigvalsh(t)
    return float(lam[0]), float(lam[-1])
