"""ADMM for the MCP and Lasso problems on [-d, d]^n, plus a small-n global oracle."""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .conditions import ConvexityError, Hyperparams, check_full_rank
from .problem import ProblemInstance, lasso_value, mcps2_value

ORACLE_MAX_N = 12


def soft_threshold(v, a):
    """Proximal map of ``a * ||.||_1``."""
    if a < 0:
        raise ValueError("threshold must be nonnegative")
    v = np.asarray(v, dtype=float)
    return np.sign(v) * np.maximum(np.abs(v) - a, 0.0)


def project_box(v, d):
    """Euclidean projection onto [-d, d]^n."""
    if not d > 0:
        raise ValueError("d must be positive")
    return np.clip(np.asarray(v, dtype=float), -d, d)


@dataclass
class SolverResult:
    x_hat: np.ndarray
    iterations: int
    primal_residual: float
    dual_residual: float
    objective: float
    runtime_seconds: float
    converged: bool
    solver_id: str
    lam: float = math.nan
    rho: float = math.nan
    objective_tolerance: float = 0.0

    def to_dict(self) -> dict:
        return {
            "solver_id": self.solver_id,
            "x_hat": self.x_hat.tolist(),
            "iterations": self.iterations,
            "primal_residual": self.primal_residual,
            "dual_residual": self.dual_residual,
            "objective": self.objective,
            "runtime_seconds": self.runtime_seconds,
            "converged": self.converged,
            "lam": self.lam,
            "rho": self.rho,
            "objective_tolerance": self.objective_tolerance,
        }

    @classmethod
    def from_dict(cls, data) -> "SolverResult":
        data = dict(data)
        data["x_hat"] = np.asarray(data["x_hat"], dtype=float)
        return cls(**data)


def _admm(inst, hp, init, concave, callback):
    A, y, d = inst.A, inst.y, inst.d
    n = inst.n
    lam = hp.lam
    rho = hp.resolved_rho()
    if concave and not rho > lam:
        raise ValueError(f"rho={rho:g} must exceed lambda={lam:g}")
    tol_p, tol_d = hp.resolved_tols(n)
    if init is None:
        z = np.zeros(n)
        u = np.zeros(n)
    else:
        z, u = (np.array(a, dtype=float, copy=True) for a in init)
        if z.shape != (n,) or u.shape != (n,):
            raise ValueError("initial (z0, u0) must be n-vectors")

    t0 = time.perf_counter()
    shift = rho - lam if concave else rho
    chol = linalg.cho_factor(A.T @ A + shift * np.eye(n))
    Aty = A.T @ y
    thresh = (lam * d if concave else lam) / rho

    converged = False
    r_norm = s_norm = math.inf
    it = 0
    for it in range(1, hp.max_iters + 1):
        x = linalg.cho_solve(chol, Aty + rho * z - u)
        z_new = project_box(soft_threshold(x + u / rho, thresh), d)
        u = u + rho * (x - z_new)
        r_norm = float(np.linalg.norm(x - z_new))
        s_norm = float(rho * np.linalg.norm(z_new - z))
        z = z_new
        if callback is not None:
            callback(it, x, z, u)
        if r_norm <= tol_p and s_norm <= tol_d:
            converged = True
            break
    runtime = time.perf_counter() - t0
    obj = mcps2_value(z, A, y, lam, d) if concave else lasso_value(z, A, y, lam)
    return SolverResult(
        x_hat=z,
        iterations=it,
        primal_residual=r_norm,
        dual_residual=s_norm,
        objective=obj,
        runtime_seconds=runtime,
        converged=converged,
        solver_id="admm_mcps2" if concave else "admm_lasso",
        lam=lam,
        rho=rho,
    )


def admm_mcps2(inst: ProblemInstance, hp: Hyperparams, init=None, callback=None) -> SolverResult:
    """ADMM on the split (smooth nonconvex quadratic) + (l1 and box).

    x-step solves ``(A^T A + (rho - lam) I) x = A^T y + rho z - u`` with a
    Cholesky factor computed once; z-step is box projection of a soft
    threshold at ``lam*d/rho``; u is the scaled-free dual update. The returned
    estimate is the z-iterate, which always lies in the box.

    ``init`` is an optional ``(z0, u0)`` pair; ``callback(t, x, z, u)`` is
    invoked after every iteration.
    """
    return _admm(inst, hp, init, True, callback)


def admm_lasso(inst: ProblemInstance, hp: Hyperparams, init=None, callback=None) -> SolverResult:
    """Same iteration as :func:`admm_mcps2` with the concave term removed."""
    return _admm(inst, hp, init, False, callback)


def warm_start(inst: ProblemInstance, x, lam) -> tuple[np.ndarray, np.ndarray]:
    """``(z0, u0)`` that makes ``x`` a fixed point when it is stationary.

    The multiplier is ``u0 = lam*x - A^T(Ax - y)``, i.e. minus the gradient of
    the smooth part of the split objective.
    """
    x = np.asarray(x, dtype=float)
    u = lam * x - inst.A.T @ (inst.A @ x - inst.y)
    return x.copy(), u


def solve_restricted_convex(
    inst: ProblemInstance, lam: float, tol: float = 1e-14, max_iters: int = 200_000
) -> np.ndarray:
    """Minimize the MCP objective over x_S in [-d, d]^k with x_Sbar = 0.

    The restricted problem is strongly convex when lam is below the smallest
    eigenvalue of A_S^T A_S; solved by proximal gradient with step 1/L.
    """
    A_S = inst.A[:, inst.support]
    check_full_rank(A_S)
    G = A_S.T @ A_S
    ev = np.linalg.eigvalsh(G)
    if not 0 < lam < ev[0]:
        raise ConvexityError(
            f"lambda={lam:g} must lie in (0, {ev[0]:g}) for a convex restricted problem"
        )
    L = ev[-1] - lam
    b = A_S.T @ inst.y
    d = inst.d
    x = np.zeros(inst.k)
    for _ in range(max_iters):
        grad = G @ x - b - lam * x
        x_new = project_box(soft_threshold(x - grad / L, lam * d / L), d)
        if np.max(np.abs(x_new - x)) <= tol:
            x = x_new
            break
        x = x_new
    return x


def _lipschitz_bound(A, y, lam, d):
    # bound on ||grad F||_1 over the box, for the grid-tolerance report
    G = A.T @ A
    g = np.abs(A.T @ y) + d * np.sum(np.abs(G), axis=1) + 2 * lam * d
    return float(np.sum(g))


def global_minimize_bruteforce(
    inst: ProblemInstance, lam: float, grid_step: float | None = None, chunk: int = 65_536
) -> SolverResult:
    """Global minimum of the MCP objective over [-d, d]^n for small n.

    Every coordinate of a minimizer is either at a vertex value (-d, 0, d) or
    free inside one open half-interval. For each free set F the objective is a
    quadratic in x_F with Hessian ``A_F^T A_F - lam I``; an interior minimizer
    needs that Hessian positive semidefinite, and singular cases have an
    equally good point on a smaller face. So it suffices to enumerate free
    sets with a positive definite Hessian, every vertex assignment of the
    remaining coordinates and every sign pattern on F, solve the stationarity
    system, and keep feasible points. The search is exhaustive, so the
    returned value is the global minimum up to rounding; ``grid_step`` only
    sets the reported tolerance ``L * grid_step``.
    """
    A, y, d, n = inst.A, inst.y, inst.d, inst.n
    if n > ORACLE_MAX_N:
        raise ValueError(f"oracle limited to n <= {ORACLE_MAX_N}, got n={n}")
    if grid_step is None:
        grid_step = d / 10
    if not 0 < grid_step <= d / 10:
        raise ValueError("grid_step must lie in (0, d/10]")
    t0 = time.perf_counter()
    G = A.T @ A
    Aty = A.T @ y
    vals = np.array([-d, 0.0, d])

    best_val = math.inf
    best_x = np.zeros(n)

    def consider(X):
        nonlocal best_val, best_x
        R = X @ A.T - y
        F = 0.5 * np.sum(R * R, axis=1) + lam * (
            d * np.sum(np.abs(X), axis=1) - 0.5 * np.sum(X * X, axis=1)
        )
        j = int(np.argmin(F))
        if F[j] < best_val:
            best_val = float(F[j])
            best_x = X[j].copy()

    idx = np.arange(n)
    for f in range(0, min(n, inst.m) + 1):
        signs = np.array(list(itertools.product((-1.0, 1.0), repeat=f)), dtype=float).reshape(2**f, f)
        for free in itertools.combinations(range(n), f):
            F_ = np.array(free, dtype=np.int64)
            R_ = np.setdiff1d(idx, F_)
            if f:
                H = G[np.ix_(F_, F_)] - lam * np.eye(f)
                try:
                    cH = linalg.cho_factor(H)
                except linalg.LinAlgError:
                    continue
                if np.min(np.diag(cH[0])) ** 2 <= 1e-12 * max(1.0, np.max(np.abs(H))):
                    continue
                c = linalg.cho_solve(cH, Aty[F_])
                B = linalg.cho_solve(cH, G[np.ix_(F_, R_)])
                D = lam * d * linalg.cho_solve(cH, np.eye(f))
                # stationary x_F for each sign pattern, before the fixed-part shift
                base = c[None, :] - signs @ D.T
            r = R_.size
            total = 3**r
            for start in range(0, total, chunk):
                stop = min(total, start + chunk)
                codes = np.arange(start, stop)
                V = vals[(codes[:, None] // 3 ** np.arange(r)[None, :]) % 3] if r else np.zeros((stop - start, 0))
                if f == 0:
                    X = np.zeros((V.shape[0], n))
                    X[:, R_] = V
                    consider(X)
                    continue
                XF = base[None, :, :] - (V @ B.T)[:, None, :]
                ok = np.all(signs[None, :, :] * XF > 0, axis=2) & np.all(np.abs(XF) <= d, axis=2)
                a_idx, s_idx = np.nonzero(ok)
                if a_idx.size == 0:
                    continue
                X = np.zeros((a_idx.size, n))
                X[:, R_] = V[a_idx]
                X[:, F_] = XF[a_idx, s_idx]
                consider(X)

    runtime = time.perf_counter() - t0
    return SolverResult(
        x_hat=best_x,
        iterations=0,
        primal_residual=0.0,
        dual_residual=0.0,
        objective=best_val,
        runtime_seconds=runtime,
        converged=True,
        solver_id="oracle",
        lam=float(lam),
        objective_tolerance=_lipschitz_bound(A, y, lam, d) * grid_step,
    )
