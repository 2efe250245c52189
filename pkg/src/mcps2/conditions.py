"""Support-recovery certificates for Lasso and the MCP-regularized estimator.

Every quantity here is computed from the ground truth stored in a
:class:`~mcps2.problem.ProblemInstance` (support, signs, noise), so these are
analysis tools for synthetic experiments, not estimators.

Norm conventions: ``||M||_inf`` is the maximum absolute row sum and
``||M||_1`` the maximum absolute column sum.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import linalg

from .problem import ProblemInstance

RANK_TOL = 1e-10


class RankDeficientError(ValueError):
    """A_S is not of full column rank."""


class ConvexityError(ValueError):
    """lambda is not below the smallest eigenvalue of A_S^T A_S."""


def inf_norm(M) -> float:
    return float(np.max(np.sum(np.abs(np.atleast_2d(M)), axis=1)))


def one_norm(M) -> float:
    return float(np.max(np.sum(np.abs(np.atleast_2d(M)), axis=0)))


def check_full_rank(A_S):
    s = np.linalg.svd(np.asarray(A_S, dtype=float), compute_uv=False)
    if s.size == 0 or s[-1] <= RANK_TOL * s[0]:
        raise RankDeficientError(
            "A_S is rank deficient (smallest singular value "
            f"{s[-1] if s.size else 0.0:.3e} vs largest {s[0] if s.size else 0.0:.3e})"
        )


def _as_index(S, n):
    S = np.unique(np.asarray(S, dtype=np.int64).ravel())
    if S.size == 0 or S[0] < 0 or S[-1] >= n:
        raise ValueError("support must be a nonempty subset of column indices")
    mask = np.ones(n, dtype=bool)
    mask[S] = False
    return S, np.flatnonzero(mask)


def irr_constant(A, S) -> float:
    """Irrepresentability constant ``||pinv(A_S) @ A_Sbar||_1``.

    The pseudoinverse is applied through a thin QR factorization of A_S.
    Returns 0 when the support covers every column.
    """
    A = np.asarray(A, dtype=float)
    S, Sb = _as_index(S, A.shape[1])
    A_S = A[:, S]
    check_full_rank(A_S)
    if Sb.size == 0:
        return 0.0
    Q, R = linalg.qr(A_S, mode="economic")
    M = linalg.solve_triangular(R, Q.T @ A[:, Sb])
    return one_norm(M)


def cone_membership(v, S, alpha) -> bool:
    """True iff ``||v_Sbar||_1 <= alpha * ||v_S||_1``."""
    v = np.asarray(v, dtype=float)
    S, Sb = _as_index(S, v.size)
    return bool(np.sum(np.abs(v[Sb])) <= alpha * np.sum(np.abs(v[S])))


def re_estimate(A, S, alpha=3.0, samples=10_000, rng_seed=0, batch=4096) -> float:
    """Sampling estimate of the restricted eigenvalue over the cone C(alpha, S).

    Draws ``v_S`` standard normal and an off-support direction rescaled to
    ``||v_Sbar||_1 = u * alpha * ||v_S||_1`` with ``u ~ U[0, 1]``, and returns
    the smallest Rayleigh quotient ``||Av||^2 / ||v||^2`` seen. Since it is a
    minimum over a sample, the result is an upper bound on the true constant
    (heuristic, never a certificate on its own).
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    A = np.asarray(A, dtype=float)
    S, Sb = _as_index(S, A.shape[1])
    rng = np.random.default_rng(rng_seed)
    A_S, A_Sb = A[:, S], A[:, Sb]
    best = math.inf
    left = int(samples)
    while left > 0:
        b = min(batch, left)
        left -= b
        vS = rng.standard_normal((b, S.size))
        if Sb.size:
            w = rng.standard_normal((b, Sb.size))
            u = rng.random(b)
            scale = u * alpha * np.sum(np.abs(vS), axis=1) / np.sum(np.abs(w), axis=1)
            w *= scale[:, None]
            Av = vS @ A_S.T + w @ A_Sb.T
            nrm = np.sum(vS**2, axis=1) + np.sum(w**2, axis=1)
        else:
            Av = vS @ A_S.T
            nrm = np.sum(vS**2, axis=1)
        best = min(best, float(np.min(np.sum(Av**2, axis=1) / nrm)))
    return best


@dataclass
class Hyperparams:
    """Regularization, solver and certificate settings.

    ``rho``, ``tol_primal`` and ``tol_dual`` default to ``None`` and are
    resolved per run: ``rho = max(1, 10*lam)``, tolerances ``1e-8*sqrt(n)``.
    """

    lam: float
    rho: float | None = None
    epsilon: float = 1e-3
    alpha: float = 3.0
    re_samples: int = 10_000
    lambda_grid: tuple = ()
    max_iters: int = 10_000
    tol_primal: float | None = None
    tol_dual: float | None = None

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lam must be positive")
        if self.rho is not None and not self.rho > 0:
            raise ValueError("rho must be positive")
        if not self.epsilon > 0 or not self.alpha > 0:
            raise ValueError("epsilon and alpha must be positive")

    def resolved_rho(self) -> float:
        return float(self.rho) if self.rho is not None else max(1.0, 10.0 * self.lam)

    def resolved_tols(self, n: int) -> tuple[float, float]:
        base = 1e-8 * math.sqrt(n)
        tp = base if self.tol_primal is None else float(self.tol_primal)
        td = base if self.tol_dual is None else float(self.tol_dual)
        return tp, td


VERDICTS = ("lasso_vsc", "lemma1", "c3", "c3_strict", "prop1_global", "corollary1")


@dataclass
class CertificateReport:
    """Every certificate quantity for one (instance, lambda) pair.

    Quantities that were not requested or are undefined are NaN. ``verdicts``
    is always recomputable from the numeric fields via :func:`compute_verdicts`.
    """

    lambda_used: float
    epsilon: float
    alpha: float
    k: int
    d: float
    mu: float
    noise_inf: float
    restricted_eig_min: float
    irr_constant: float
    omega_max: float
    lasso_sign_lhs: float = math.nan
    lasso_vsc_lhs: float = math.nan
    zeta_inf: float = math.nan
    lemma1_lhs: float = math.nan
    q: float = math.nan
    c3_margin: float = math.nan
    candidate_max_abs: float = math.nan
    candidate_sign_margin: float = math.nan
    theta: float = math.nan
    alpha_required: float = math.nan
    global_radius: float = math.nan
    phi_estimate: float = math.nan
    phi_source: str = "none"
    verdicts: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data) -> "CertificateReport":
        return cls(**data)


def compute_verdicts(r: CertificateReport) -> dict:
    lam, d = r.lambda_used, r.d
    min_abs = r.mu * d
    convex = 0 < lam < r.restricted_eig_min
    lemma1 = convex and r.lemma1_lhs <= min_abs
    candidate = convex and r.candidate_sign_margin > 0 and r.candidate_max_abs <= d
    phi = r.phi_estimate
    if r.omega_max == math.inf:
        cor_bound = phi
    else:
        cor_bound = r.omega_max * phi / (6.0 * math.sqrt(r.k) + r.omega_max)
    return {
        "lasso_vsc": bool(r.lasso_sign_lhs <= min_abs and r.lasso_vsc_lhs < 1.0),
        "lemma1": bool(lemma1),
        "c3": bool(lemma1 and candidate and r.q > 0),
        "c3_strict": bool(lemma1 and candidate and r.q > r.c3_margin),
        "prop1_global": bool(
            candidate and r.theta < lam * d and phi > lam and r.global_radius <= r.epsilon
        ),
        "corollary1": bool(
            r.mu == 1.0 and r.noise_inf == 0.0 and convex and phi > lam and lam < cor_bound
        ),
    }


class SupportAnalysis:
    """Lambda-independent pieces of the certificates, computed once per instance.

    Sweeping a lambda grid only costs k-by-k factorizations after this.
    """

    def __init__(self, inst: ProblemInstance):
        self.inst = inst
        A, S, Sb = inst.A, inst.support, inst.complement
        A_S = A[:, S]
        check_full_rank(A_S)
        self.A_S, self.A_Sb = A_S, A[:, Sb]
        self.G = A_S.T @ A_S
        self.eig_min = float(np.linalg.eigvalsh(self.G)[0])
        Q, R = linalg.qr(A_S, mode="economic")
        if Sb.size:
            self.irr = one_norm(linalg.solve_triangular(R, Q.T @ self.A_Sb))
        else:
            self.irr = 0.0
        self.omega_max = math.inf if self.irr == 0 else 1.0 / self.irr
        eta = inst.eta
        self.noise_inf = float(np.max(np.abs(eta)))
        self.AS_eta = A_S.T @ eta
        self.AS_eta_inf = float(np.max(np.abs(self.AS_eta)))
        self.ASb_eta_inf = float(np.max(np.abs(self.A_Sb.T @ eta))) if Sb.size else 0.0
        # zeta = A_Sbar^T (A_S pinv(A_S) - I) eta; A_S pinv(A_S) = Q Q^T
        zeta = self.A_Sb.T @ (Q @ (Q.T @ eta) - eta) if Sb.size else np.zeros(0)
        self.zeta_inf = float(np.max(np.abs(zeta))) if zeta.size else 0.0
        cG = linalg.cho_factor(self.G)
        self.G_inv_inf = inf_norm(linalg.cho_solve(cG, np.eye(S.size)))
        self.x_S = inst.x_true[S]
        self.sgn = np.sign(self.x_S)
        self.min_abs = float(np.min(np.abs(self.x_S)))

    def base_report(self, lam, epsilon, alpha) -> CertificateReport:
        inst = self.inst
        return CertificateReport(
            lambda_used=float(lam),
            epsilon=float(epsilon),
            alpha=float(alpha),
            k=inst.k,
            d=inst.d,
            mu=inst.mu,
            noise_inf=self.noise_inf,
            restricted_eig_min=self.eig_min,
            irr_constant=self.irr,
            omega_max=self.omega_max,
            zeta_inf=self.zeta_inf,
        )

    def fill_lasso(self, r: CertificateReport):
        lam = r.lambda_used
        r.lasso_sign_lhs = self.G_inv_inf * (self.AS_eta_inf + lam)
        r.lasso_vsc_lhs = self.irr + self.zeta_inf / lam

    def candidate(self, lam):
        """Closed-form candidate on the support, with sign(x_true) as the subgradient."""
        d = self.inst.d
        M = self.G - lam * np.eye(self.G.shape[0])
        c = linalg.cho_factor(M)
        rhs = lam * self.x_S - lam * d * self.sgn + self.AS_eta
        xs = self.x_S + linalg.cho_solve(c, rhs)
        return xs, c

    def fill_mcps2(self, r: CertificateReport):
        lam, d = r.lambda_used, self.inst.d
        r.c3_margin = lam * r.epsilon * (1.0 + r.alpha) / r.alpha
        if not 0 < lam < self.eig_min:
            r.notes.append(
                f"lambda={lam:g} is not below the smallest eigenvalue of A_S^T A_S "
                f"({self.eig_min:g}); restricted problem is not convex"
            )
            return None
        xs, c = self.candidate(lam)
        Minv = linalg.cho_solve(c, np.eye(xs.size))
        bracket = lam * d * (1.0 - self.inst.mu) + self.AS_eta_inf
        r.lemma1_lhs = inf_norm(Minv) * bracket
        r.q = lam * d - self.irr * inf_norm(self.G @ Minv) * bracket - self.ASb_eta_inf
        r.candidate_max_abs = float(np.max(np.abs(xs)))
        r.candidate_sign_margin = float(np.min(self.sgn * xs))
        if r.candidate_max_abs > d:
            r.notes.append("candidate minimizer leaves the box; certificate fails closed")
        x = np.zeros(self.inst.n)
        x[self.inst.support] = xs
        return x

    def fill_global(self, r: CertificateReport, x_star, phi, phi_source):
        lam, d, inst = r.lambda_used, self.inst.d, self.inst
        r.phi_estimate = float(phi) if phi is not None else math.nan
        r.phi_source = phi_source if phi is not None else "none"
        theta = float(np.max(np.abs(inst.A.T @ (inst.y - inst.A @ x_star))))
        r.theta = theta
        r.alpha_required = (2 * lam * d + theta) / (lam * d - theta) if theta < lam * d else math.inf
        if phi is not None and phi > lam:
            r.global_radius = 2.0 * (theta + 2 * lam * d) * math.sqrt(inst.k) / (phi - lam)
        else:
            r.global_radius = math.inf

    def lasso_pass(self, lam) -> bool:
        return (
            self.G_inv_inf * (self.AS_eta_inf + lam) <= self.min_abs
            and self.irr + self.zeta_inf / lam < 1.0
        )


def _check_lambda(lam):
    if not lam > 0:
        raise ValueError("lambda must be positive")


def lasso_vsc_certificate(inst: ProblemInstance, lam: float):
    """Sign bound plus the noisy irrepresentable inequality for Lasso.

    Returns ``(passed, report)``.
    """
    _check_lambda(lam)
    sa = SupportAnalysis(inst)
    r = sa.base_report(lam, math.nan, math.nan)
    sa.fill_lasso(r)
    r.verdicts = compute_verdicts(r)
    return r.verdicts["lasso_vsc"], r


def kkt_check_lasso(x, inst: ProblemInstance, lam: float, tol: float = 1e-6) -> bool:
    """Optimality check for the box-constrained Lasso.

    Interior nonzeros must satisfy ``A_i^T(Ax - y) + lam*sign(x_i) = 0``, zeros
    ``|A_i^T(Ax - y)| <= lam``; coordinates on the box boundary only need the
    gradient to point outward.
    """
    x = np.asarray(x, dtype=float)
    g = inst.A.T @ (inst.A @ x - inst.y)
    d = inst.d
    upper = x >= d
    lower = x <= -d
    zero = x == 0
    inner = ~(upper | lower | zero)
    ok = np.all(np.abs(g[inner] + lam * np.sign(x[inner])) <= tol)
    ok &= np.all(np.abs(g[zero]) <= lam + tol)
    ok &= np.all(g[upper] + lam <= tol)
    ok &= np.all(g[lower] - lam >= -tol)
    return bool(ok)


@dataclass(frozen=True)
class Candidate:
    x_star: np.ndarray
    sign_consistent: bool
    in_box: bool


def candidate_minimizer(inst: ProblemInstance, lam: float) -> Candidate:
    """Support-restricted stationary point of the MCP objective, zero off-support."""
    _check_lambda(lam)
    sa = SupportAnalysis(inst)
    if lam >= sa.eig_min:
        raise ConvexityError(
            f"lambda={lam:g} >= smallest eigenvalue {sa.eig_min:g} of A_S^T A_S"
        )
    xs, _ = sa.candidate(lam)
    x = np.zeros(inst.n)
    x[inst.support] = xs
    return Candidate(
        x_star=x,
        sign_consistent=bool(np.all(np.sign(xs) == sa.sgn)),
        in_box=bool(np.max(np.abs(xs)) <= inst.d),
    )


def lemma1_check(inst: ProblemInstance, lam: float) -> bool:
    """Sufficient condition for the candidate to keep the signs of x_true."""
    _check_lambda(lam)
    sa = SupportAnalysis(inst)
    if lam >= sa.eig_min:
        raise ConvexityError(
            f"lambda={lam:g} >= smallest eigenvalue {sa.eig_min:g} of A_S^T A_S"
        )
    M = sa.G - lam * np.eye(inst.k)
    Minv_inf = inf_norm(linalg.solve(M, np.eye(inst.k), assume_a="pos"))
    lhs = Minv_inf * (lam * inst.d * (1 - inst.mu) + sa.AS_eta_inf)
    return bool(lhs <= inst.mu * inst.d)


def mcps2_local_certificate(
    inst: ProblemInstance, lam: float, epsilon: float = 1e-3, alpha: float = 3.0
) -> CertificateReport:
    """Local-minimality certificate for the candidate (margin ``q``).

    ``verdicts['c3']`` uses the epsilon -> 0 limit (``q > 0``);
    ``verdicts['c3_strict']`` compares against ``lam*epsilon*(1+alpha)/alpha``.
    Both fail when the sign condition does not hold.
    """
    _check_lambda(lam)
    sa = SupportAnalysis(inst)
    r = sa.base_report(lam, epsilon, alpha)
    x = sa.fill_mcps2(r)
    if x is not None and not r.lemma1_lhs <= inst.mu * inst.d:
        r.notes.append("sign condition fails; no local certificate")
    r.verdicts = compute_verdicts(r)
    return r


def mcps2_global_certificate(
    inst: ProblemInstance, lam: float, x_star, phi: float, epsilon: float,
    phi_source: str = "user",
):
    """Global-optimality test for ``x_star``.

    Passes when ``theta < lam*d``, ``phi > lam`` and the radius bound
    ``2(theta + 2 lam d) sqrt(k) / (phi - lam)`` fits inside ``epsilon``.
    Returns ``(passed, report)``.
    """
    sa = SupportAnalysis(inst)
    r = sa.base_report(lam, epsilon, math.nan)
    x_star = np.asarray(x_star, dtype=float)
    sa.fill_global(r, x_star, phi, phi_source)
    lam_d = lam * inst.d
    passed = bool(
        lam > 0 and r.theta < lam_d and phi is not None and phi > lam
        and r.global_radius <= epsilon
    )
    if not r.theta < lam_d:
        r.notes.append("theta >= lambda*d: residual correlation too large")
    if phi is None or not phi > lam:
        r.notes.append("phi <= lambda")
    r.verdicts = {"prop1_global": passed}
    return passed, r


def corollary1_certificate(inst: ProblemInstance, lam: float, phi: float) -> bool:
    """Noise-free, extreme-magnitude global certificate for x_true."""
    sa = SupportAnalysis(inst)
    r = sa.base_report(lam, math.nan, math.nan)
    r.phi_estimate = float(phi)
    return compute_verdicts(r)["corollary1"]


def certify(
    inst: ProblemInstance,
    lam: float,
    epsilon: float = 1e-3,
    alpha: float = 3.0,
    phi: float | None = None,
    phi_source: str = "user",
) -> CertificateReport:
    """Compute every certificate quantity and verdict at one lambda."""
    _check_lambda(lam)
    sa = SupportAnalysis(inst)
    r = sa.base_report(lam, epsilon, alpha)
    sa.fill_lasso(r)
    x = sa.fill_mcps2(r)
    if x is not None:
        sa.fill_global(r, x, phi, phi_source)
    elif phi is not None:
        r.phi_estimate, r.phi_source = float(phi), phi_source
    r.verdicts = compute_verdicts(r)
    return r


def lambda_feasible_range(
    inst: ProblemInstance,
    method: str,
    grid,
    epsilon: float = 1e-3,
    alpha: float = 3.0,
    strict: bool = False,
):
    """Evaluate a method's certificate along a lambda grid.

    ``method`` is ``'lasso'`` or ``'mcps2'``. For ``'mcps2'`` the verdict is
    the sign condition plus the local margin (limit form unless ``strict``).
    """
    grid = [float(v) for v in grid]
    if not grid:
        raise ValueError("lambda grid must be nonempty")
    if any(b <= a for a, b in zip(grid, grid[1:])) or grid[0] <= 0:
        raise ValueError("lambda grid must be positive and ascending")
    if method not in ("lasso", "mcps2"):
        raise ValueError(f"unknown method {method!r}")
    sa = SupportAnalysis(inst)
    out = []
    for lam in grid:
        if method == "lasso":
            out.append((lam, bool(sa.lasso_pass(lam))))
            continue
        r = sa.base_report(lam, epsilon, alpha)
        sa.fill_mcps2(r)
        v = compute_verdicts(r)
        out.append((lam, v["c3_strict"] if strict else v["c3"]))
    return out


