"""Sparse recovery instances and the Gaussian measurement ensemble."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np


class BoxWarning(UserWarning):
    """Objective evaluated at a point outside [-d, d]^n."""


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """Noisy linear measurements ``y = A @ x_true + eta`` of a sparse vector.

    Arrays are copied and made read-only on construction, so an instance can
    be shared between workers. ``support`` is stored sorted and 0-based.
    """

    A: np.ndarray
    x_true: np.ndarray
    eta: np.ndarray
    y: np.ndarray
    support: np.ndarray
    d: float = 1.0
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        A = _frozen(self.A)
        if A.ndim != 2:
            raise ValueError("A must be a matrix")
        m, n = A.shape
        x = _frozen(self.x_true)
        eta = _frozen(self.eta)
        y = _frozen(self.y)
        if x.shape != (n,) or eta.shape != (m,) or y.shape != (m,):
            raise ValueError(
                f"dimension mismatch: A is {m}x{n}, x_true {x.shape}, "
                f"eta {eta.shape}, y {y.shape}"
            )
        S = np.unique(np.asarray(self.support, dtype=np.int64))
        if S.size == 0:
            raise ValueError("support must be nonempty")
        if S[0] < 0 or S[-1] >= n:
            raise ValueError("support index out of range")
        S.setflags(write=False)
        if self.d <= 0:
            raise ValueError("d must be positive")
        off = np.ones(n, dtype=bool)
        off[S] = False
        if np.any(x[off] != 0):
            raise ValueError("x_true has nonzeros outside the support")
        if np.any(x[S] == 0) or np.any(np.abs(x[S]) > self.d):
            raise ValueError("support entries must be nonzero and within [-d, d]")
        if S.size > m:
            raise ValueError("support larger than the number of measurements")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "x_true", x)
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "support", S)
        object.__setattr__(self, "d", float(self.d))

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def n(self) -> int:
        return self.A.shape[1]

    @property
    def k(self) -> int:
        return int(self.support.size)

    @property
    def complement(self) -> np.ndarray:
        mask = np.ones(self.n, dtype=bool)
        mask[self.support] = False
        return np.flatnonzero(mask)

    @property
    def mu(self) -> float:
        return float(np.min(np.abs(self.x_true[self.support])) / self.d)

    def reconstruction_error(self) -> float:
        """Max deviation of ``y`` from ``A @ x_true + eta``."""
        return float(np.max(np.abs(self.y - (self.A @ self.x_true + self.eta))))

    @classmethod
    def from_arrays(cls, A, x_true, eta=None, d=1.0, seed=None, meta=None):
        """Build an instance and assemble ``y`` from the measurement model."""
        A = np.asarray(A, dtype=float)
        x_true = np.asarray(x_true, dtype=float)
        eta = np.zeros(A.shape[0]) if eta is None else np.asarray(eta, dtype=float)
        return cls(
            A=A,
            x_true=x_true,
            eta=eta,
            y=A @ x_true + eta,
            support=np.flatnonzero(x_true),
            d=d,
            seed=seed,
            meta=dict(meta or {}),
        )

    def with_noise(self, eta) -> "ProblemInstance":
        return ProblemInstance.from_arrays(
            self.A, self.x_true, eta, d=self.d, seed=self.seed, meta=self.meta
        )


@dataclass(frozen=True)
class GeneratorConfig:
    n: int
    m: int
    k: int
    d: float = 1.0
    magnitude_range: tuple[float, float] = (0.5, 1.0)
    noise_inf_bound: float = 0.0
    rng_seed: int = 0
    ensemble: str = "gaussian_inv_m"

    def replace(self, **changes) -> "GeneratorConfig":
        from dataclasses import replace

        return replace(self, **changes)


def generate_instance(cfg: GeneratorConfig) -> ProblemInstance:
    """Draw a random instance from the configured ensemble.

    Draw order is fixed (A, support, magnitudes, signs, noise) so that
    instances generated with the same seed but different noise bounds share
    ``A`` and ``x_true``.
    """
    n, m, k, d = cfg.n, cfg.m, cfg.k, float(cfg.d)
    if min(n, m, k) < 1:
        raise ValueError("n, m and k must be positive")
    if k > m or k > n:
        raise ValueError(f"invalid dimensions: k={k} must not exceed m={m} or n={n}")
    if d <= 0:
        raise ValueError("d must be positive")
    lo, hi = map(float, cfg.magnitude_range)
    if not (0 < lo <= hi <= d):
        raise ValueError(f"magnitude range [{lo}, {hi}] must lie in (0, d={d}]")
    if cfg.noise_inf_bound < 0:
        raise ValueError("noise_inf_bound must be nonnegative")
    if cfg.ensemble != "gaussian_inv_m":
        raise ValueError(f"unknown ensemble {cfg.ensemble!r}")

    rng = np.random.default_rng(cfg.rng_seed)
    A = rng.normal(0.0, 1.0 / np.sqrt(m), size=(m, n))
    support = np.sort(rng.choice(n, size=k, replace=False))
    mags = rng.uniform(lo, hi, size=k) if hi > lo else np.full(k, lo)
    signs = np.where(rng.random(k) < 0.5, -1.0, 1.0)
    x = np.zeros(n)
    x[support] = signs * mags

    raw = rng.uniform(-1.0, 1.0, size=m)
    if cfg.noise_inf_bound == 0:
        eta = np.zeros(m)
    else:
        eta = raw * (cfg.noise_inf_bound / np.max(np.abs(raw)))
        # pin the extreme entry so the inf-norm is exact
        j = int(np.argmax(np.abs(eta)))
        eta[j] = np.copysign(cfg.noise_inf_bound, raw[j])

    return ProblemInstance(
        A=A,
        x_true=x,
        eta=eta,
        y=A @ x + eta,
        support=support,
        d=d,
        seed=int(cfg.rng_seed),
        meta={"ensemble": cfg.ensemble, "signs": "fair_coin"},
    )


def restrict_columns(A, idx) -> np.ndarray:
    """Submatrix of ``A`` made of the columns in ``idx`` (order preserved)."""
    A = np.asarray(A)
    idx = np.asarray(idx, dtype=np.int64).ravel()
    if idx.size == 0:
        raise ValueError("column index set must be nonempty")
    if idx.min() < 0 or idx.max() >= A.shape[1]:
        raise IndexError(f"column index out of range for a matrix with {A.shape[1]} columns")
    return A[:, idx]


def _check_x(x, inst):
    x = np.asarray(x, dtype=float)
    if x.shape != (inst.n,):
        raise ValueError(f"x has shape {x.shape}, expected ({inst.n},)")
    if np.any(np.abs(x) > inst.d * (1 + 1e-12)):
        warnings.warn("objective evaluated outside the box [-d, d]^n", BoxWarning, stacklevel=3)
    return x


def mcps2_value(x, A, y, lam, d) -> float:
    r = y - A @ x
    return 0.5 * float(r @ r) + lam * (d * float(np.sum(np.abs(x))) - 0.5 * float(x @ x))


def lasso_value(x, A, y, lam) -> float:
    r = y - A @ x
    return 0.5 * float(r @ r) + lam * float(np.sum(np.abs(x)))


def objective_mcps2(x, inst: ProblemInstance, lam: float) -> float:
    """0.5*||y - Ax||^2 + lam*(d*||x||_1 - 0.5*||x||^2)."""
    x = _check_x(x, inst)
    return mcps2_value(x, inst.A, inst.y, lam, inst.d)


def objective_lasso(x, inst: ProblemInstance, lam: float) -> float:
    x = _check_x(x, inst)
    return lasso_value(x, inst.A, inst.y, lam)
