"""Support-recovery scores."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .problem import ProblemInstance

ROW_FIELDS = ("method", "m", "trial", "seed", "vsc", "fp", "fn", "l2", "status")
TIMING_FIELDS = ("method", "m", "trial", "runtime")


def default_tau(d: float) -> float:
    return 1e-3 * d


@dataclass(frozen=True)
class RecoveryScore:
    vsc: bool
    false_positive_rate: float
    false_negative_rate: float
    l2_error: float


def estimated_support(x_hat, tau) -> np.ndarray:
    return np.flatnonzero(np.abs(np.asarray(x_hat, dtype=float)) > tau)


def score(x_hat, inst: ProblemInstance, tau: float | None = None) -> RecoveryScore:
    """Compare the thresholded support of ``x_hat`` with the true support.

    FP rate is over the ``n - k`` true zeros, FN rate over the ``k`` nonzeros.
    """
    if tau is None:
        tau = default_tau(inst.d)
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    k, n = inst.k, inst.n
    if k == 0:
        raise ValueError("score needs a nonempty true support")
    x_hat = np.asarray(x_hat, dtype=float)
    est = np.abs(x_hat) > tau
    true = np.zeros(n, dtype=bool)
    true[inst.support] = True
    fp = int(np.sum(est & ~true))
    fn = int(np.sum(~est & true))
    return RecoveryScore(
        vsc=bool(fp == 0 and fn == 0),
        false_positive_rate=fp / (n - k) if n > k else 0.0,
        false_negative_rate=fn / k,
        l2_error=float(np.linalg.norm(x_hat - inst.x_true)),
    )
