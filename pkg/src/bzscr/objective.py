"""Logistic loss, the semantic-correlation penalty, per-sample costs and the full objective."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import DegenerateTargetSetError, ValidationError
from .scoring import MarginMatrix, dual_violations

__all__ = [
    "Hyperparams",
    "SampleCosts",
    "softplus",
    "logistic_loss",
    "logistic_loss_grad",
    "covariance_term",
    "row_covariance",
    "scr_penalty",
    "sample_costs",
    "total_objective",
    "objective_gradient_w",
]


@dataclass(frozen=True)
class Hyperparams:
    """Absolute L1 strength ``nu`` and SCR strength ``beta`` (not divided by N)."""

    nu: float
    beta: float

    def __post_init__(self):
        for name in ("nu", "beta"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0):
                raise ValidationError(f"{name} must be finite and non-negative, got {v!r}")

    @classmethod
    def per_sample(cls, nu_over_n, beta_over_n, n_samples) -> "Hyperparams":
        return cls(nu_over_n * n_samples, beta_over_n * n_samples)


@dataclass(frozen=True, eq=False)
class SampleCosts:
    """Composite cost ``l`` per sample together with its ``cov`` and ``scr`` parts."""

    l: np.ndarray
    cov: np.ndarray
    scr: np.ndarray
    loss: np.ndarray


def softplus(x):
    """ln(1 + e^x) evaluated as max(x, 0) + ln(1 + e^-|x|)."""
    x = np.asarray(x, dtype=float)
    out = np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))
    return out if out.ndim else float(out)


def logistic_loss(rho):
    return softplus(rho)


def logistic_loss_grad(rho):
    """Derivative of the logistic loss, i.e. the sigmoid."""
    out = expit(np.asarray(rho, dtype=float))
    return out if out.ndim else float(out)


scr_penalty = softplus


def covariance_term(a, b) -> float:
    """Population covariance E[a*b] - E[a]E[b] of two equal-length vectors."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValidationError("covariance needs two vectors of equal length")
    if a.size < 2:
        raise DegenerateTargetSetError("covariance over fewer than two target classes")
    return float(np.mean(a * b) - a.mean() * b.mean())


def row_covariance(A, B) -> np.ndarray:
    """Row-wise population covariance of two N x n matrices."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape[1] < 2:
        raise DegenerateTargetSetError("covariance over fewer than two target classes")
    return np.mean(A * B, axis=1) - A.mean(axis=1) * B.mean(axis=1)


def _columns(classes):
    return np.asarray(classes, dtype=np.int64) - 1


def sample_costs(margins: MarginMatrix, delta, split, hp: Hyperparams) -> SampleCosts:
    """Per-sample cost ``l_i = sum_{r in seen} L(rho_ir) + beta * R(rho_i^t)``.

    ``split`` only needs ``seen`` and ``unseen`` class tuples. ``cov_i`` is
    computed from the target-class margins through
    ``cov(Delta_t, rho_t) - Var(Delta_t)``.
    """
    seen, unseen = _columns(split.seen), _columns(split.unseen)
    if unseen.size < 2:
        raise DegenerateTargetSetError("at least two unseen classes are required")
    rho = margins.rho
    loss = softplus(rho[:, seen]).sum(axis=1)
    D_t = delta.matrix[margins.label_index][:, unseen]
    rho_t = rho[:, unseen]
    cov = row_covariance(D_t, rho_t) - D_t.var(axis=1)
    scr = softplus(cov)
    return SampleCosts(loss + hp.beta * scr, cov, scr, loss)


def total_objective(costs: SampleCosts, s, pace, w, hp: Hyperparams) -> float:
    """sum_i [s_i l_i + g(s_i)] + nu * sum_j w_j."""
    from .selection import g_value

    s = np.asarray(s, dtype=float)
    return float(np.dot(s, costs.l) + np.sum(g_value(s, pace)) + hp.nu * np.sum(w))


def objective_gradient_w(Q, ens, data, E, hp: Hyperparams) -> np.ndarray:
    """Gradient of the weight subproblem: ``nu - violation_j`` for each weak model."""
    return hp.nu - dual_violations(ens, Q, data, E)
