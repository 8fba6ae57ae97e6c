"""Self-paced sample weighting with the mixture-weighting regularizer."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ValidationError

__all__ = ["PaceParams", "g_value", "optimal_s", "update_all_s", "anneal", "initial_pace"]

# zeta / lambda in quantile mode
QUANTILE_ZETA_RATIO = 0.1


@dataclass(frozen=True)
class PaceParams:
    """Pace state ``(lam, zeta)`` and the schedule that anneals it.

    ``mode="geometric"`` multiplies both by ``mu`` until ``lam`` reaches
    ``lambda_max``. ``mode="quantile"`` sets ``lam`` from the sorted sample
    costs so that a target proportion ``p0 + t * p_step`` is selected.
    """

    lam: float = 1.0
    zeta: float = 0.1
    lambda_max: float = math.inf
    mu: float = 1.1
    mode: str = "quantile"
    p0: float = 0.5
    p_step: float = 0.1

    def __post_init__(self):
        if not (self.lam > 0 and self.zeta > 0):
            raise ValidationError("lambda and zeta must be positive")
        if not self.mu > 1:
            raise ValidationError("mu must exceed 1")
        if not 0 < self.p0 <= 1:
            raise ValidationError("p0 must lie in (0, 1]")
        if self.p_step < 0:
            raise ValidationError("p_step must be non-negative")
        if self.mode not in ("geometric", "quantile"):
            raise ValidationError(f"unknown pace mode {self.mode!r}")


def g_value(s, pace: PaceParams):
    """Mixture-weighting regularizer -zeta * ln(s + zeta / lambda)."""
    out = -pace.zeta * np.log(np.asarray(s, dtype=float) + pace.zeta / pace.lam)
    return out if out.ndim else float(out)


def optimal_s(l, pace: PaceParams):
    """Closed-form minimiser of ``s * l + g(s)`` over ``s`` in [0, 1].

    1 below ``zeta*lam/(zeta+lam)``, 0 at or above ``lam``, and
    ``zeta/l - zeta/lam`` in between.
    """
    l = np.asarray(l, dtype=float)
    lam, zeta = pace.lam, pace.zeta
    easy = zeta * lam / (zeta + lam)
    with np.errstate(divide="ignore", invalid="ignore"):
        soft = zeta / l - zeta / lam
    s = np.where(l <= easy, 1.0, np.where(l >= lam, 0.0, soft))
    s = np.clip(s, 0.0, 1.0)
    return s if s.ndim else float(s)


def update_all_s(costs, pace: PaceParams) -> np.ndarray:
    l = np.asarray(getattr(costs, "l", costs), dtype=float)
    if not np.all(np.isfinite(l)):
        raise ValidationError("sample costs must be finite")
    return np.atleast_1d(optimal_s(l, pace))


def anneal(pace: PaceParams, costs, t: int) -> PaceParams:
    """Pace for the iteration after ``t``.

    In quantile mode with target proportion ``p < 1``, ``lam`` is the
    ``ceil(p N)``-th smallest cost, so every cost strictly below it gets a
    positive weight. At ``p = 1`` ``lam`` is raised until the largest cost sits
    on the fully-selected threshold, which gives ``s = 1`` everywhere.
    """
    if pace.mode == "geometric":
        if pace.lam < pace.lambda_max:
            return replace(pace, lam=pace.lam * pace.mu, zeta=pace.zeta * pace.mu)
        return pace

    l = np.sort(np.asarray(getattr(costs, "l", costs), dtype=float))
    p = min(1.0, pace.p0 + t * pace.p_step)
    if p >= 1.0:
        if pace.lam >= pace.lambda_max and t > 0:
            return pace
        lam = l[-1] * (1.0 + 1.0 / QUANTILE_ZETA_RATIO)
    else:
        k = max(1, math.ceil(p * l.size))
        lam = l[k - 1]
    lam = max(float(lam), np.finfo(float).tiny)
    return replace(pace, lam=lam, zeta=QUANTILE_ZETA_RATIO * lam)


def initial_pace(pace: PaceParams, costs) -> PaceParams:
    """Starting pace: unchanged in geometric mode, the ``p0`` quantile otherwise."""
    if pace.mode == "geometric":
        return pace
    return anneal(pace, costs, 0)
