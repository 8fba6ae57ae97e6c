"""Column-generation core: dual matrix, weak-model generation and the weight solve."""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import expit

from .errors import DegenerateTargetSetError, ValidationError, ZeroDualMatrixError
from .objective import Hyperparams, SampleCosts, softplus
from .scoring import Ensemble, MarginMatrix, WeakModel, dual_violations

__all__ = [
    "SolverSettings",
    "SolveResult",
    "KKTResidual",
    "compute_Q",
    "weak_learner_matrix",
    "top_singular_pair",
    "learn_weak_model",
    "violation_score",
    "weight_objective",
    "solve_w",
    "kkt_residual",
]


@dataclass(frozen=True)
class SolverSettings:
    """Inner-solver and column-generation tolerances.

    ``epsilon`` is the column-generation slack: boosting stops once the best
    new weak model violates the dual constraint by less than ``nu + epsilon``.
    """

    max_iters: int = 300
    grad_tol: float = 1e-6
    shrink: float = 0.5
    grow: float = 2.0
    armijo: float = 1e-4
    memory: int = 10
    epsilon: float = 1e-6
    power_tol: float = 1e-10
    power_max_iters: int = 20000

    def __post_init__(self):
        if self.max_iters < 1 or self.power_max_iters < 1 or self.memory < 1:
            raise ValidationError("iteration limits must be positive")
        for name in ("grad_tol", "epsilon", "power_tol", "armijo"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be positive")
        if not 0 < self.shrink < 1 or not self.grow >= 1:
            raise ValidationError("need 0 < shrink < 1 <= grow")


STEP_MIN, STEP_MAX = 1e-12, 1e12


class SolveResult(NamedTuple):
    w: np.ndarray
    converged: bool
    n_iter: int
    objective: float
    initial_objective: float
    grad_norm: float


class KKTResidual(NamedTuple):
    max_constraint_violation: float
    max_complementarity: float


def _cols(classes):
    return np.asarray(classes, dtype=np.int64) - 1


def compute_Q(margins: MarginMatrix, costs: SampleCosts, s, delta, split, hp: Hyperparams) -> np.ndarray:
    """Dual matrix from the primal state.

    Seen columns: ``s_i * sigmoid(rho_ir)``. Unseen columns:
    ``(Delta(y_i, r) - mean_t Delta(y_i, .)) / |Y_T| * beta * s_i * sigmoid(cov_i)``.
    Columns of classes in neither set are 0.
    """
    seen, unseen = _cols(split.seen), _cols(split.unseen)
    if unseen.size < 2:
        raise DegenerateTargetSetError("at least two unseen classes are required")
    s = np.asarray(s, dtype=float)
    Q = np.zeros_like(margins.rho)
    Q[:, seen] = s[:, None] * expit(margins.rho[:, seen])
    D_t = delta.matrix[margins.label_index][:, unseen]
    centred = (D_t - D_t.mean(axis=1, keepdims=True)) / unseen.size
    Q[:, unseen] = centred * (hp.beta * s * expit(costs.cov))[:, None]
    return Q


def weak_learner_matrix(Q, data, E) -> np.ndarray:
    """M = sum_{i,r} Q[i, r] x_i (phi(y_i) - phi(r))^T, accumulated as X^T B (m x d)."""
    Q = np.asarray(Q, dtype=float)
    Phi = E.matrix
    B = Q.sum(axis=1)[:, None] * Phi[data.labels - 1] - Q @ Phi
    return data.features.T @ B


def top_singular_pair(M, tol=1e-10, max_iters=20000, seed=0):
    """Leading singular triple ``(u, sigma, v)`` of ``M`` by power iteration on M^T M.

    The start vector comes from ``default_rng(seed)``. Iteration stops when
    successive unit vectors differ by at most ``tol`` in 2-norm. The sign is
    fixed by ``u = M v / |M v|`` so that ``u^T M v = sigma >= 0``.
    """
    M = np.asarray(M, dtype=float)
    if not np.any(M):
        raise ZeroDualMatrixError("weak-learner matrix is identically zero")
    A = M.T @ M
    A = A / np.abs(A).max()
    v = np.random.default_rng(seed).standard_normal(A.shape[0])
    v /= np.linalg.norm(v)
    # a few squarings widen the eigen-gap; the plain matrix polishes afterwards
    A8 = A
    for _ in range(3):
        A8 = A8 @ A8
        A8 /= np.abs(A8).max()
    for op, limit in ((A8, max_iters), (A, max_iters)):
        for _ in range(limit):
            z = op @ v
            nz = np.linalg.norm(z)
            if nz == 0:
                break
            z /= nz
            done = np.linalg.norm(z - v) <= tol
            v = z
            if done:
                break
    Mv = M @ v
    sigma = float(np.linalg.norm(Mv))
    if sigma == 0:
        raise ZeroDualMatrixError("power iteration collapsed onto the null space")
    return Mv / sigma, sigma, v


def learn_weak_model(Q, data, E, tol=1e-10, max_iters=20000, seed=0) -> WeakModel:
    """Rank-one weak model maximising the dual violation under ``Q``."""
    u, _, v = top_singular_pair(weak_learner_matrix(Q, data, E), tol, max_iters, seed)
    return WeakModel.from_vectors(u, v)


def violation_score(h: WeakModel, Q, data, E) -> float:
    """sum_{i,r} Q[i, r] (h(x_i, y_i) - h(x_i, r))."""
    return float(dual_violations(Ensemble([h], [0.0]), Q, data, E)[0])


class _WeightProblem:
    """Objective and gradient of the weight subproblem for fixed models and ``s``.

    Seen-class margins and the covariances are affine in ``w``, so their
    Jacobians are precomputed once per solve: ``rho_s = J w + D_s`` and
    ``cov = H w``. This is the hot loop of training. When ``J`` would exceed
    ``JACOBIAN_LIMIT`` entries the margins are rebuilt from the rank-one
    factors on every call instead.
    """

    JACOBIAN_LIMIT = 8_000_000

    def __init__(self, ens, data, E, delta, split, s, hp):
        seen, unseen = _cols(split.seen), _cols(split.unseen)
        if unseen.size < 2:
            raise DegenerateTargetSetError("at least two unseen classes are required")
        P = data.features @ ens.U
        G = E.matrix @ ens.V
        y = data.labels - 1
        D_y = delta.matrix[y]
        D_t = D_y[:, unseen]
        Dc = D_t - D_t.mean(axis=1, keepdims=True)
        N, K, n_s = P.shape[0], P.shape[1], seen.size
        # cov_i = cov(Delta_t, F_t) = sum_j w_j P_ij <Dc_i, G_t[:, j]> / |Y_T|
        self.H = P * (Dc @ G[unseen]) / unseen.size
        self.D_s = D_y[:, seen]
        self.shape = (N, n_s)
        if N * n_s * K <= self.JACOBIAN_LIMIT:
            J = P[:, None, :] * (G[seen][None, :, :] - G[y][:, None, :])
            self.J = J.reshape(N * n_s, K)
        else:
            self.J = None
            self.P, self.Gy, self.G_s = P, G[y], G[seen]
        self.hp = hp
        self.s = np.asarray(s, dtype=float)

    def _seen_margins(self, w):
        if self.J is not None:
            return (self.J @ w).reshape(self.shape) + self.D_s
        Pw = self.P * w
        return Pw @ self.G_s.T - np.einsum("ij,ij->i", Pw, self.Gy)[:, None] + self.D_s

    def state(self, w):
        rho_s = self._seen_margins(w)
        cov = self.H @ w
        l = softplus(rho_s).sum(axis=1) + self.hp.beta * softplus(cov)
        f = float(np.dot(self.s, l) + self.hp.nu * np.sum(w))
        return f, rho_s, cov

    def value(self, w):
        return self.state(w)[0]

    def gradient(self, rho_s, cov):
        Q_s = self.s[:, None] * expit(rho_s)
        g_cov = self.H.T @ (self.hp.beta * self.s * expit(cov))
        if self.J is not None:
            return self.hp.nu + self.J.T @ Q_s.ravel() + g_cov
        B = Q_s.sum(axis=1)[:, None] * self.Gy - Q_s @ self.G_s
        return self.hp.nu - np.einsum("ij,ij->j", self.P, B) + g_cov


def weight_objective(ens, data, E, delta, split, s, hp, w=None) -> float:
    """sum_i s_i l_i(w) + nu * |w|_1 for the ensemble's models (its own weights by default)."""
    w = ens.weights if w is None else np.asarray(w, dtype=float)
    return _WeightProblem(ens, data, E, delta, split, s, hp).value(w)


def solve_w(ens: Ensemble, data, E, delta, split, s, hp: Hyperparams,
            settings: SolverSettings = SolverSettings(), w0=None) -> SolveResult:
    """Minimise the weight subproblem over ``w >= 0`` by projected gradient descent.

    Spectral projected gradient: the trial step is the Barzilai-Borwein length
    (or the last one times ``settings.grow`` when curvature is not positive),
    projected onto the orthant, then backtracked by ``settings.shrink`` until
    a non-monotone Armijo condition over the last ``settings.memory``
    objective values holds. The best iterate is returned, so the result never
    has a higher objective than the warm start ``w0`` (default: the ensemble's
    weights). Stops when the projected-gradient norm is at most
    ``settings.grad_tol``.
    """
    if not len(ens):
        raise ValidationError("solve_w needs at least one weak model")
    prob = _WeightProblem(ens, data, E, delta, split, s, hp)
    w = np.maximum(np.array(ens.weights if w0 is None else w0, dtype=float), 0.0)
    f, rho_s, cov = prob.state(w)
    g = prob.gradient(rho_s, cov)
    f0 = f
    best_f, best_w, best_pg = f, w, np.inf
    recent = [f]
    gnorm = np.linalg.norm(g)
    step = 1.0 / gnorm if gnorm > 0 else 1.0
    converged = False
    n_iter = 0
    while True:
        pg = float(np.linalg.norm(w - np.maximum(w - g, 0.0)))
        if f <= best_f:
            best_f, best_w, best_pg = f, w, pg
        if pg <= settings.grad_tol:
            converged = True
            break
        if n_iter >= settings.max_iters:
            break
        n_iter += 1
        step = min(max(step, STEP_MIN), STEP_MAX)
        d = np.maximum(w - step * g, 0.0) - w
        slope = float(np.dot(g, d))
        if slope >= 0:
            break
        f_ref = max(recent[-settings.memory:])
        a = 1.0
        while True:
            w_new = w + a * d
            f_new, rho_s, cov = prob.state(w_new)
            if f_new <= f_ref + settings.armijo * a * slope:
                break
            a *= settings.shrink
            if a * np.max(np.abs(d)) < 1e-300:
                w_new = None
                break
        if w_new is None:
            break
        g_new = prob.gradient(rho_s, cov)
        sk, yk = w_new - w, g_new - g
        sy = float(np.dot(sk, yk))
        step = float(np.dot(sk, sk)) / sy if sy > 0 else step * settings.grow
        w, f, g = w_new, f_new, g_new
        recent.append(f)
    return SolveResult(best_w, converged and best_w is w, n_iter, best_f, f0, best_pg)


def kkt_residual(w, Q, ens: Ensemble, data, E, hp: Hyperparams) -> KKTResidual:
    """Dual-feasibility and complementary-slackness residuals at ``w``.

    ``Q`` must be recomputed at ``w``. Returns the largest ``violation_j - nu``
    and the largest ``|w_j (nu - violation_j)|``.
    """
    if not len(ens):
        return KKTResidual(0.0, 0.0)
    w = np.asarray(w, dtype=float)
    viol = dual_violations(ens, Q, data, E)
    return KKTResidual(float(np.max(viol - hp.nu)), float(np.max(np.abs(w * (hp.nu - viol)))))
