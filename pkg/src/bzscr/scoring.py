"""Rank-one bilinear weak models, the boosted ensemble score, margins and prediction."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import Dataset, DivergenceMatrix, LabelEmbeddings
from .errors import LoadError, ValidationError

__all__ = [
    "WeakModel",
    "Ensemble",
    "MarginMatrix",
    "weak_score",
    "ensemble_score",
    "score_matrix",
    "compute_margins",
    "predict",
    "predict_batch",
    "dual_violations",
    "save_model",
    "load_model",
]

UNIT_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class WeakModel:
    """h(x, y) = (x . u) * (v . phi(y)) with unit vectors u (length m) and v (length d)."""

    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        u = np.array(self.u, dtype=float).ravel()
        v = np.array(self.v, dtype=float).ravel()
        for name, a in (("u", u), ("v", v)):
            if abs(np.linalg.norm(a) - 1.0) > UNIT_TOL:
                raise ValidationError(f"{name} must have unit norm, got {np.linalg.norm(a)!r}")
        u.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)

    @classmethod
    def from_vectors(cls, u, v) -> "WeakModel":
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        return cls(u / np.linalg.norm(u), v / np.linalg.norm(v))


class Ensemble:
    """Ordered weak models with non-negative weights.

    Instances are treated as immutable; :meth:`append`, :meth:`with_weights`
    and :meth:`truncate` return new ensembles.
    """

    def __init__(self, models=(), weights=None, feature_dim=None, embed_dim=None):
        self.models = tuple(models)
        w = np.zeros(len(self.models)) if weights is None else np.array(weights, dtype=float).ravel()
        if w.shape != (len(self.models),):
            raise ValidationError(f"{len(self.models)} models but {w.size} weights")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValidationError("ensemble weights must be finite and non-negative")
        w.setflags(write=False)
        self.weights = w
        if self.models:
            feature_dim = self.models[0].u.size
            embed_dim = self.models[0].v.size
            for h in self.models:
                if h.u.size != feature_dim or h.v.size != embed_dim:
                    raise ValidationError("weak models have inconsistent dimensions")
        self.feature_dim = feature_dim
        self.embed_dim = embed_dim

    def __len__(self):
        return len(self.models)

    def __repr__(self):
        return f"Ensemble(K={len(self)}, feature_dim={self.feature_dim}, embed_dim={self.embed_dim})"

    @property
    def U(self) -> np.ndarray:
        """Stacked feature directions, m x K."""
        if not self.models:
            return np.zeros((self.feature_dim or 0, 0))
        return np.column_stack([h.u for h in self.models])

    @property
    def V(self) -> np.ndarray:
        """Stacked embedding directions, d x K."""
        if not self.models:
            return np.zeros((self.embed_dim or 0, 0))
        return np.column_stack([h.v for h in self.models])

    def append(self, h: WeakModel, weight=0.0) -> "Ensemble":
        return Ensemble(self.models + (h,), np.append(self.weights, weight),
                        h.u.size, h.v.size)

    def with_weights(self, weights) -> "Ensemble":
        return Ensemble(self.models, weights, self.feature_dim, self.embed_dim)

    def truncate(self, k: int) -> "Ensemble":
        return Ensemble(self.models[:k], self.weights[:k], self.feature_dim, self.embed_dim)


def weak_score(h: WeakModel, x, r: int, E: LabelEmbeddings) -> float:
    return float(np.dot(x, h.u) * np.dot(h.v, E[r]))


def ensemble_score(ens: Ensemble, x, r: int, E: LabelEmbeddings) -> float:
    if not len(ens):
        return 0.0
    x = np.asarray(x, dtype=float)
    return float(np.sum(ens.weights * (x @ ens.U) * (E[r] @ ens.V)))


def weak_factors(ens: Ensemble, X, E: LabelEmbeddings):
    """Per-model factors ``P = X U`` (N x K) and ``G = Phi V`` (C x K).

    ``h_j(x_i, r) = P[i, j] * G[r - 1, j]``.
    """
    return np.asarray(X, dtype=float) @ ens.U, E.matrix @ ens.V


def score_matrix(ens: Ensemble, X, E: LabelEmbeddings) -> np.ndarray:
    """F(x_i, r) for every sample row of ``X`` and every class, N x C."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    # zero-weight models are skipped so that they change no score bit
    active = np.flatnonzero(ens.weights)
    if not active.size:
        return np.zeros((X.shape[0], E.class_count))
    U, V = ens.U[:, active], ens.V[:, active]
    return ((X @ U) * ens.weights[active]) @ (E.matrix @ V).T


@dataclass(frozen=True, eq=False)
class MarginMatrix:
    """Margins rho (N x C), the raw scores F they derive from, and the 1-based labels."""

    rho: np.ndarray
    scores: np.ndarray
    labels: np.ndarray

    @property
    def label_index(self) -> np.ndarray:
        return self.labels - 1


def margins_from_scores(F, labels, delta: DivergenceMatrix) -> MarginMatrix:
    labels = np.asarray(labels)
    rows = np.arange(labels.size)
    y = labels - 1
    rho = F - F[rows, y][:, None] + delta.matrix[y]
    # exact zero on the true-class column regardless of rounding
    rho[rows, y] = 0.0
    return MarginMatrix(rho, F, labels)


def compute_margins(ens: Ensemble, data: Dataset, E: LabelEmbeddings,
                    delta: DivergenceMatrix) -> MarginMatrix:
    """rho[i, r] = F(x_i, r) - F(x_i, y_i) + Delta(y_i, r) for all samples and classes."""
    return margins_from_scores(score_matrix(ens, data.features, E), data.labels, delta)


def predict_batch(ens: Ensemble, X, E: LabelEmbeddings, candidates) -> np.ndarray:
    """Argmax of F over ``candidates`` for every row of ``X``; ties go to the lowest class."""
    cand = np.array(sorted(int(c) for c in candidates))
    if cand.size == 0:
        raise ValidationError("candidate class set is empty")
    F = score_matrix(ens, X, E)[:, cand - 1]
    return cand[np.argmax(F, axis=1)]


def predict(ens: Ensemble, x, E: LabelEmbeddings, candidates) -> int:
    return int(predict_batch(ens, np.atleast_2d(x), E, candidates)[0])


def dual_violations(ens: Ensemble, Q, data: Dataset, E: LabelEmbeddings) -> np.ndarray:
    """sum_{i,r} Q[i, r] * (h_j(x_i, y_i) - h_j(x_i, r)) for every model j.

    Vectorised as ``sum_i P[i, j] * (rowsum(Q)_i G[y_i, j] - (Q G)[i, j])``.
    """
    if not len(ens):
        return np.zeros(0)
    P, G = weak_factors(ens, data.features, E)
    Q = np.asarray(Q, dtype=float)
    B = Q.sum(axis=1)[:, None] * G[data.labels - 1] - Q @ G
    return np.einsum("ij,ij->j", P, B)


# ---------------------------------------------------------------------------
# model.json


def save_model(path, ens: Ensemble):
    doc = {
        "weights": [float(w) for w in ens.weights],
        "models": [{"u": [float(a) for a in h.u], "v": [float(a) for a in h.v]}
                   for h in ens.models],
        "feature_dim": ens.feature_dim,
        "embed_dim": ens.embed_dim,
    }
    # json emits shortest round-trip reprs, so floats survive exactly
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def load_model(path) -> Ensemble:
    path = Path(path)
    if not path.exists():
        raise LoadError("model file not found", path)
    try:
        doc = json.loads(path.read_text())
        models = [WeakModel(m["u"], m["v"]) for m in doc["models"]]
        ens = Ensemble(models, doc["weights"], doc["feature_dim"], doc["embed_dim"])
    except (KeyError, TypeError, ValueError) as exc:
        raise LoadError(f"invalid model file ({exc})", path) from None
    if ens.feature_dim != doc["feature_dim"] or ens.embed_dim != doc["embed_dim"]:
        raise LoadError("declared dimensions disagree with weak models", path)
    return ens
