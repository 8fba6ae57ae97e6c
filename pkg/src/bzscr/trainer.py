"""Alternating boosting / self-paced training loop, evaluation and the beta sweep."""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .boosting import (
    SolverSettings,
    compute_Q,
    learn_weak_model,
    solve_w,
    violation_score,
)
from .data import ClassSplit, Dataset, DivergenceMatrix, LabelEmbeddings, validation_split
from .errors import TrivialProblemError, ValidationError, ZeroDualMatrixError
from .objective import Hyperparams, sample_costs, total_objective
from .scoring import Ensemble, compute_margins, predict_batch
from .selection import PaceParams, anneal, initial_pace, update_all_s

__all__ = [
    "TrainConfig",
    "IterationRecord",
    "TrainTrace",
    "EvalReport",
    "train",
    "train_boosting_only",
    "evaluate",
    "sweep_beta",
    "write_trace_csv",
    "write_report_json",
    "write_sweep_csv",
    "TRACE_COLUMNS",
]

log = logging.getLogger(__name__)

TRACE_COLUMNS = ("iter", "objective", "train_er", "val_er", "mean_cov", "selected",
                 "violation", "lambda")


@dataclass(frozen=True)
class TrainConfig:
    """Training configuration.

    ``nu_over_n`` and ``beta_over_n`` are multiplied by the number of fitting
    samples to obtain the absolute strengths.
    """

    nu_over_n: float = 1e-3
    beta_over_n: float = 0.2
    pace: PaceParams = field(default_factory=PaceParams)
    settings: SolverSettings = field(default_factory=SolverSettings)
    t_es: int = 20
    max_iters_outer: int = 500
    seed: int = 0

    def __post_init__(self):
        if self.t_es < 1:
            raise ValidationError("t_es must be at least 1")
        if self.max_iters_outer < 1:
            raise ValidationError("max_iters_outer must be at least 1")
        if not (self.nu_over_n >= 0 and self.beta_over_n >= 0):
            raise ValidationError("nu_over_n and beta_over_n must be non-negative")


@dataclass
class IterationRecord:
    iter: int
    objective: float
    train_er: float
    val_er: float
    mean_cov: float
    selected: int
    violation: float
    lam: float
    # objective at the iteration's (lambda, zeta) after each sub-step
    objective_added: float = np.nan
    objective_after_w: float = np.nan
    w_converged: bool = True
    test_er: float | None = None


@dataclass
class TrainTrace:
    records: list = field(default_factory=list)
    stop_reason: str = ""
    final_violation: float = np.nan
    best_iter: int = 0
    nu: float = 0.0
    beta: float = 0.0
    n_fit: int = 0

    def __len__(self):
        return len(self.records)

    def column(self, name):
        return np.array([getattr(r, name) for r in self.records])


class EvalReport(NamedTuple):
    error_rate: float
    mean_delta: float
    per_class: dict


class _ClassSets(NamedTuple):
    seen: tuple
    unseen: tuple


def _error_rate(ens, data, E, candidates):
    return float(np.mean(predict_batch(ens, data.features, E, candidates) != data.labels))


def _train(data: Dataset, E: LabelEmbeddings, split: ClassSplit, delta: DivergenceMatrix,
           config: TrainConfig, test: Dataset | None, self_paced: bool):
    if E.class_count != split.n_classes or delta.class_count != split.n_classes:
        raise ValidationError("embeddings, divergence and split disagree on the class count")
    if data.feature_dim < 1 or len(split.unseen) < 2:
        raise ValidationError("at least two unseen classes are required")
    fit, val, fit_classes, val_classes = validation_split(data, split, config.seed)
    if val is None:
        raise ValidationError("validation partition is empty")
    sets = _ClassSets(fit_classes, split.unseen)
    N = fit.n_samples
    hp = Hyperparams.per_sample(config.nu_over_n, config.beta_over_n, N)
    settings = config.settings
    trace = TrainTrace(nu=hp.nu, beta=hp.beta, n_fit=N)

    ens = Ensemble(feature_dim=data.feature_dim, embed_dim=E.embed_dim)
    s = np.ones(N)
    Q = np.ones((N, E.class_count))
    margins = compute_margins(ens, fit, E, delta)
    costs = sample_costs(margins, delta, sets, hp)
    pace = initial_pace(config.pace, costs) if self_paced else config.pace
    history = []

    for t in range(1, config.max_iters_outer + 1):
        try:
            h = learn_weak_model(Q, fit, E, settings.power_tol, settings.power_max_iters)
        except ZeroDualMatrixError:
            if t == 1:
                raise TrivialProblemError("the initial dual matrix yields no weak model") from None
            trace.stop_reason = "zero-dual"
            trace.final_violation = 0.0
            break
        violation = violation_score(h, Q, fit, E)
        if violation < hp.nu + settings.epsilon:
            trace.stop_reason = "tolerance"
            trace.final_violation = violation
            break

        ens = ens.append(h, 0.0)
        obj_added = total_objective(costs, s, pace, ens.weights, hp)

        res = solve_w(ens, fit, E, delta, sets, s, hp, settings)
        ens = ens.with_weights(res.w)
        margins = compute_margins(ens, fit, E, delta)
        costs = sample_costs(margins, delta, sets, hp)
        obj_after_w = total_objective(costs, s, pace, ens.weights, hp)

        Q = compute_Q(margins, costs, s, delta, sets, hp)
        if self_paced:
            s = update_all_s(costs, pace)
        obj = total_objective(costs, s, pace, ens.weights, hp)

        rec = IterationRecord(
            iter=t,
            objective=obj,
            train_er=_error_rate(ens, fit, E, fit_classes),
            val_er=_error_rate(ens, val, E, val_classes),
            mean_cov=float(np.mean(costs.cov)),
            selected=int(np.count_nonzero(s > 0)),
            violation=violation,
            lam=pace.lam,
            objective_added=obj_added,
            objective_after_w=obj_after_w,
            w_converged=res.converged,
            test_er=None if test is None else _error_rate(ens, test, E, split.unseen),
        )
        trace.records.append(rec)
        history.append(ens.weights.copy())
        log.debug("iter %d obj %.6g val_er %.4f selected %d", t, obj, rec.val_er, rec.selected)

        prev = [r.val_er for r in trace.records[:-1]]
        if t >= config.t_es and prev and rec.val_er > min(prev):
            trace.stop_reason = "early-stop"
            break
        if self_paced:
            pace = anneal(pace, costs, t)
    else:
        trace.stop_reason = "max-iters"

    if not trace.records:
        return Ensemble(feature_dim=data.feature_dim, embed_dim=E.embed_dim), trace
    k = int(np.argmin([r.val_er for r in trace.records])) + 1
    trace.best_iter = k
    return ens.truncate(k).with_weights(history[k - 1]), trace


def train(data: Dataset, embeddings: LabelEmbeddings, split: ClassSplit, delta: DivergenceMatrix,
          config: TrainConfig = TrainConfig(), test: Dataset | None = None):
    """Fit a boosted zero-shot classifier with SCR and self-paced selection.

    Each outer iteration adds the weak model that most violates the dual
    constraint, re-solves the weights with the previous sample weights,
    recomputes the dual matrix, updates the sample weights, measures the
    validation error and anneals the pace. Training stops when no weak model
    violates the dual by ``nu + epsilon``, on early stopping after
    ``config.t_es`` iterations, or after ``config.max_iters_outer``.

    ``test`` (unseen-class samples) is only used to fill ``test_er`` in the
    trace; it never influences training.

    Returns
    -------
    ensemble : Ensemble
        Truncated to the iteration with the lowest validation error.
    trace : TrainTrace
    """
    return _train(data, embeddings, split, delta, config, test, self_paced=True)


def train_boosting_only(data, embeddings, split, delta, config: TrainConfig = TrainConfig(),
                        test=None):
    """As :func:`train` with all sample weights pinned to 1 and no annealing."""
    return _train(data, embeddings, split, delta, config, test, self_paced=False)


def evaluate(ens: Ensemble, test: Dataset, embeddings: LabelEmbeddings, delta: DivergenceMatrix,
             candidates) -> EvalReport:
    """Error rate, mean divergence of predictions, and per-class accuracy.

    ``candidates`` is normally the unseen class set.
    """
    if test is None or test.n_samples == 0:
        raise ValidationError("test set is empty")
    pred = predict_batch(ens, test.features, embeddings, candidates)
    wrong = pred != test.labels
    per_class = {int(c): float(np.mean(~wrong[test.labels == c]))
                 for c in np.unique(test.labels)}
    return EvalReport(float(np.mean(wrong)), float(np.mean(delta.matrix[test.labels - 1, pred - 1])),
                      per_class)


def sweep_beta(base_config: TrainConfig, beta_grid, data, embeddings, split, delta, test):
    """Train and evaluate once per ``beta/N`` value with the base seed.

    Returns a list of ``(beta_over_n, test_er, mean_delta)`` rows.
    """
    grid = list(beta_grid)
    if not grid:
        raise ValidationError("beta grid is empty")
    rows = []
    for b in grid:
        cfg = replace(base_config, beta_over_n=float(b))
        ens, _ = train(data, embeddings, split, delta, cfg)
        rep = evaluate(ens, test, embeddings, delta, split.unseen)
        rows.append((float(b), rep.error_rate, rep.mean_delta))
    return rows


# ---------------------------------------------------------------------------
# output files


def _fmt(x):
    return repr(float(x))


def write_trace_csv(path, trace: TrainTrace):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(TRACE_COLUMNS)
        for r in trace.records:
            wr.writerow([r.iter, _fmt(r.objective), _fmt(r.train_er), _fmt(r.val_er),
                         _fmt(r.mean_cov), r.selected, _fmt(r.violation), _fmt(r.lam)])


def write_report_json(path, report: EvalReport):
    """Write ``report.json``; per-class keys are 0-based like all files."""
    doc = {
        "error_rate": report.error_rate,
        "mean_delta": report.mean_delta,
        "per_class": {str(c - 1): acc for c, acc in sorted(report.per_class.items())},
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def write_sweep_csv(path, rows):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(("beta_over_n", "test_er", "mean_delta"))
        for b, er, md in rows:
            wr.writerow([_fmt(b), _fmt(er), _fmt(md)])
