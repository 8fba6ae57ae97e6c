"""Boosted zero-shot classification with semantic correlation regularization."""
from .boosting import (
    SolverSettings,
    compute_Q,
    kkt_residual,
    learn_weak_model,
    solve_w,
    top_singular_pair,
    violation_score,
    weak_learner_matrix,
)
from .data import (
    ClassSplit,
    Dataset,
    DivergenceMatrix,
    LabelEmbeddings,
    SyntheticSpec,
    cosine_divergence,
    generate_synthetic,
    load_dataset,
    path_divergence,
    save_dataset,
)
from .errors import *  # noqa: F401,F403
from .objective import (
    Hyperparams,
    SampleCosts,
    covariance_term,
    logistic_loss,
    logistic_loss_grad,
    objective_gradient_w,
    sample_costs,
    scr_penalty,
    total_objective,
)
from .scoring import (
    Ensemble,
    WeakModel,
    compute_margins,
    ensemble_score,
    load_model,
    predict,
    save_model,
    weak_score,
)
from .selection import PaceParams, anneal, g_value, optimal_s, update_all_s
from .trainer import (
    EvalReport,
    TrainConfig,
    TrainTrace,
    evaluate,
    sweep_beta,
    train,
    train_boosting_only,
)

__version__ = "0.1.0"
