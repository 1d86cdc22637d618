"""Native tabular model families with a uniform fit/score/importance surface."""

from .base import TrainedModel
from .linear import fit_lr, lr_objective_and_grad, sigmoid
from .neural import fit_mlp, mlp_loss_and_grads
from .search import (
    DEFAULT_GRIDS,
    FAMILIES,
    HyperGrid,
    fit_family,
    grid_search,
    importance,
    predict_scores,
)
from .trees import fit_gbdt

__all__ = [
    "TrainedModel",
    "fit_lr",
    "fit_gbdt",
    "fit_mlp",
    "lr_objective_and_grad",
    "mlp_loss_and_grads",
    "sigmoid",
    "DEFAULT_GRIDS",
    "FAMILIES",
    "HyperGrid",
    "fit_family",
    "grid_search",
    "importance",
    "predict_scores",
]
