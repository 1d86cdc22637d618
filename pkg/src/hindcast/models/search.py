"""Hyperparameter grids and validation-driven selection."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DegenerateLabelError, DivergenceError, GridError
from ..metrics import auroc
from .base import TrainedModel
from .linear import fit_lr, importance_lr, predict_lr
from .neural import fit_mlp, importance_mlp, predict_mlp
from .trees import fit_gbdt, importance_gbdt, predict_gbdt

FAMILIES = ("lr", "gbdt", "mlp")

# default grids: 8 LR, 8 GBDT, 6 MLP candidates
DEFAULT_GRIDS = {
    "lr": {"C": [0.01, 0.1, 1.0, 10.0, 1e2, 1e3, 1e4, 1e5]},
    "gbdt": {
        "n_estimators": [50, 100],
        "max_depth": [3, 5],
        "learning_rate": [0.01, 0.1],
    },
    "mlp": {
        "hidden_layer_size": [3, 5],
        "learning_rate_init": [1e-4, 1e-3, 1e-2],
    },
}

_FITTERS = {
    "lr": lambda X, y, hp, seed: fit_lr(X, y, seed=seed, **hp),
    "gbdt": lambda X, y, hp, seed: fit_gbdt(X, y, seed=seed, **hp),
    "mlp": lambda X, y, hp, seed: fit_mlp(X, y, seed=seed, **hp),
}

_PREDICTORS = {"lr": predict_lr, "gbdt": predict_gbdt, "mlp": predict_mlp}
_IMPORTANCES = {"lr": importance_lr, "gbdt": importance_gbdt, "mlp": importance_mlp}


@dataclass(frozen=True)
class HyperGrid:
    """Per-family candidate lists, enumerated in declaration order."""

    grids: dict = field(default_factory=lambda: {k: dict(v) for k, v in DEFAULT_GRIDS.items()})

    def candidates(self, family: str):
        if family not in self.grids:
            raise GridError(f"no grid for family {family!r}")
        grid = self.grids[family]
        keys = list(grid)
        combos = [{}]
        for key in keys:
            combos = [dict(c, **{key: v}) for c in combos for v in grid[key]]
        if not combos or not all(grid.values()):
            raise GridError(f"empty grid for family {family!r}")
        return combos


def predict_scores(model: TrainedModel, X) -> np.ndarray:
    """Score rows with any trained family; pure, output in [0, 1]."""
    return _PREDICTORS[model.family](model, X)


def importance(model: TrainedModel) -> np.ndarray:
    """Nonnegative per-feature scores: |w| (LR), split gain (GBDT), mean |W1| (MLP)."""
    return _IMPORTANCES[model.family](model)


def fit_family(family, X, y, hyperparameters, seed) -> TrainedModel:
    if family not in FAMILIES:
        raise GridError(f"unknown family {family!r}")
    return _FITTERS[family](X, y, hyperparameters, seed)


def grid_search(family, grid: HyperGrid, X_train, y_train, X_val, y_val, seed,
                retry_divergence=True):
    """Fit every candidate, keep the best validation AUROC.

    Ties break toward the earlier grid entry. When the validation slice has a
    single class the candidates are ranked by training objective instead and
    the result is flagged ``val_single_class``. Diverging MLP candidates are
    retried once at a tenth of the step size, then skipped with a flag.

    Returns (model, flags) where flags is a list of strings.
    """
    flags = []
    y_val = np.asarray(y_val).ravel()
    val_usable = y_val.size > 0 and np.unique(y_val).size > 1
    if not val_usable:
        flags.append("val_single_class")

    best_key = None
    best_model = None
    for hp in grid.candidates(family):
        try:
            model = fit_family(family, X_train, y_train, hp, seed)
        except DivergenceError:
            if retry_divergence and "learning_rate_init" in hp:
                reduced = dict(hp, learning_rate_init=hp["learning_rate_init"] / 10.0)
                try:
                    model = fit_family(family, X_train, y_train, reduced, seed)
                    flags.append("retried_lower_lr")
                except DivergenceError:
                    flags.append("diverged")
                    continue
            else:
                flags.append("diverged")
                continue
        if val_usable:
            scores = predict_scores(model, X_val)
            m = auroc(scores, y_val)
            key = m.value if m.defined else -np.inf
        else:
            key = -model.metadata["final_objective"]
        if best_key is None or key > best_key:
            best_key = key
            best_model = model
    if best_model is None:
        raise GridError(f"no fittable candidate for family {family!r}")
    return best_model, flags
