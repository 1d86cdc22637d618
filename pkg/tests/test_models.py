import numpy as np
import pytest

from hindcast.errors import DegenerateLabelError, GridError, ShapeError
from hindcast.metrics import auroc
from hindcast.models import (
    DEFAULT_GRIDS,
    HyperGrid,
    TrainedModel,
    fit_gbdt,
    fit_lr,
    fit_mlp,
    grid_search,
    importance,
    lr_objective_and_grad,
    mlp_loss_and_grads,
    predict_scores,
)


def central_diff_grad(f, x, eps=1e-5):
    grad = np.zeros_like(x)
    for i in range(x.size):
        up = x.copy(); up[i] += eps
        down = x.copy(); down[i] -= eps
        grad[i] = (f(up) - f(down)) / (2 * eps)
    return grad


# ---- logistic regression ----------------------------------------------------

def test_lr_separable_fits_cleanly():
    X = np.array([[-1.0], [1.0]])
    y = np.array([0.0, 1.0])
    model = fit_lr(X, y, C=1e5)
    scores = predict_scores(model, X)
    assert np.all((scores > 0.5) == (y == 1))
    assert model.metadata["final_objective"] < 0.01


def test_lr_intercept_only_matches_closed_form():
    rng = np.random.default_rng(0)
    n = 2000
    X = rng.standard_normal((n, 3))
    y = (rng.random(n) < 0.5).astype(float)
    model = fit_lr(X, y, C=1.0)
    logit = np.log(np.mean(y) / (1 - np.mean(y)))
    assert model.params["intercept"] == pytest.approx(logit, abs=0.05)
    # stronger regularization shrinks the noise weights
    small = fit_lr(X, y, C=1e-4)
    assert np.linalg.norm(small.params["weights"]) < np.linalg.norm(model.params["weights"]) + 1e-9


def test_lr_gradient_zero_at_optimum():
    rng = np.random.default_rng(1)
    X = rng.standard_normal((60, 4))
    y = (rng.random(60) < 0.4).astype(float)
    model = fit_lr(X, y, C=1.0)
    params = np.concatenate([model.params["weights"], [model.params["intercept"]]])
    _, grad = lr_objective_and_grad(params, X, y, 1.0)
    fd = central_diff_grad(lambda p: lr_objective_and_grad(p, X, y, 1.0)[0], params)
    assert np.max(np.abs(grad - fd)) < 1e-4
    assert np.max(np.abs(grad)) < 1e-5


def test_lr_analytic_gradient_matches_finite_differences():
    rng = np.random.default_rng(2)
    for _ in range(20):
        n, d = int(rng.integers(5, 30)), int(rng.integers(1, 6))
        X = rng.standard_normal((n, d))
        y = rng.integers(0, 2, n).astype(float)
        if np.unique(y).size < 2:
            continue
        params = rng.standard_normal(d + 1)
        C = float(rng.choice([0.1, 1.0, 10.0]))
        _, grad = lr_objective_and_grad(params, X, y, C)
        fd = central_diff_grad(lambda p: lr_objective_and_grad(p, X, y, C)[0], params)
        assert np.max(np.abs(grad - fd)) < 1e-4


def test_lr_loss_never_exceeds_zero_params():
    rng = np.random.default_rng(3)
    for trial in range(10):
        n, d = int(rng.integers(10, 80)), int(rng.integers(1, 8))
        X = rng.standard_normal((n, d))
        y = rng.integers(0, 2, n).astype(float)
        if np.unique(y).size < 2:
            continue
        C = float(rng.choice([0.01, 1.0, 100.0]))
        model = fit_lr(X, y, C=C)
        at_zero, _ = lr_objective_and_grad(np.zeros(d + 1), X, y, C)
        assert model.metadata["final_objective"] <= at_zero + 1e-12


def test_lr_single_class_raises():
    with pytest.raises(DegenerateLabelError):
        fit_lr(np.ones((4, 2)), np.ones(4), C=1.0)


def test_lr_score_hand_computed():
    model = fit_lr(np.array([[0.0, 1.0], [1.0, 0.0], [0.5, 0.5], [-1.0, 2.0]]),
                   np.array([0.0, 1.0, 0.0, 1.0]), C=1.0)
    w = model.params["weights"]
    b = model.params["intercept"]
    row = np.array([[0.3, -0.7]])
    expected = 1.0 / (1.0 + np.exp(-(w @ row[0] + b)))
    assert predict_scores(model, row)[0] == pytest.approx(expected, abs=1e-15)


def test_lr_zero_params_score_half():
    model = TrainedModel("lr", {"C": 1.0}, ("a", "b"),
                         {"weights": np.zeros(2), "intercept": 0.0})
    assert np.all(predict_scores(model, np.random.randn(5, 2)) == 0.5)


def test_lr_shape_error():
    model = fit_lr(np.random.randn(10, 3), np.array([0, 1] * 5, dtype=float), C=1.0)
    with pytest.raises(ShapeError):
        predict_scores(model, np.random.randn(4, 2))


def test_lr_determinism():
    rng = np.random.default_rng(4)
    X = rng.standard_normal((50, 5))
    y = rng.integers(0, 2, 50).astype(float)
    a = fit_lr(X, y, C=10.0, seed=1)
    b = fit_lr(X, y, C=10.0, seed=1)
    assert np.array_equal(a.params["weights"], b.params["weights"])
    assert a.params["intercept"] == b.params["intercept"]


# ---- gradient boosting -------------------------------------------------------

def test_gbdt_xor_reaches_perfect_training_accuracy():
    X = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
    y = np.array([0.0, 1.0, 1.0, 0.0])
    # brute-force check that a depth-2 tree can represent XOR
    # (split on x0, then on x1 in each child -> four pure leaves)
    model = fit_gbdt(X, y, n_estimators=50, max_depth=2, learning_rate=0.1)
    scores = predict_scores(model, X)
    assert np.all((scores > 0.5) == (y == 1))


def test_gbdt_shrinkage_limit_is_base_score():
    rng = np.random.default_rng(5)
    X = rng.standard_normal((40, 3))
    y = (rng.random(40) < 0.3).astype(float)
    model = fit_gbdt(X, y, n_estimators=1, max_depth=2, learning_rate=1e-9)
    scores = predict_scores(model, X)
    assert np.allclose(scores, np.mean(y), atol=1e-6)
    with pytest.raises(ValueError):
        fit_gbdt(X, y, n_estimators=0, max_depth=2, learning_rate=0.1)


def test_gbdt_training_loss_monotone():
    rng = np.random.default_rng(6)
    X = rng.standard_normal((120, 5))
    logits = X[:, 0] * 2 - X[:, 1]
    y = (rng.random(120) < 1 / (1 + np.exp(-logits))).astype(float)
    model = fit_gbdt(X, y, n_estimators=60, max_depth=3, learning_rate=0.1)
    losses = model.metadata["stage_losses"]
    assert all(b <= a + 1e-12 for a, b in zip(losses[:-1], losses[1:]))


def test_gbdt_single_informative_feature_dominates_gain():
    rng = np.random.default_rng(7)
    n = 400
    X = rng.standard_normal((n, 5))
    y = (X[:, 2] + 0.1 * rng.standard_normal(n) > 0).astype(float)
    model = fit_gbdt(X, y, n_estimators=20, max_depth=3, learning_rate=0.1)
    gains = importance(model)
    assert gains[2] / gains.sum() > 0.9


def test_gbdt_determinism():
    rng = np.random.default_rng(8)
    X = rng.standard_normal((60, 4))
    y = rng.integers(0, 2, 60).astype(float)
    a = fit_gbdt(X, y, 10, 3, 0.1, seed=0)
    b = fit_gbdt(X, y, 10, 3, 0.1, seed=0)
    assert a.params["trees"] == b.params["trees"]


# ---- MLP ---------------------------------------------------------------------

def test_mlp_learns_and_dataset():
    X = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]] * 8)
    y = np.array([0.0, 0.0, 0.0, 1.0] * 8)
    model = fit_mlp(X, y, hidden_layer_size=3, learning_rate_init=0.5, seed=0)
    scores = predict_scores(model, X)
    assert np.all((scores > 0.5) == (y == 1))


def test_mlp_backprop_matches_finite_differences():
    rng = np.random.default_rng(9)
    X = rng.standard_normal((5, 4))
    y = rng.integers(0, 2, 5).astype(float)
    params = {
        "W1": rng.standard_normal((4, 3)) * 0.5,
        "b1": rng.standard_normal(3) * 0.1,
        "W2": rng.standard_normal(3) * 0.5,
        "b2": 0.2,
    }
    from hindcast.models.neural import mlp_loss

    _, grads = mlp_loss_and_grads(params, X, y)

    def flat(p):
        return np.concatenate([p["W1"].ravel(), p["b1"], p["W2"], [p["b2"]]])

    def unflat(v):
        W1 = v[:12].reshape(4, 3)
        return {"W1": W1, "b1": v[12:15], "W2": v[15:18], "b2": float(v[18])}

    fd = central_diff_grad(lambda v: mlp_loss(unflat(v), X, y), flat(params), eps=1e-6)
    analytic = flat({"W1": grads["W1"], "b1": grads["b1"], "W2": grads["W2"],
                     "b2": grads["b2"]})
    scale = max(np.max(np.abs(fd)), 1e-12)
    assert np.max(np.abs(analytic - fd)) / scale < 1e-3


def test_mlp_seed_determinism():
    rng = np.random.default_rng(10)
    X = rng.standard_normal((64, 4))
    y = rng.integers(0, 2, 64).astype(float)
    a = fit_mlp(X, y, 3, 0.01, seed=5, max_epochs=10)
    b = fit_mlp(X, y, 3, 0.01, seed=5, max_epochs=10)
    assert np.array_equal(a.params["W1"], b.params["W1"])
    assert np.array_equal(a.params["W2"], b.params["W2"])
    assert a.params["b2"] == b.params["b2"]


def test_mlp_single_class_raises():
    with pytest.raises(DegenerateLabelError):
        fit_mlp(np.ones((4, 2)), np.zeros(4), 3, 0.01)


# ---- shared surface ----------------------------------------------------------

def test_scores_in_unit_interval_and_pure():
    rng = np.random.default_rng(11)
    X = rng.standard_normal((30, 3))
    y = rng.integers(0, 2, 30).astype(float)
    for model in (fit_lr(X, y, C=1.0), fit_gbdt(X, y, 5, 2, 0.1),
                  fit_mlp(X, y, 3, 0.01, max_epochs=5)):
        scores = predict_scores(model, X)
        assert np.all(scores >= 0) and np.all(scores <= 1)
        dup = np.vstack([X, X[:1]])
        again = predict_scores(model, dup)
        assert again[-1] == again[0]


def test_importance_absolute_weights_and_permutation_equivariance():
    model = TrainedModel("lr", {"C": 1.0}, ("a", "b"),
                         {"weights": np.array([2.0, -3.0]), "intercept": 0.0})
    assert importance(model).tolist() == [2.0, 3.0]
    rng = np.random.default_rng(12)
    X = rng.standard_normal((200, 4))
    y = (X[:, 1] > 0).astype(float)
    base = importance(fit_lr(X, y, C=1.0))
    perm = [2, 0, 3, 1]
    permuted = importance(fit_lr(X[:, perm], y, C=1.0))
    assert np.allclose(permuted, base[perm], atol=1e-6)


def test_label_permutation_sanity():
    rng = np.random.default_rng(13)
    n = 600
    X = rng.standard_normal((n, 6))
    y = rng.permutation((np.arange(n) < n // 2).astype(float))
    model = fit_lr(X, y, C=1.0)
    val = auroc(predict_scores(model, X), y).value
    assert 0.35 < val < 0.65


# ---- grids and search ----------------------------------------------------------

def test_default_grid_cardinalities():
    grid = HyperGrid()
    assert len(grid.candidates("lr")) == 8
    assert len(grid.candidates("gbdt")) == 8
    assert len(grid.candidates("mlp")) == 6
    assert [c["C"] for c in grid.candidates("lr")] == [
        0.01, 0.1, 1.0, 10.0, 1e2, 1e3, 1e4, 1e5]
    gb = grid.candidates("gbdt")
    assert {(c["n_estimators"], c["max_depth"], c["learning_rate"]) for c in gb} == {
        (n, d, lr) for n in (50, 100) for d in (3, 5) for lr in (0.01, 0.1)}
    ml = grid.candidates("mlp")
    assert {(c["hidden_layer_size"], c["learning_rate_init"]) for c in ml} == {
        (h, lr) for h in (3, 5) for lr in (1e-4, 1e-3, 1e-2)}


def test_grid_of_one_returns_that_model():
    rng = np.random.default_rng(14)
    X = rng.standard_normal((40, 3))
    y = rng.integers(0, 2, 40).astype(float)
    grid = HyperGrid({"lr": {"C": [2.5]}})
    model, flags = grid_search("lr", grid, X, y, X, y, seed=0)
    assert model.hyperparameters == {"C": 2.5}
    assert flags == []


def test_grid_selects_better_validation_auroc():
    rng = np.random.default_rng(15)
    n, d = 60, 40
    X = rng.standard_normal((n, d))
    beta = np.zeros(d)
    beta[0] = 1.0
    y = (rng.random(n) < 1 / (1 + np.exp(-(X @ beta)))).astype(float)
    Xv = rng.standard_normal((400, d))
    yv = (rng.random(400) < 1 / (1 + np.exp(-(Xv @ beta)))).astype(float)
    grid = HyperGrid({"lr": {"C": [1e5, 0.01]}})
    model, _ = grid_search("lr", grid, X, y, Xv, yv, seed=0)
    # exhaustive evaluation: the shrunk candidate must win this noisy setup
    from hindcast.models import fit_family

    cands = {C: fit_family("lr", X, y, {"C": C}, 0) for C in (1e5, 0.01)}
    vals = {C: auroc(predict_scores(m, Xv), yv).value for C, m in cands.items()}
    assert model.hyperparameters["C"] == max(vals, key=vals.get)


def test_grid_tie_breaks_by_declaration_order():
    X = np.array([[-1.0], [1.0]] * 10)
    y = np.array([0.0, 1.0] * 10)
    grid = HyperGrid({"lr": {"C": [0.5, 1.0, 2.0]}})
    model, _ = grid_search("lr", grid, X, y, X, y, seed=0)
    # all candidates reach validation AUROC 1.0; first declared wins
    assert model.hyperparameters["C"] == 0.5


def test_grid_falls_back_to_training_loss_on_single_class_val():
    rng = np.random.default_rng(16)
    X = rng.standard_normal((30, 2))
    y = rng.integers(0, 2, 30).astype(float)
    grid = HyperGrid({"lr": {"C": [0.1, 1.0]}})
    model, flags = grid_search("lr", grid, X, y, X[:3], np.ones(3), seed=0)
    assert "val_single_class" in flags
    assert model is not None


def test_grid_error_when_empty():
    grid = HyperGrid({"lr": {"C": []}})
    with pytest.raises(GridError):
        grid.candidates("lr")


# ---- serialization -------------------------------------------------------------

def test_model_json_round_trip_all_families():
    rng = np.random.default_rng(17)
    X = rng.standard_normal((40, 3))
    y = rng.integers(0, 2, 40).astype(float)
    for fit in (lambda: fit_lr(X, y, C=1.0),
                lambda: fit_gbdt(X, y, 5, 2, 0.1),
                lambda: fit_mlp(X, y, 3, 0.01, max_epochs=5)):
        model = fit()
        model.feature_names = ("f0", "f1", "f2")
        import json

        doc = json.loads(json.dumps(model.to_dict()))
        back = TrainedModel.from_dict(doc)
        assert np.allclose(predict_scores(back, X), predict_scores(model, X), atol=1e-12)
