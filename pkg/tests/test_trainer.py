import math

import numpy as np
import pytest

from pie.gam import predict_gam_matrix
from pie.losses import get_loss, sigmoid
from pie.metrics import r_squared, rpe
from pie.trainer import (Breakdown, FitError, PieConfig, explain, extract_gam,
                         fit_pie, negative_gradient, objective_value, predict,
                         predict_score)

from conftest import additive_data, interaction_data, make_dataset, random_regression


def test_config_validation():
    with pytest.raises(ValueError):
        PieConfig(lam1=-1.0)
    with pytest.raises(ValueError):
        PieConfig(tol=0.0)
    with pytest.raises(ValueError):
        PieConfig(shrinkage=1.5)
    with pytest.raises(ValueError):
        PieConfig(n_basis=3, degree=3)
    assert PieConfig(n_basis=1).n_interior == -3  # identity bases skip knots


def test_objective_zero_model():
    ds = interaction_data(100, seed=0)
    cfg = PieConfig(lam1=0.3, lam2=0.3, t_max=1)
    model = fit_pie(ds, cfg)
    # trace[0] is the zero-model objective: penalties vanish, loss is halved MSE
    assert model.meta["objective_trace"][0] == pytest.approx(np.mean(ds.y ** 2) / 2)


def test_objective_matches_independent_resummation():
    ds = interaction_data(150, seed=1)
    cfg = PieConfig(lam1=5e-3, lam2=1e-5, t_max=25, tol=1e-12)
    model = fit_pie(ds, cfg)
    assert model.boost.n_trees > 0

    # oracle: re-sum every objective term from raw predictions
    f = predict_score(model, ds.X)
    loss_part = float(np.mean((ds.y - f) ** 2)) / 2
    group_part = cfg.lam1 * sum(float(np.linalg.norm(c)) for c in model.gam.coefs)
    tree_part = 0.0
    for t in model.boost.trees:
        w = t.leaf_weights()
        tree_part += cfg.lam2 * float(len(w) + np.sum(w * w))
    direct = loss_part + group_part + tree_part
    assert objective_value(model, ds.X, ds.y) == pytest.approx(direct, rel=1e-12)
    assert model.meta["objective_trace"][-1] == pytest.approx(direct, rel=1e-9)


def test_objective_penalties_off():
    ds = interaction_data(80, seed=2)
    model = fit_pie(ds, PieConfig(lam1=0.0, lam2=math.inf, t_max=40))
    f = predict_score(model, ds.X)
    assert objective_value(model, ds.X, ds.y) == pytest.approx(
        float(np.mean((ds.y - f) ** 2)) / 2)


def test_negative_gradient_squared_residual():
    y = np.array([1.0, -2.0, 0.5])
    np.testing.assert_array_equal(negative_gradient(y, y.copy(), get_loss("squared")),
                                  np.zeros(3))
    f = np.zeros(3)
    np.testing.assert_array_equal(negative_gradient(y, f, get_loss("squared")), y)


def test_negative_gradient_logistic_at_zero():
    val = negative_gradient(np.array([1.0]), np.array([0.0]), get_loss("logistic"))
    assert val[0] == pytest.approx(0.5)


@pytest.mark.parametrize("loss_name", ["squared", "logistic"])
def test_negative_gradient_matches_finite_differences(loss_name):
    rng = np.random.default_rng(3)
    loss = get_loss(loss_name)
    y = rng.normal(0, 1, 20) if loss_name == "squared" else rng.choice([-1.0, 1.0], 20)
    f = rng.normal(0, 1, 20)
    h = 1e-6
    for i in range(20):
        e = np.zeros(20)
        e[i] = h
        fd = (loss.value_mean(y, f + e) - loss.value_mean(y, f - e)) / (2 * h) * 20
        assert abs(-fd - negative_gradient(y, f, loss)[i]) <= 1e-6 * (1 + abs(fd))


def test_lam2_inf_disables_boosting():
    ds = interaction_data(200, seed=4)
    model = fit_pie(ds, PieConfig(lam1=1e-3, lam2=math.inf, t_max=80))
    assert model.boost.n_trees == 0
    from pie.metrics import pi_score
    assert pi_score(model, ds) == 1.0


def test_lam1_inf_disables_additive_part():
    ds = interaction_data(300, seed=5)
    model = fit_pie(ds, PieConfig(lam1=math.inf, lam2=1e-5, t_max=60))
    for c in model.gam.coefs:
        assert c.tolist() == [0.0] * len(c)
    assert model.gam.n_active == 0
    assert model.boost.n_trees > 0
    # prediction is intercept plus ensemble only
    from pie.boost import predict_boost_matrix
    np.testing.assert_allclose(predict_score(model, ds.X),
                               model.gam.alpha0 + predict_boost_matrix(model.boost, ds.X))


def test_predict_zero_model():
    ds = interaction_data(60, seed=6)
    model = fit_pie(ds, PieConfig(lam1=math.inf, lam2=math.inf, t_max=3, tol=1e-12))
    # only the intercept can move
    np.testing.assert_allclose(predict_score(model, ds.X), model.gam.alpha0)

    yb = np.where(ds.y > np.median(ds.y), 1.0, -1.0)
    ds2 = make_dataset(ds.X, yb)
    model2 = fit_pie(ds2, PieConfig(lam1=math.inf, lam2=math.inf, loss="logistic",
                                    t_max=3, tol=1e-12))
    np.testing.assert_allclose(predict(model2, ds2.X), sigmoid(model2.gam.alpha0))


def test_predict_decomposes_exactly():
    ds = interaction_data(400, seed=7)
    model = fit_pie(ds, PieConfig(lam1=1e-3, lam2=1e-5, t_max=60))
    assert model.boost.n_trees > 0
    rng = np.random.default_rng(8)
    rows = rng.uniform(-0.2, 1.2, (100, 4))
    from pie.boost import predict_boost_matrix
    total = predict_score(model, rows)
    parts = predict_gam_matrix(model.gam, rows) + predict_boost_matrix(model.boost, rows)
    np.testing.assert_array_equal(total, parts)


def test_global_descent_trace():
    for seed in (0, 1):
        ds = random_regression(300, 6, seed=seed)
        model = fit_pie(ds, PieConfig(lam1=1e-3, lam2=1e-4, t_max=50, tol=1e-12))
        tr = np.array(model.meta["objective_trace"])
        slack = 1e-10 * (1 + np.abs(tr[:-1]))
        assert np.all(np.diff(tr) <= slack)


def test_fit_is_deterministic():
    ds = interaction_data(250, seed=9)
    cfg = PieConfig(lam1=1e-3, lam2=1e-5, t_max=40)
    a = fit_pie(ds, cfg)
    b = fit_pie(ds, cfg)
    assert a.meta["objective_trace"] == b.meta["objective_trace"]
    np.testing.assert_array_equal(predict_score(a, ds.X), predict_score(b, ds.X))


def test_logistic_loss_decreases():
    rng = np.random.default_rng(10)
    X = rng.uniform(0, 1, (300, 4))
    y = np.where(2 * X[:, 0] - X[:, 1] + rng.normal(0, 0.3, 300) > 0.5, 1.0, -1.0)
    ds = make_dataset(X, y)
    model = fit_pie(ds, PieConfig(lam1=1e-3, lam2=1e-4, loss="logistic", t_max=80))
    loss = get_loss("logistic")
    final = loss.value_mean(y, predict_score(model, X))
    assert final < loss.value_mean(y, np.zeros(300))


def test_logistic_target_validation():
    ds = interaction_data(50, seed=11)
    with pytest.raises(ValueError, match="-1 or \\+1"):
        fit_pie(ds, PieConfig(loss="logistic"))


@pytest.mark.filterwarnings("ignore:overflow encountered")
def test_non_finite_objective_aborts():
    ds = make_dataset(np.array([[0.0], [1.0]]), y=np.array([1e300, -1e300]))
    with pytest.raises(FitError, match="non-finite"):
        fit_pie(ds, PieConfig(lam1=0.0, lam2=math.inf, t_max=3))


def test_boost_contribution_shrinks_with_lam2():
    ds = interaction_data(500, seed=12)

    def kappa_r2_gain(lam2):
        model = fit_pie(ds, PieConfig(lam1=1e-3, lam2=lam2, t_max=80))
        r2_f = r_squared(predict_score(model, ds.X), ds.y)
        r2_g = r_squared(predict_gam_matrix(model.gam, ds.X), ds.y)
        return r2_f - r2_g

    gains = [kappa_r2_gain(l2) for l2 in (1e-5, 1e-4, 1e-3)]
    assert gains[0] >= gains[1] - 0.02
    assert gains[1] >= gains[2] - 0.02


def test_extract_gam_is_additive_part():
    ds = interaction_data(500, seed=13)
    model = fit_pie(ds, PieConfig(lam1=1e-3, lam2=1e-5, t_max=60))
    g = extract_gam(model)
    assert g is model.gam
    from pie.gam import pie_values_matrix
    np.testing.assert_allclose(
        predict_gam_matrix(g, ds.X),
        g.alpha0 + pie_values_matrix(g, ds.X).sum(axis=1))
    # the additive part alone predicts worse than the full model but sanely
    full = rpe(predict_score(model, ds.X), ds.y)
    alone = rpe(predict_gam_matrix(g, ds.X), ds.y)
    assert math.isfinite(alone)
    assert alone >= full


def test_extract_gam_equals_full_model_without_trees():
    ds = additive_data(200, seed=14)
    model = fit_pie(ds, PieConfig(lam1=1e-3, lam2=math.inf, t_max=80))
    np.testing.assert_array_equal(predict_gam_matrix(extract_gam(model), ds.X),
                                  predict_score(model, ds.X))


def test_explain_empty_ensemble():
    ds = additive_data(150, seed=15)
    model = fit_pie(ds, PieConfig(lam1=1e-3, lam2=math.inf, t_max=60))
    b = explain(model, ds.X[3])
    assert b.crust == 0.0
    assert b.crust_share == 0.0


def test_explain_additivity_and_share():
    ds = interaction_data(400, seed=16)
    model = fit_pie(ds, PieConfig(lam1=1e-3, lam2=1e-5, t_max=60))
    for i in (0, 7, 42):
        b = explain(model, ds.X[i])
        total = b.intercept + sum(b.pie.values()) + b.crust
        assert abs(total - b.total) <= 1e-10
        assert b.total == pytest.approx(predict_score(model, ds.X[i:i + 1])[0])
        assert 0.0 <= b.crust_share <= 1.0


def test_explain_dominant_feature_with_small_crust():
    # one feature carries the signal: it should top the breakdown, with the
    # cross-feature term contributing only a sliver
    rng = np.random.default_rng(50)
    n = 800
    X = rng.uniform(0, 1, (n, 4))
    y = 4 * (X[:, 0] - 0.5) + 0.3 * np.sin(2 * np.pi * X[:, 1]) \
        + 0.4 * (X[:, 2] - 0.5) * (X[:, 3] - 0.5) + rng.normal(0, 0.05, n)
    ds = make_dataset(X, y)
    model = fit_pie(ds, PieConfig(lam1=1e-3, lam2=1e-5, t_max=100))
    assert model.boost.n_trees > 0

    from pie.metrics import pi_score
    assert pi_score(model, ds) > 0.9
    row = int(np.argmax(np.abs(X[:, 0] - 0.5)))
    b = explain(model, ds.X[row])
    assert b.ordered_terms()[0][0] == "x1"
    assert b.crust_share < 0.15


def test_breakdown_ordering():
    b = Breakdown(intercept=0.5, pie={"a": -2.0, "b": 0.1}, crust=1.0,
                  total=-0.4, crust_share=0.3)
    assert [t[0] for t in b.ordered_terms()] == ["a", "(crust)", "(intercept)", "b"]


def test_metadata_contents():
    ds = interaction_data(120, seed=17)
    model = fit_pie(ds, PieConfig(lam1=1e-3, lam2=1e-4, t_max=30))
    meta = model.meta
    assert meta["iterations"] == len(meta["objective_trace"]) - 1 or meta["converged"]
    assert meta["target_standardized"] is False
    assert meta["n_active"] == model.gam.n_active
    assert meta["n_trees"] == model.boost.n_trees
