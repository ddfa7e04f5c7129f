import numpy as np
import pytest

from pie.basis import (block_lipschitz, build_design, design_rows, eval_basis,
                       make_knots, make_spline_spec, SplineSpec, BasisMatrix,
                       _power_lambda_max)

from conftest import make_dataset


def test_make_knots_uniform_quantiles():
    values = np.linspace(0.0, 1.0, 401)
    knots = make_knots(values, n_interior=3, degree=3)
    np.testing.assert_allclose(knots[:4], 0.0)
    np.testing.assert_allclose(knots[-4:], 1.0)
    # oracle: interpolated quantiles of the distinct values
    expected = np.quantile(np.unique(values), [0.25, 0.5, 0.75])
    np.testing.assert_allclose(knots[4:-4], expected, atol=1e-12)
    np.testing.assert_allclose(knots[4:-4], [0.25, 0.5, 0.75], atol=5e-3)


def test_make_knots_no_interior():
    knots = make_knots(np.array([0.0, 0.3, 1.0]), n_interior=0, degree=3)
    np.testing.assert_array_equal(knots, [0, 0, 0, 0, 1, 1, 1, 1])


def test_make_knots_reduces_with_warning():
    with pytest.warns(UserWarning, match="reducing interior knots"):
        knots = make_knots(np.array([0.0, 0.5, 1.0]), n_interior=4, degree=3)
    assert len(knots) == 4 + 1 + 4


def test_binary_column_falls_back_to_identity():
    spec = make_spline_spec(np.array([0.0, 1.0, 0.0, 1.0]), "b", (0,))
    assert spec.kind == "identity" and spec.n_basis == 1


def test_one_hot_group_gets_identity_block():
    spec = make_spline_spec(None, "c", (2, 3, 4))
    assert spec.kind == "identity" and spec.n_basis == 3


def test_partition_of_unity():
    rng = np.random.default_rng(0)
    spec = make_spline_spec(rng.uniform(-2, 3, 300), "x", (0,), n_interior=4)
    for x in np.linspace(-2, 3, 101):
        total = eval_basis(x, spec).sum()
        assert abs(total - 1.0) < 1e-10


def test_eval_basis_identity():
    spec = SplineSpec(feature="x", columns=(0,), kind="identity")
    np.testing.assert_allclose(eval_basis(0.7, spec), [0.7])


def test_eval_basis_clamps_out_of_range():
    rng = np.random.default_rng(1)
    vals = rng.uniform(0, 1, 100)
    spec = make_spline_spec(vals, "x", (0,))
    np.testing.assert_allclose(eval_basis(vals.min() - 10.0, spec),
                               eval_basis(vals.min(), spec))
    np.testing.assert_allclose(eval_basis(vals.max() + 10.0, spec),
                               eval_basis(vals.max(), spec))


def test_eval_basis_continuity():
    rng = np.random.default_rng(2)
    spec = make_spline_spec(rng.uniform(0, 1, 200), "x", (0,))
    h = 1e-6
    for x in np.linspace(0.01, 0.99, 37):
        step = np.abs(eval_basis(x + h, spec) - eval_basis(x, spec)).max()
        assert step < 1e-4


def test_build_design_centers_identity_column():
    ds = make_dataset(np.array([[1.0], [2.0], [3.0], [4.0]]), y=[0, 0, 0, 0])
    spec = SplineSpec(feature="x1", columns=(0,), kind="identity")
    [block] = build_design(ds, [spec])
    np.testing.assert_allclose(block.values[:, 0], [-1.5, -0.5, 0.5, 1.5])


def test_build_design_zero_column_means():
    rng = np.random.default_rng(3)
    ds = make_dataset(rng.uniform(0, 1, (60, 2)), y=np.zeros(60))
    specs = [make_spline_spec(ds.X[:, j], f"x{j+1}", (j,)) for j in range(2)]
    blocks = build_design(ds, specs)
    for b in blocks:
        np.testing.assert_allclose(b.values.mean(axis=0), 0.0, atol=1e-12)


def test_design_rows_reproduce_training_rows():
    rng = np.random.default_rng(4)
    ds = make_dataset(rng.uniform(0, 1, (50, 1)), y=np.zeros(50))
    spec = make_spline_spec(ds.X[:, 0], "x1", (0,))
    [block] = build_design(ds, [spec])
    again = design_rows(ds.X, spec)
    np.testing.assert_array_equal(block.values, again)


def test_block_lipschitz_single_column():
    values = np.array([[-1.5], [-0.5], [0.5], [1.5]])
    block = BasisMatrix(spec=SplineSpec(feature="x", columns=(0,), kind="identity"),
                        values=values, lam_max=float((values.T @ values)[0, 0]))
    assert block_lipschitz(block, curvature=1.0, n=4) == pytest.approx(1.25)
    assert block_lipschitz(block, curvature=0.25, n=4) == pytest.approx(0.3125)


def test_block_lipschitz_matches_dense_eigensolver():
    rng = np.random.default_rng(5)
    for _ in range(10):
        psi = rng.normal(0, 1, (20, 5))
        gram = psi.T @ psi
        lam = _power_lambda_max(gram)
        oracle = float(np.linalg.eigvalsh(gram)[-1])
        assert abs(lam - oracle) <= 1e-6 * oracle


def test_block_lipschitz_rayleigh_lower_bound():
    rng = np.random.default_rng(6)
    psi = rng.normal(0, 1, (30, 4))
    block = BasisMatrix(spec=SplineSpec(feature="x", columns=(0,), kind="identity"),
                        values=psi, lam_max=_power_lambda_max(psi.T @ psi))
    L = block_lipschitz(block, curvature=1.0, n=30)
    for _ in range(25):
        v = rng.normal(0, 1, 4)
        rayleigh = (1.0 / 30) * float(np.sum((psi @ v) ** 2) / (v @ v))
        assert L >= rayleigh - 1e-9


def test_block_lipschitz_zero_matrix_floor():
    block = BasisMatrix(spec=SplineSpec(feature="x", columns=(0,), kind="identity"),
                        values=np.zeros((5, 1)), lam_max=_power_lambda_max(np.zeros((1, 1))))
    assert block_lipschitz(block, curvature=1.0, n=5) == 1e-12
