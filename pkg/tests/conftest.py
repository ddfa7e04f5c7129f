"""Shared synthetic data builders for the test suite."""

import csv
import json

import numpy as np
import pytest

from pie.dataio import Dataset, FeatureGroup


def make_dataset(X, y=None, names=None) -> Dataset:
    X = np.asarray(X, dtype=np.float64)
    if names is None:
        names = [f"x{j + 1}" for j in range(X.shape[1])]
    groups = tuple(FeatureGroup(name=nm, kind="numeric", columns=(j,))
                   for j, nm in enumerate(names))
    return Dataset(X=X, y=None if y is None else np.asarray(y, dtype=np.float64),
                   columns=tuple(names), groups=groups)


def interaction_data(n, seed, noise=0.1) -> Dataset:
    """y = 2 x1 + sin(2 pi x2) + 3 x3 x4 + noise, features uniform on [0, 1]."""
    rng = np.random.default_rng(seed)
    X = rng.uniform(0.0, 1.0, (n, 4))
    y = 2 * X[:, 0] + np.sin(2 * np.pi * X[:, 1]) + 3 * X[:, 2] * X[:, 3] \
        + rng.normal(0.0, noise, n)
    return make_dataset(X, y)


def additive_data(n, seed, noise=0.05) -> Dataset:
    """Perfectly additive target: no interactions for the ensemble to find."""
    rng = np.random.default_rng(seed)
    X = rng.uniform(0.0, 1.0, (n, 4))
    y = 2 * X[:, 0] + np.sin(2 * np.pi * X[:, 1]) + 1.5 * (X[:, 2] - 0.5) ** 2 \
        - X[:, 3] + rng.normal(0.0, noise, n)
    return make_dataset(X, y)


RELEVANT = (0, 1, 2, 3)


def sparse_data(n, seed, d=20, noise=0.2) -> Dataset:
    """d features of which only the first four drive the target."""
    rng = np.random.default_rng(seed)
    X = rng.uniform(0.0, 1.0, (n, d))
    y = 3 * X[:, 0] + 2.5 * np.sin(2 * np.pi * X[:, 1]) + 8 * (X[:, 2] - 0.5) ** 2 \
        + 3 * X[:, 3] ** 3 + rng.normal(0.0, noise, n)
    return make_dataset(X, y)


def random_regression(n, d, seed) -> Dataset:
    """Random smooth target with a pairwise interaction, for descent checks."""
    rng = np.random.default_rng(seed)
    X = rng.uniform(0.0, 1.0, (n, d))
    coefs = rng.normal(0.0, 1.5, d)
    y = X @ coefs + np.sin(2 * np.pi * X[:, 0]) \
        + 2.0 * (X[:, 1] - 0.5) * (X[:, 2] - 0.5) + rng.normal(0.0, 0.3, n)
    return make_dataset(X, y)


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def write_schema(path, entries):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(entries, fh)


@pytest.fixture
def csv_case(tmp_path):
    """Small mixed-type CSV plus schema, ready for the CLI."""
    rng = np.random.default_rng(11)
    n = 120
    x1 = rng.uniform(0, 1, n)
    x2 = rng.uniform(0, 1, n)
    color = rng.choice(["red", "green", "blue"], n)
    bump = np.where(color == "red", 0.5, np.where(color == "green", -0.2, 0.0))
    y = 2 * x1 + np.sin(2 * np.pi * x2) + bump + rng.normal(0, 0.1, n)
    data = tmp_path / "data.csv"
    write_csv(data, ["x1", "x2", "color", "y"],
              [[repr(float(a)), repr(float(b)), c, repr(float(t))]
               for a, b, c, t in zip(x1, x2, color, y)])
    schema = tmp_path / "schema.json"
    write_schema(schema, [
        {"name": "x1", "kind": "numeric"},
        {"name": "x2", "kind": "numeric"},
        {"name": "color", "kind": "categorical", "categories": ["red", "green", "blue"]},
        {"name": "y", "kind": "target"},
    ])
    return {"data": data, "schema": schema, "n": n}
