import json
import math

import numpy as np
import pytest

from pie.dataio import (ColumnSchema, Pipeline, load_csv, one_hot_encode,
                        standardize)
from pie.persist import FORMAT_VERSION, ModelFormatError, load_model, save_model
from pie.trainer import PieConfig, fit_pie, predict_score

from conftest import interaction_data, write_csv, write_schema


def _fitted_model(tmp_path):
    """Model trained through the full CSV pipeline, with trees and one-hot."""
    rng = np.random.default_rng(30)
    n = 150
    x1 = rng.uniform(0, 1, n)
    x2 = rng.uniform(0, 1, n)
    c = rng.choice(["a", "b"], n)
    y = 2 * x1 + np.sin(2 * np.pi * x2) + np.where(c == "a", 0.4, -0.4) \
        + 2.0 * (x1 - 0.5) * (x2 - 0.5) + rng.normal(0, 0.1, n)
    p = tmp_path / "train.csv"
    write_csv(p, ["x1", "x2", "c", "y"],
              [[repr(float(a)), repr(float(b)), cc, repr(float(t))]
               for a, b, cc, t in zip(x1, x2, c, y)])
    schema = [ColumnSchema("x1", "numeric"), ColumnSchema("x2", "numeric"),
              ColumnSchema("c", "categorical", ("a", "b")),
              ColumnSchema("y", "target")]
    enc = one_hot_encode(load_csv(p, schema))
    std, scaler = standardize(enc, enc)
    model = fit_pie(std, PieConfig(lam1=1e-3, lam2=1e-5, t_max=40),
                    pipeline=Pipeline(schema=tuple(schema), scaler=scaler))
    return model, std


def test_round_trip_predictions_bit_identical(tmp_path):
    model, std = _fitted_model(tmp_path)
    assert model.boost.n_trees > 0
    path = tmp_path / "m.pie.json"
    save_model(model, path)
    loaded = load_model(path)
    rng = np.random.default_rng(31)
    rows = rng.uniform(-0.5, 1.5, (200, std.X.shape[1]))
    np.testing.assert_array_equal(predict_score(model, rows),
                                  predict_score(loaded, rows))


def test_save_load_save_byte_identical(tmp_path):
    model, _ = _fitted_model(tmp_path)
    p1 = tmp_path / "a.pie.json"
    p2 = tmp_path / "b.pie.json"
    save_model(model, p1)
    save_model(load_model(p1), p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_pipeline_round_trip(tmp_path):
    model, _ = _fitted_model(tmp_path)
    path = tmp_path / "m.pie.json"
    save_model(model, path)
    loaded = load_model(path)
    assert loaded.pipeline.schema == model.pipeline.schema
    assert loaded.pipeline.scaler.means == model.pipeline.scaler.means
    assert loaded.pipeline.scaler.stds == model.pipeline.scaler.stds


def test_inf_lambda_round_trip(tmp_path):
    ds = interaction_data(80, seed=32)
    model = fit_pie(ds, PieConfig(lam1=1e-3, lam2=math.inf, t_max=20))
    path = tmp_path / "m.pie.json"
    save_model(model, path)
    loaded = load_model(path)
    assert loaded.config.lam2 == math.inf
    assert json.loads(path.read_text())["config"]["lam2"] == "inf"


def test_truncated_file_rejected(tmp_path):
    model, _ = _fitted_model(tmp_path)
    path = tmp_path / "m.pie.json"
    save_model(model, path)
    text = path.read_text()
    path.write_text(text[: len(text) // 2])
    with pytest.raises(ModelFormatError, match="not a valid model file"):
        load_model(path)


def test_unknown_version_rejected(tmp_path):
    model, _ = _fitted_model(tmp_path)
    path = tmp_path / "m.pie.json"
    save_model(model, path)
    payload = json.loads(path.read_text())
    payload["version"] = "999"
    path.write_text(json.dumps(payload))
    with pytest.raises(ModelFormatError, match=f"supported versions: {FORMAT_VERSION}"):
        load_model(path)


def test_checksum_guards_tampering(tmp_path):
    model, _ = _fitted_model(tmp_path)
    path = tmp_path / "m.pie.json"
    save_model(model, path)
    payload = json.loads(path.read_text())
    payload["gam"]["alpha0"] = payload["gam"]["alpha0"] + 1.0
    path.write_text(json.dumps(payload))
    with pytest.raises(ModelFormatError, match="checksum"):
        load_model(path)


def test_model_file_layout(tmp_path):
    model, _ = _fitted_model(tmp_path)
    path = tmp_path / "m.pie.json"
    save_model(model, path)
    payload = json.loads(path.read_text())
    assert set(payload) == {"version", "loss", "config", "scaler", "gam", "boost", "meta"}
    assert payload["version"] == FORMAT_VERSION
    tree = payload["boost"]["trees"][0]
    assert set(tree) == {"feature", "threshold", "left", "right", "weight"}
