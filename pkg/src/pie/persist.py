"""Lossless model serialization to `.pie.json` files.

Numbers are written with Python's shortest-round-trip float repr, so
load(save(m)) predicts bit-identically and save(load(p)) reproduces the
file byte for byte.  A checksum over the payload guards against truncated
or hand-edited files, and unknown format versions are rejected outright.
"""

from __future__ import annotations

import hashlib
import json
import math

import numpy as np

from .basis import SplineSpec
from .boost import BoostModel, RegressionTree
from .dataio import ColumnSchema, Pipeline, ScalerParams
from .gam import GamModel
from .trainer import PieConfig, PieModel

FORMAT_VERSION = "1"


class ModelFormatError(ValueError):
    """Model file is malformed, corrupted, or has an unsupported version."""


def _enc_float(x: float):
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return float(x)


def _dec_float(v) -> float:
    if v == "inf":
        return math.inf
    if v == "-inf":
        return -math.inf
    return float(v)


def _schema_to_json(schema) -> list[dict]:
    out = []
    for c in schema:
        entry = {"name": c.name, "kind": c.kind}
        if c.categories is not None:
            entry["categories"] = list(c.categories)
        out.append(entry)
    return out


def _schema_from_json(raw) -> tuple[ColumnSchema, ...]:
    return tuple(
        ColumnSchema(name=e["name"], kind=e["kind"],
                     categories=tuple(e["categories"]) if "categories" in e else None)
        for e in raw
    )


def _payload(model: PieModel) -> dict:
    cfg = model.config
    config = {
        "lam1": _enc_float(cfg.lam1), "lam2": _enc_float(cfg.lam2),
        "loss": cfg.loss, "t_max": cfg.t_max, "tol": cfg.tol,
        "shrinkage": cfg.shrinkage, "max_leaves": cfg.max_leaves,
        "min_leaf": cfg.min_leaf, "n_basis": cfg.n_basis,
        "degree": cfg.degree, "seed": cfg.seed,
    }
    scaler = None
    if model.pipeline is not None:
        sp = model.pipeline.scaler
        scaler = {
            "schema": _schema_to_json(model.pipeline.schema),
            "means": {k: float(v) for k, v in sp.means.items()},
            "stds": {k: float(v) for k, v in sp.stds.items()},
            "dropped": list(sp.dropped),
            "warnings": list(sp.warnings),
        }
    groups = []
    for spec, coef in zip(model.gam.specs, model.gam.coefs):
        groups.append({
            "feature": spec.feature,
            "columns": list(spec.columns),
            "kind": spec.kind,
            "degree": spec.degree,
            "knots": None if spec.knots is None else [float(v) for v in spec.knots],
            "offsets": [float(v) for v in spec.offsets],
            "coef": [float(v) for v in coef],
        })
    trees = [{
        "feature": list(t.feature),
        "threshold": [float(v) for v in t.threshold],
        "left": list(t.left),
        "right": list(t.right),
        "weight": [float(v) for v in t.weight],
    } for t in model.boost.trees]

    return {
        "version": FORMAT_VERSION,
        "loss": model.loss_name,
        "config": config,
        "scaler": scaler,
        "gam": {"alpha0": float(model.gam.alpha0), "groups": groups},
        "boost": {
            "shrinkage": float(model.boost.shrinkage),
            "lam2": _enc_float(model.boost.lam2),
            "trees": trees,
        },
        "meta": _jsonable_meta(model.meta),
    }


def _jsonable_meta(meta: dict) -> dict:
    out = {}
    for k, v in meta.items():
        if isinstance(v, np.floating):
            v = float(v)
        elif isinstance(v, np.integer):
            v = int(v)
        elif isinstance(v, (list, tuple)):
            v = [float(x) if isinstance(x, (float, np.floating)) else x for x in v]
        out[k] = v
    return out


def _checksum(payload: dict) -> str:
    body = {k: v for k, v in payload.items() if k != "meta"}
    canonical = json.dumps(body, sort_keys=True, separators=(",", ":"), allow_nan=False)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def save_model(model: PieModel, path) -> None:
    payload = _payload(model)
    payload["meta"]["checksum"] = _checksum(payload)
    text = json.dumps(payload, sort_keys=True, indent=2, allow_nan=False) + "\n"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def load_model(path) -> PieModel:
    try:
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: not a valid model file ({exc})") from None
    if not isinstance(payload, dict) or "version" not in payload:
        raise ModelFormatError(f"{path}: missing version field")
    if payload["version"] != FORMAT_VERSION:
        raise ModelFormatError(
            f"{path}: unsupported format version {payload['version']!r}; "
            f"supported versions: {FORMAT_VERSION}"
        )
    try:
        meta = dict(payload["meta"])
        stored = meta.pop("checksum")
        if stored != _checksum(payload):
            raise ModelFormatError(f"{path}: checksum mismatch, file is corrupted")

        cfgd = payload["config"]
        cfg = PieConfig(
            lam1=_dec_float(cfgd["lam1"]), lam2=_dec_float(cfgd["lam2"]),
            loss=cfgd["loss"], t_max=cfgd["t_max"], tol=cfgd["tol"],
            shrinkage=cfgd["shrinkage"], max_leaves=cfgd["max_leaves"],
            min_leaf=cfgd["min_leaf"], n_basis=cfgd["n_basis"],
            degree=cfgd["degree"], seed=cfgd["seed"],
        )
        pipeline = None
        if payload["scaler"] is not None:
            sc = payload["scaler"]
            pipeline = Pipeline(
                schema=_schema_from_json(sc["schema"]),
                scaler=ScalerParams(
                    means={k: float(v) for k, v in sc["means"].items()},
                    stds={k: float(v) for k, v in sc["stds"].items()},
                    dropped=tuple(sc["dropped"]),
                    warnings=tuple(sc["warnings"]),
                ),
            )
        specs, coefs = [], []
        for g in payload["gam"]["groups"]:
            spec = SplineSpec(
                feature=g["feature"], columns=tuple(g["columns"]), kind=g["kind"],
                degree=g["degree"],
                knots=None if g["knots"] is None else np.asarray(g["knots"]),
            )
            spec.offsets = np.asarray(g["offsets"], dtype=np.float64)
            specs.append(spec)
            coefs.append(np.asarray(g["coef"], dtype=np.float64))
        gam = GamModel(alpha0=float(payload["gam"]["alpha0"]), specs=specs, coefs=coefs)

        bd = payload["boost"]
        boost = BoostModel(
            trees=[RegressionTree(feature=list(t["feature"]),
                                  threshold=[float(v) for v in t["threshold"]],
                                  left=list(t["left"]), right=list(t["right"]),
                                  weight=[float(v) for v in t["weight"]])
                   for t in bd["trees"]],
            shrinkage=float(bd["shrinkage"]),
            lam2=_dec_float(bd["lam2"]),
        )
        meta["checksum"] = stored
        return PieModel(gam=gam, boost=boost, loss_name=payload["loss"],
                        config=cfg, pipeline=pipeline, meta=meta)
    except ModelFormatError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"{path}: malformed model file ({exc})") from None
