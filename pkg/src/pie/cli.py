"""Command-line workflow: train, predict, explain, cross-validate, and
sensitivity grids.

Every subcommand echoes its resolved configuration into a run log next to
the data it writes, sends diagnostics to stderr only, and renders the
plot-ready outputs as PNG figures alongside the delimited files.  With a
fixed seed all file outputs are byte-reproducible.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import metrics, plots
from .dataio import (DataError, Pipeline, SchemaError, load_csv, one_hot_encode,
                     read_schema, standardize)
from .metrics import (DEFAULT_LAMBDA1_GRID, DEFAULT_LAMBDA2_GRID, cross_validate,
                      pi_score, rpe, sparse_select)
from .persist import ModelFormatError, load_model, save_model
from .trainer import FitError, PieConfig, explain, fit_pie, predict_score
from .losses import sigmoid


def _parse_lambda(text: str) -> float:
    if text.strip().lower() in ("inf", "infinity"):
        return math.inf
    value = float(text)
    if value < 0:
        raise argparse.ArgumentTypeError("penalty weights must be non-negative")
    return value


def _parse_grid(text: str) -> list[float]:
    values = [_parse_lambda(tok) for tok in text.split(",") if tok.strip()]
    if not values:
        raise argparse.ArgumentTypeError("empty grid")
    return values


def _default_seed() -> int:
    return int(os.environ.get("PIE_SEED", "0"))


def _stem(path: Path) -> Path:
    name = path.name
    for suffix in (".pie.json", ".json", ".csv"):
        if name.endswith(suffix):
            return path.with_name(name[: -len(suffix)])
    return path


def _jsonable(value):
    if isinstance(value, float) and math.isinf(value):
        return "inf" if value > 0 else "-inf"
    if isinstance(value, (np.floating, np.integer)):
        return _jsonable(value.item())
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    return value


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(_jsonable(payload), sort_keys=True, indent=2) + "\n",
                    encoding="utf-8")


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow(["" if v is None else ("inf" if isinstance(v, float)
                             and math.isinf(v) else repr(v) if isinstance(v, float)
                             else v) for v in row])


def _resolved_config(args: argparse.Namespace) -> dict:
    return {k: _jsonable(v) for k, v in sorted(vars(args).items()) if k != "func"}


def _config_from_args(args, lam1: float, lam2: float) -> PieConfig:
    return PieConfig(
        lam1=lam1, lam2=lam2, loss=args.loss, t_max=args.t_max, tol=args.tol,
        shrinkage=args.shrinkage, max_leaves=args.max_leaves,
        min_leaf=args.min_leaf, n_basis=args.n_basis, degree=args.degree,
        seed=args.seed,
    )


def _load_encoded(args, require_target=True):
    schema = read_schema(args.schema)
    raw = load_csv(args.data, schema, require_target=require_target)
    return schema, one_hot_encode(raw)


def _cv_rows(cv, selected):
    rows = []
    for rep in cv.reports:
        rows.append([rep.lam1, rep.lam2, rep.mean_rpe, rep.std_rpe,
                     rep.mean_pi_score, rep.mean_active, rep.n_failed,
                     1 if selected is not None and rep is selected else 0])
    return rows


_CV_HEADER = ["lambda1", "lambda2", "mean_test_error", "std_test_error",
              "mean_pi_score", "mean_active", "n_failed", "selected"]


def _cv_json(cv, selected):
    return {
        "metric": cv.metric,
        "k": cv.k,
        "seed": cv.seed,
        "selected": None if selected is None else {"lambda1": selected.lam1,
                                                   "lambda2": selected.lam2},
        "cells": [{
            "lambda1": rep.lam1, "lambda2": rep.lam2,
            "mean_test_error": rep.mean_rpe, "std_test_error": rep.std_rpe,
            "mean_pi_score": rep.mean_pi_score, "mean_active": rep.mean_active,
            "n_failed": rep.n_failed,
            "folds": [{"test_error": f.rpe, "pi_score": f.pi_score,
                       "n_active": f.n_active, "error": f.error} for f in rep.folds],
        } for rep in cv.reports],
    }


def _emit_cv_table(cv, selected, out: Path, fmt: str) -> None:
    if fmt == "csv":
        _write_csv(out, _CV_HEADER, _cv_rows(cv, selected))
    else:
        _write_json(out, _cv_json(cv, selected))


def _cv_heatmap(cv, lam1_grid, lam2_grid, path) -> None:
    mat = np.full((len(lam1_grid), len(lam2_grid)), np.nan)
    for rep in cv.reports:
        i = lam1_grid.index(rep.lam1)
        j = lam2_grid.index(rep.lam2)
        if rep.mean_rpe is not None:
            mat[i, j] = rep.mean_rpe
    plots.save_heatmap(mat, lam1_grid, lam2_grid,
                       f"mean test {cv.metric} ({cv.k}-fold)", path)


def cmd_train(args) -> int:
    schema, encoded = _load_encoded(args)
    out = Path(args.out)
    stem = _stem(out)

    lam1_auto = args.lambda1.strip().lower() == "auto"
    lam2_auto = args.lambda2.strip().lower() == "auto"
    cv_payload = None
    if lam1_auto or lam2_auto:
        lam1_grid = list(DEFAULT_LAMBDA1_GRID) if lam1_auto else [_parse_lambda(args.lambda1)]
        lam2_grid = list(DEFAULT_LAMBDA2_GRID) if lam2_auto else [_parse_lambda(args.lambda2)]
        base_cfg = _config_from_args(args, lam1_grid[0], lam2_grid[0])
        cv = cross_validate(encoded, lam1_grid, lam2_grid, args.folds, args.seed, base_cfg)
        chosen = sparse_select(cv, args.max_active) if args.max_active else cv.best
        if chosen is None:
            raise FitError("cross-validation produced no usable grid cell")
        lam1, lam2 = chosen.lam1, chosen.lam2
        cv_table = stem.with_name(stem.name + f".cv.{args.format}")
        _emit_cv_table(cv, chosen, cv_table, args.format)
        if not args.no_plots:
            _cv_heatmap(cv, lam1_grid, lam2_grid, stem.with_name(stem.name + ".cv.rpe.png"))
        cv_payload = {"table": str(cv_table),
                      "selected": {"lambda1": lam1, "lambda2": lam2}}
    else:
        lam1 = _parse_lambda(args.lambda1)
        lam2 = _parse_lambda(args.lambda2)

    std, scaler = standardize(encoded, encoded)
    cfg = _config_from_args(args, lam1, lam2)
    model = fit_pie(std, cfg, pipeline=Pipeline(schema=tuple(schema), scaler=scaler))
    save_model(model, out)

    score = predict_score(model, std.X)
    log = {
        "config": _resolved_config(args),
        "lambda1": lam1,
        "lambda2": lam2,
        "iterations": model.meta["iterations"],
        "converged": model.meta["converged"],
        "objective_trace": model.meta["objective_trace"],
        "n_active": model.meta["n_active"],
        "active_features": sorted(model.gam.active_set()),
        "n_trees": model.meta["n_trees"],
        "warnings": model.meta["warnings"],
        "cv": cv_payload,
    }
    if model.is_classifier:
        log["train_log_loss"] = metrics.log_loss(std.y, score)
        log["train_accuracy"] = metrics.accuracy(std.y, score)
        log["train_rpe"] = None
        log["pi_score"] = None
        log["pi_score_note"] = "undefined for logistic models"
    else:
        log["train_rpe"] = rpe(score, std.y)
        try:
            log["pi_score"] = pi_score(model, std)
        except ValueError as exc:
            log["pi_score"] = None
            log["pi_score_note"] = str(exc)
    _write_json(stem.with_name(stem.name + ".log.json"), log)
    if not args.no_plots:
        plots.save_trace(model.meta["objective_trace"],
                         stem.with_name(stem.name + ".trace.png"))
    print(f"wrote {out} (iterations={log['iterations']}, "
          f"active features={log['n_active']}, trees={log['n_trees']})",
          file=sys.stderr)
    return 0


def _prepared_rows(args, model):
    if model.pipeline is None:
        raise DataError("model has no stored schema/scaler; cannot encode raw rows")
    raw = load_csv(args.data, list(model.pipeline.schema), require_target=False)
    return model.pipeline.prepare(raw)


def cmd_predict(args) -> int:
    model = load_model(args.model)
    ds = _prepared_rows(args, model)
    score = predict_score(model, ds.X)
    out = Path(args.out)
    if model.is_classifier:
        prob = sigmoid(score)
        if args.format == "csv":
            _write_csv(out, ["row", "prediction", "probability"],
                       [[i, float(s), float(p)] for i, (s, p) in enumerate(zip(score, prob))])
        else:
            _write_json(out, {"predictions": [
                {"row": i, "prediction": float(s), "probability": float(p)}
                for i, (s, p) in enumerate(zip(score, prob))]})
    else:
        if args.format == "csv":
            _write_csv(out, ["row", "prediction"],
                       [[i, float(s)] for i, s in enumerate(score)])
        else:
            _write_json(out, {"predictions": [
                {"row": i, "prediction": float(s)} for i, s in enumerate(score)]})
    _write_json(out.with_name(out.name + ".run.json"),
                {"config": _resolved_config(args), "rows": int(len(score))})
    return 0


def cmd_explain(args) -> int:
    model = load_model(args.model)
    ds = _prepared_rows(args, model)
    out = Path(args.out)
    breakdowns = [explain(model, ds.X[i]) for i in range(ds.n)]

    if args.format == "csv":
        rows = []
        for i, b in enumerate(breakdowns):
            for term, value in b.ordered_terms():
                rows.append([i, term, value])
            rows.append([i, "(total)", b.total])
            rows.append([i, "(crust_share)", b.crust_share])
        _write_csv(out, ["row", "term", "value"], rows)
    else:
        _write_json(out, {"breakdowns": [{
            "row": i,
            "intercept": b.intercept,
            "pie_values": dict(sorted(b.pie.items(), key=lambda t: -abs(t[1]))),
            "crust_value": b.crust,
            "total": b.total,
            "crust_share": b.crust_share,
        } for i, b in enumerate(breakdowns)]})

    _write_json(out.with_name(out.name + ".run.json"),
                {"config": _resolved_config(args), "rows": len(breakdowns)})
    if not args.no_plots and breakdowns:
        if not 0 <= args.plot_row < len(breakdowns):
            raise DataError(f"--plot-row {args.plot_row} out of range "
                            f"(0..{len(breakdowns) - 1})")
        b = breakdowns[args.plot_row]
        plots.save_breakdown(b.ordered_terms(), b.total, b.crust_share,
                             _stem(out).with_name(_stem(out).name + ".png"),
                             title=f"row {args.plot_row}")
    return 0


def cmd_cv(args) -> int:
    _, encoded = _load_encoded(args)
    cfg = _config_from_args(args, args.lambda1_grid[0], 0.0)
    cv = cross_validate(encoded, args.lambda1_grid, args.lambda2_grid,
                        args.folds, args.seed, cfg)
    selected = sparse_select(cv, args.max_active) if args.max_active else cv.best
    out = Path(args.out)
    _emit_cv_table(cv, selected, out, args.format)
    _write_json(out.with_name(out.name + ".run.json"), {
        "config": _resolved_config(args),
        "selected": None if selected is None else {"lambda1": selected.lam1,
                                                   "lambda2": selected.lam2},
        "metric": cv.metric,
    })
    if not args.no_plots:
        _cv_heatmap(cv, list(args.lambda1_grid), list(args.lambda2_grid),
                    _stem(out).with_name(_stem(out).name + ".rpe.png"))
    return 0


def cmd_sensitivity(args) -> int:
    _, encoded = _load_encoded(args)
    cfg = _config_from_args(args, args.lambda1_grid[0], 0.0)
    sens = metrics.sensitivity_grid(encoded, args.lambda1_grid, args.lambda2_grid,
                                    args.holdout, args.seed, cfg)
    out = Path(args.out)
    if args.format == "csv":
        rows = []
        for i, lam1 in enumerate(sens.lam1_grid):
            for j, lam2 in enumerate(sens.lam2_grid):
                rows.append([lam1, lam2,
                             None if np.isnan(sens.rpe[i, j]) else float(sens.rpe[i, j]),
                             None if np.isnan(sens.pi_score[i, j])
                             else float(sens.pi_score[i, j])])
        _write_csv(out, ["lambda1", "lambda2", "rpe", "pi_score"], rows)
    else:
        _write_json(out, {
            "lambda1_grid": sens.lam1_grid,
            "lambda2_grid": sens.lam2_grid,
            "rpe": [[None if np.isnan(v) else float(v) for v in row] for row in sens.rpe],
            "pi_score": [[None if np.isnan(v) else float(v) for v in row]
                         for row in sens.pi_score],
            "errors": sens.errors,
        })
    _write_json(out.with_name(out.name + ".run.json"),
                {"config": _resolved_config(args), "errors": sens.errors})
    if not args.no_plots:
        stem = _stem(out)
        plots.save_heatmap(sens.rpe, sens.lam1_grid, sens.lam2_grid,
                           "holdout RPE", stem.with_name(stem.name + ".rpe.png"))
        plots.save_heatmap(sens.pi_score, sens.lam1_grid, sens.lam2_grid,
                           "holdout pi-score", stem.with_name(stem.name + ".piscore.png"))
    return 0


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--loss", choices=["squared", "logistic"], default="squared")
    p.add_argument("--t-max", type=int, default=500)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--shrinkage", type=float, default=0.1)
    p.add_argument("--max-leaves", type=int, default=8)
    p.add_argument("--min-leaf", type=int, default=5)
    p.add_argument("--n-basis", type=int, default=8)
    p.add_argument("--degree", type=int, default=3)
    p.add_argument("--seed", type=int, default=_default_seed())


def _add_output_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--no-plots", action="store_true",
                   help="skip the PNG figures next to the data files")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pie",
        description="Sparse spline additive models with a penalized "
                    "gradient-boosting refinement.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fit a model and write a .pie.json file")
    p.add_argument("--data", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--lambda1", default="auto",
                   help="group penalty weight, 'inf', or 'auto' (cross-validate)")
    p.add_argument("--lambda2", default="auto",
                   help="tree penalty weight, 'inf', or 'auto' (cross-validate)")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--max-active", type=int, default=None,
                   help="with auto selection, cap the active feature count")
    _add_config_flags(p)
    _add_output_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="predictions for new rows")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    _add_output_flags(p)
    p.add_argument("--seed", type=int, default=_default_seed())
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("explain", help="per-row prediction breakdowns")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--plot-row", type=int, default=0,
                   help="row whose breakdown is rendered as a bar chart")
    _add_output_flags(p)
    p.add_argument("--seed", type=int, default=_default_seed())
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("cv", help="cross-validate a penalty grid")
    p.add_argument("--data", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--lambda1-grid", type=_parse_grid,
                   default=list(DEFAULT_LAMBDA1_GRID))
    p.add_argument("--lambda2-grid", type=_parse_grid,
                   default=list(DEFAULT_LAMBDA2_GRID))
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--max-active", type=int, default=None)
    _add_config_flags(p)
    _add_output_flags(p)
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("sensitivity", help="holdout metrics over a penalty grid")
    p.add_argument("--data", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--lambda1-grid", type=_parse_grid,
                   default=list(DEFAULT_LAMBDA1_GRID))
    p.add_argument("--lambda2-grid", type=_parse_grid,
                   default=list(DEFAULT_LAMBDA2_GRID))
    p.add_argument("--holdout", type=float, default=0.25)
    _add_config_flags(p)
    _add_output_flags(p)
    p.set_defaults(func=cmd_sensitivity)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (DataError, SchemaError, FitError, ModelFormatError, ValueError,
            OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
