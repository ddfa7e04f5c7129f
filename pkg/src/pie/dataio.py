"""Loading, encoding, standardization and splitting of tabular datasets.

All operations are deterministic: shuffling is a pure function of the seed,
and every transform is fit on training data only.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

COLUMN_KINDS = ("numeric", "categorical", "target")


class SchemaError(ValueError):
    """Schema file is malformed or inconsistent with the data."""


class DataError(ValueError):
    """A data cell violates the schema (missing, unknown category, non-numeric)."""


@dataclass(frozen=True)
class ColumnSchema:
    name: str
    kind: str
    categories: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.kind not in COLUMN_KINDS:
            raise SchemaError(f"column {self.name!r}: unknown kind {self.kind!r}")
        if self.kind == "categorical":
            if not self.categories:
                raise SchemaError(f"categorical column {self.name!r} needs a category list")
            if len(set(self.categories)) != len(self.categories):
                raise SchemaError(f"column {self.name!r}: duplicate categories")
        elif self.categories is not None:
            raise SchemaError(f"column {self.name!r}: categories only allowed for categorical kind")


def read_schema(path) -> list[ColumnSchema]:
    """Read the JSON sidecar describing column names and kinds."""
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, list):
        raise SchemaError("schema file must contain a JSON list of column entries")
    cols = []
    for entry in raw:
        cols.append(ColumnSchema(
            name=entry["name"],
            kind=entry["kind"],
            categories=tuple(entry["categories"]) if "categories" in entry else None,
        ))
    validate_schema(cols)
    return cols


def validate_schema(schema: list[ColumnSchema]) -> None:
    names = [c.name for c in schema]
    if len(set(names)) != len(names):
        raise SchemaError("duplicate column names in schema")
    n_target = sum(1 for c in schema if c.kind == "target")
    if n_target != 1:
        raise SchemaError(f"schema must declare exactly one target column, found {n_target}")


@dataclass(frozen=True)
class FeatureGroup:
    """One original feature and the encoded columns derived from it."""

    name: str
    kind: str                       # "numeric" | "categorical"
    columns: tuple[int, ...]        # indices into Dataset.X
    categories: tuple[str, ...] | None = None


@dataclass(frozen=True)
class Dataset:
    """Numeric feature matrix plus target and the encoded-column bookkeeping.

    Categorical columns are stored as integer category codes until
    :func:`one_hot_encode` expands them; the group map records which encoded
    columns came from which original feature.
    """

    X: np.ndarray
    y: np.ndarray | None
    columns: tuple[str, ...]
    groups: tuple[FeatureGroup, ...]

    def __post_init__(self):
        if self.X.ndim != 2:
            raise DataError("feature matrix must be 2-dimensional")
        if self.X.shape[1] != len(self.columns):
            raise DataError("column names do not match feature matrix width")
        if self.y is not None and len(self.y) != self.X.shape[0]:
            raise DataError("target length does not match row count")
        if not np.all(np.isfinite(self.X)):
            raise DataError("feature matrix contains non-finite values")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        """Number of original features (groups), not encoded columns."""
        return len(self.groups)

    def feature_names(self) -> list[str]:
        return [g.name for g in self.groups]

    def take(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return replace(self, X=self.X[idx], y=None if self.y is None else self.y[idx])


@dataclass(frozen=True)
class ScalerParams:
    """Training-split mean/std for numeric columns; constant columns are dropped."""

    means: dict[str, float]
    stds: dict[str, float]
    dropped: tuple[str, ...] = ()
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        for name, s in self.stds.items():
            if not s > 0:
                raise DataError(f"stored std for column {name!r} must be positive")


def load_csv(path, schema: list[ColumnSchema], require_target: bool = True) -> Dataset:
    """Parse a UTF-8 comma-separated file into a typed Dataset.

    The header row must contain exactly the schema's column names.  Every
    cell is validated: empty cells, unknown categories and non-numeric cells
    in numeric columns are hard errors.
    """
    validate_schema(schema)
    by_name = {c.name: c for c in schema}
    target_name = next(c.name for c in schema if c.kind == "target")

    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file, header row required") from None
        rows = list(reader)

    missing = set(by_name) - set(header) - ({target_name} if not require_target else set())
    extra = set(header) - set(by_name)
    if missing or extra:
        parts = []
        if missing:
            parts.append(f"missing columns {sorted(missing)}")
        if extra:
            parts.append(f"unexpected columns {sorted(extra)}")
        raise SchemaError(f"{path}: header does not match schema: " + "; ".join(parts))

    feature_cols = [c for c in schema if c.kind != "target"]
    has_target = target_name in header
    col_pos = {name: header.index(name) for name in header}

    n = len(rows)
    if require_target and n < 2:
        raise DataError(f"{path}: need at least 2 data rows, found {n}")
    if n < 1:
        raise DataError(f"{path}: no data rows")

    X = np.empty((n, len(feature_cols)), dtype=np.float64)
    y = np.empty(n, dtype=np.float64) if has_target else None
    for r, row in enumerate(rows):
        if len(row) != len(header):
            raise DataError(f"row {r + 1}: expected {len(header)} cells, found {len(row)}")
        for j, col in enumerate(feature_cols):
            cell = row[col_pos[col.name]]
            if cell == "":
                raise DataError(f"missing value at row {r + 1}, column {col.name!r}")
            if col.kind == "numeric":
                try:
                    X[r, j] = float(cell)
                except ValueError:
                    raise DataError(
                        f"non-numeric value {cell!r} at row {r + 1}, column {col.name!r}"
                    ) from None
            else:
                try:
                    X[r, j] = col.categories.index(cell)
                except ValueError:
                    raise DataError(
                        f"unknown category {cell!r} at row {r + 1}, column {col.name!r}; "
                        f"allowed: {list(col.categories)}"
                    ) from None
        if has_target:
            cell = row[col_pos[target_name]]
            if cell == "":
                raise DataError(f"missing value at row {r + 1}, column {target_name!r}")
            try:
                y[r] = float(cell)
            except ValueError:
                raise DataError(
                    f"non-numeric target {cell!r} at row {r + 1}"
                ) from None

    groups = tuple(
        FeatureGroup(name=c.name, kind="categorical" if c.kind == "categorical" else "numeric",
                     columns=(j,), categories=c.categories)
        for j, c in enumerate(feature_cols)
    )
    return Dataset(X=X, y=y, columns=tuple(c.name for c in feature_cols), groups=groups)


def one_hot_encode(ds: Dataset) -> Dataset:
    """Expand each categorical column with m categories into m binary columns.

    All columns of one categorical feature share a single group, so the
    grouped penalty selects or drops the whole feature.
    """
    if all(g.kind == "numeric" for g in ds.groups):
        return ds

    new_cols: list[np.ndarray] = []
    new_names: list[str] = []
    new_groups: list[FeatureGroup] = []
    for g in ds.groups:
        if g.kind == "numeric":
            idx = len(new_names)
            new_cols.append(ds.X[:, g.columns[0]])
            new_names.append(ds.columns[g.columns[0]])
            new_groups.append(replace(g, columns=(idx,)))
        else:
            codes = ds.X[:, g.columns[0]].astype(np.intp)
            start = len(new_names)
            for c, cat in enumerate(g.categories):
                new_cols.append((codes == c).astype(np.float64))
                new_names.append(f"{g.name}={cat}")
            new_groups.append(replace(g, columns=tuple(range(start, start + len(g.categories)))))
    return Dataset(
        X=np.column_stack(new_cols),
        y=ds.y,
        columns=tuple(new_names),
        groups=tuple(new_groups),
    )


def fit_scaler(train: Dataset) -> ScalerParams:
    """Compute per-column mean/std (denominator n) for numeric columns."""
    means: dict[str, float] = {}
    stds: dict[str, float] = {}
    dropped: list[str] = []
    notes: list[str] = []
    for g in train.groups:
        if g.kind != "numeric":
            continue
        name = train.columns[g.columns[0]]
        col = train.X[:, g.columns[0]]
        m = float(col.mean())
        s = float(col.std())
        if s == 0.0:
            dropped.append(name)
            note = f"constant numeric column {name!r} dropped (std = 0 on training split)"
            notes.append(note)
            warnings.warn(note)
        else:
            means[name] = m
            stds[name] = s
    return ScalerParams(means=means, stds=stds, dropped=tuple(dropped), warnings=tuple(notes))


def apply_scaler(ds: Dataset, params: ScalerParams) -> Dataset:
    """Scale numeric columns with stored training statistics; drop constant ones."""
    keep: list[int] = []
    cols: list[np.ndarray] = []
    names: list[str] = []
    for j, name in enumerate(ds.columns):
        if name in params.dropped:
            continue
        keep.append(j)
        names.append(name)
        col = ds.X[:, j]
        if name in params.means:
            col = (col - params.means[name]) / params.stds[name]
        cols.append(col)

    old_to_new = {old: new for new, old in enumerate(keep)}
    groups = []
    for g in ds.groups:
        remapped = tuple(old_to_new[c] for c in g.columns if c in old_to_new)
        if remapped:
            groups.append(replace(g, columns=remapped))
    return Dataset(
        X=np.column_stack(cols) if cols else np.empty((ds.n, 0)),
        y=ds.y,
        columns=tuple(names),
        groups=tuple(groups),
    )


def standardize(train: Dataset, apply_to: Dataset) -> tuple[Dataset, ScalerParams]:
    """Fit scaling on `train` and apply it to `apply_to`.

    Numeric columns become (x - mean_train) / std_train with std computed
    with denominator n; one-hot columns pass through untouched.
    """
    if train.columns != apply_to.columns:
        raise DataError("standardize: datasets have different columns")
    params = fit_scaler(train)
    return apply_scaler(apply_to, params), params


@dataclass(frozen=True)
class Pipeline:
    """Schema plus fitted scaler: everything needed to turn raw CSV rows
    into the encoded, scaled matrix a fitted model expects."""

    schema: tuple[ColumnSchema, ...]
    scaler: ScalerParams

    def prepare(self, raw: Dataset) -> Dataset:
        return apply_scaler(one_hot_encode(raw), self.scaler)


def kfold_split(ds: Dataset, k: int, seed: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Partition row indices into k shuffled folds of near-equal size."""
    n = ds.n
    if k < 2:
        raise ValueError(f"k must be at least 2, got {k}")
    if k > n:
        raise ValueError(f"k = {k} exceeds the number of rows ({n})")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    folds = np.array_split(order, k)
    out = []
    for i, test in enumerate(folds):
        train = np.concatenate([f for j, f in enumerate(folds) if j != i])
        out.append((np.sort(train), np.sort(test)))
    return out
