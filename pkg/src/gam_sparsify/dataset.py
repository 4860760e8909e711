"""Tabular data ingestion, quantile binning and train/test splitting."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

CONTINUOUS = "continuous"
CATEGORICAL = "categorical"

DEFAULT_MISSING = ("", "NA")
_MAX_CODE = np.iinfo(np.uint16).max  # bin codes are stored as uint16

_TRUE_TOKENS = {"true", "t", "1", "1.0", "yes"}
_FALSE_TOKENS = {"false", "f", "0", "0.0", "no"}


class DataError(ValueError):
    """Raised for malformed input data or schema mismatches."""


@dataclass(frozen=True)
class Dataset:
    """Column-oriented feature table with an optional target vector.

    Continuous columns are float64 arrays with NaN marking missing values.
    Categorical columns are object arrays of ``str`` with ``None`` marking
    missing values.
    """

    columns: dict[str, np.ndarray]
    kinds: dict[str, str]
    target: np.ndarray | None = None
    target_name: str | None = None
    n_rows: int = field(init=False)

    def __post_init__(self):
        if set(self.columns) != set(self.kinds):
            raise DataError("columns and kinds must describe the same features")
        lengths = {len(v) for v in self.columns.values()}
        if self.target is not None:
            lengths.add(len(self.target))
        if len(lengths) > 1:
            raise DataError(f"columns have unequal lengths: {sorted(lengths)}")
        for name, kind in self.kinds.items():
            if not name:
                raise DataError("column names must be non-empty")
            if kind not in (CONTINUOUS, CATEGORICAL):
                raise DataError(f"unknown column kind {kind!r} for {name!r}")
        n = lengths.pop() if lengths else 0
        object.__setattr__(self, "n_rows", n)

    @property
    def feature_names(self) -> list[str]:
        return list(self.columns)

    @property
    def n_features(self) -> int:
        return len(self.columns)

    def take(self, rows) -> "Dataset":
        """Return the subset of rows given by an index array or boolean mask."""
        rows = np.asarray(rows)
        cols = {k: v[rows] for k, v in self.columns.items()}
        target = None if self.target is None else self.target[rows]
        return Dataset(cols, dict(self.kinds), target, self.target_name)

    def drop(self, name: str) -> "Dataset":
        if name not in self.columns:
            raise DataError(f"column {name!r} not found")
        cols = {k: v for k, v in self.columns.items() if k != name}
        kinds = {k: v for k, v in self.kinds.items() if k != name}
        return Dataset(cols, kinds, self.target, self.target_name)


def from_arrays(X, y=None, names: Sequence[str] | None = None,
                target_name: str | None = "y") -> Dataset:
    """Build an all-continuous :class:`Dataset` from a 2-D numeric array."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise DataError("X must be two-dimensional")
    if names is None:
        names = [f"x{j + 1}" for j in range(X.shape[1])]
    if len(names) != X.shape[1] or len(set(names)) != len(names):
        raise DataError("names must be unique and match the column count")
    cols = {name: X[:, j].copy() for j, name in enumerate(names)}
    target = None if y is None else np.asarray(y, dtype=np.float64)
    return Dataset(cols, {n: CONTINUOUS for n in names}, target,
                   target_name if y is not None else None)


def check_binary_target(y: np.ndarray) -> None:
    values = np.unique(y)
    if not np.all(np.isin(values, (0.0, 1.0))):
        raise DataError("classification target must contain only 0 and 1, "
                        f"found values {values[:5].tolist()}")


def _parse_float(token: str) -> float | None:
    try:
        return float(token)
    except ValueError:
        return None


def _read_rows(path: Path, delimiter: str) -> list[list[str]]:
    with open(path, newline="") as fh:
        if delimiter == "ws":
            return [line.split() for line in fh if line.strip()]
        return [row for row in csv.reader(fh, delimiter=delimiter) if row]


def ingest_csv(path, target: str, delimiter: str = ",",
               missing: Iterable[str] = DEFAULT_MISSING,
               family: str | None = None) -> Dataset:
    """Read a delimited text file with a header row into a :class:`Dataset`.

    Parameters
    ----------
    path : path-like
        File to read.
    target : str
        Name of the response column; it is removed from the features.
    delimiter : str
        Field separator, or ``"ws"`` to split on runs of whitespace.
    missing : iterable of str
        Tokens recorded as missing values.
    family : {"gaussian", "binomial"}, optional
        With ``"binomial"`` the target is checked to be 0/1.

    Returns
    -------
    Dataset
        Columns whose non-missing tokens all parse as numbers become
        continuous; every other column becomes categorical.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"data file not found: {path}")
    rows = _read_rows(path, delimiter)
    if not rows:
        raise DataError(f"{path}: empty file, header row required")
    header, body = rows[0], rows[1:]
    if len(set(header)) != len(header):
        raise DataError(f"{path}: duplicate column names in header")
    if target not in header:
        raise DataError(f"{path}: target column {target!r} not in header")
    width = len(header)
    for lineno, row in enumerate(body, start=2):
        if len(row) != width:
            raise DataError(f"{path}: row {lineno} has {len(row)} fields, "
                            f"expected {width}")

    missing = set(missing)
    columns: dict[str, np.ndarray] = {}
    kinds: dict[str, str] = {}
    target_values = None
    for j, name in enumerate(header):
        tokens = [row[j] for row in body]
        parsed = [None if t in missing else _parse_float(t) for t in tokens]
        numeric = all(p is not None for p, t in zip(parsed, tokens)
                      if t not in missing)
        if name == target:
            if not numeric:
                raise DataError(f"target column {target!r} must be numeric")
            if any(t in missing for t in tokens):
                raise DataError(f"target column {target!r} has missing values")
            target_values = np.array(parsed, dtype=np.float64)
            continue
        if numeric:
            columns[name] = np.array([math.nan if p is None else p for p in parsed],
                                     dtype=np.float64)
            kinds[name] = CONTINUOUS
        else:
            columns[name] = np.array([None if t in missing else t for t in tokens],
                                     dtype=object)
            kinds[name] = CATEGORICAL

    if family == "binomial":
        check_binary_target(target_values)
    return Dataset(columns, kinds, target_values, target)


def _as_bool(column: np.ndarray, name: str) -> np.ndarray:
    out = np.empty(len(column), dtype=bool)
    for i, v in enumerate(column):
        if v is None or (isinstance(v, float) and math.isnan(v)):
            raise DataError(f"indicator column {name!r} has missing values")
        token = str(v).strip().lower()
        if isinstance(v, float):
            token = repr(float(v))
        if token in _TRUE_TOKENS:
            out[i] = True
        elif token in _FALSE_TOKENS:
            out[i] = False
        else:
            raise DataError(f"indicator column {name!r} is not boolean-like "
                            f"(value {v!r})")
    return out


def split_by_indicator(data: Dataset, indicator: str) -> tuple[Dataset, Dataset]:
    """Split rows into (train, test) where the indicator column is true for test.

    The indicator column is dropped from both parts and row order is kept.
    """
    if indicator not in data.columns:
        raise DataError(f"indicator column {indicator!r} not found")
    is_test = _as_bool(data.columns[indicator], indicator)
    if not is_test.any():
        raise DataError("indicator selects no test rows")
    if is_test.all():
        raise DataError("indicator selects no training rows")
    rest = data.drop(indicator)
    return rest.take(np.flatnonzero(~is_test)), rest.take(np.flatnonzero(is_test))


def split_by_fraction(data: Dataset, test_fraction: float,
                      seed: int = 0) -> tuple[Dataset, Dataset]:
    """Random (train, test) split; row order is kept within each part."""
    if not 0.0 < test_fraction < 1.0:
        raise DataError("test_fraction must lie in (0, 1)")
    n_test = int(round(test_fraction * data.n_rows))
    if n_test < 1 or n_test >= data.n_rows:
        raise DataError(f"test_fraction={test_fraction} leaves an empty part "
                        f"for {data.n_rows} rows")
    rng = np.random.default_rng(seed)
    is_test = np.zeros(data.n_rows, dtype=bool)
    is_test[rng.choice(data.n_rows, size=n_test, replace=False)] = True
    return data.take(np.flatnonzero(~is_test)), data.take(np.flatnonzero(is_test))


# ---------------------------------------------------------------------------
# Binning
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FeatureBins:
    """Bin layout of one feature.

    Continuous: value bins ``0..len(cuts)`` then the missing slot.
    Categorical: one bin per level, then the unseen slot, then the missing slot.
    """

    name: str
    kind: str
    cuts: tuple[float, ...] = ()
    categories: tuple[str, ...] = ()

    @property
    def n_value_bins(self) -> int:
        if self.kind == CONTINUOUS:
            return len(self.cuts) + 1
        return len(self.categories)

    @property
    def unseen_bin(self) -> int | None:
        return len(self.categories) if self.kind == CATEGORICAL else None

    @property
    def missing_bin(self) -> int:
        return self.n_bins - 1

    @property
    def n_bins(self) -> int:
        extra = 1 if self.kind == CONTINUOUS else 2
        return self.n_value_bins + extra

    def to_dict(self) -> dict:
        d = {"name": self.name, "kind": self.kind}
        if self.kind == CONTINUOUS:
            d["cuts"] = list(self.cuts)
        else:
            d["categories"] = list(self.categories)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureBins":
        return cls(d["name"], d["kind"], tuple(float(c) for c in d.get("cuts", ())),
                   tuple(d.get("categories", ())))


@dataclass(frozen=True)
class BinSpec:
    features: tuple[FeatureBins, ...]
    max_bins: int

    @property
    def names(self) -> list[str]:
        return [f.name for f in self.features]

    @property
    def n_bins(self) -> list[int]:
        return [f.n_bins for f in self.features]

    def __getitem__(self, name: str) -> FeatureBins:
        for f in self.features:
            if f.name == name:
                return f
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {"max_bins": self.max_bins,
                "features": [f.to_dict() for f in self.features]}

    @classmethod
    def from_dict(cls, d: dict) -> "BinSpec":
        return cls(tuple(FeatureBins.from_dict(f) for f in d["features"]),
                   int(d["max_bins"]))


@dataclass(frozen=True)
class BinnedMatrix:
    codes: np.ndarray  # (n_rows, n_features) uint16
    spec: BinSpec

    @property
    def n_rows(self) -> int:
        return self.codes.shape[0]

    def column(self, j: int) -> np.ndarray:
        return self.codes[:, j].astype(np.intp)


def quantile_cuts(values: np.ndarray, max_bins: int) -> np.ndarray:
    """Cut points at the interior quantiles of the finite values.

    With at most ``max_bins`` distinct values every value gets its own bin
    (cuts at the midpoints).  Otherwise cuts that would leave a bin of the
    training values empty are dropped.
    """
    v = values[np.isfinite(values)]
    if v.size == 0:
        return np.empty(0)
    distinct = np.unique(v)
    if distinct.size <= max_bins:
        return distinct[:-1] + np.diff(distinct) / 2
    qs = np.arange(1, max_bins) / max_bins
    cuts = np.unique(np.quantile(v, qs))
    cuts = cuts[cuts < distinct[-1]]
    counts = np.bincount(np.searchsorted(cuts, v, side="left"), minlength=cuts.size + 1)
    return cuts[counts[:-1] > 0]


def build_bins(data: Dataset, max_bins: int = 256) -> BinSpec:
    """Derive a :class:`BinSpec` from the feature columns of ``data``.

    ``max_bins`` bounds the number of value bins per feature; the missing
    (and, for categoricals, unseen) slots come on top of it.
    """
    if not 2 <= max_bins <= _MAX_CODE - 2:
        raise ValueError(f"max_bins must lie in [2, {_MAX_CODE - 2}]")
    feats = []
    for name, col in data.columns.items():
        if data.kinds[name] == CONTINUOUS:
            cuts = quantile_cuts(col, max_bins)
            feats.append(FeatureBins(name, CONTINUOUS, tuple(float(c) for c in cuts)))
        else:
            levels, counts = [], {}
            for v in col:
                if v is None:
                    continue
                if v not in counts:
                    levels.append(v)
                    counts[v] = 0
                counts[v] += 1
            if len(levels) > max_bins:
                # keep the most frequent levels; the rest fall into the unseen slot
                ranked = sorted(levels, key=lambda s: (-counts[s], levels.index(s)))
                keep = set(ranked[:max_bins])
                levels = [s for s in levels if s in keep]
            feats.append(FeatureBins(name, CATEGORICAL, categories=tuple(levels)))
    return BinSpec(tuple(feats), max_bins)


def bin_column(fb: FeatureBins, column: np.ndarray) -> np.ndarray:
    """Map raw values of one feature to bin indices (a total function)."""
    n = len(column)
    if fb.kind == CONTINUOUS:
        if column.dtype == object:
            raise DataError(f"feature {fb.name!r} is continuous in the bin spec "
                            "but categorical in the data")
        x = column.astype(np.float64)
        out = np.searchsorted(np.asarray(fb.cuts, dtype=np.float64), x, side="left")
        out[np.isnan(x)] = fb.missing_bin
        return out.astype(np.uint16)
    lookup = {c: i for i, c in enumerate(fb.categories)}
    out = np.empty(n, dtype=np.uint16)
    for i, v in enumerate(column):
        if v is None or (isinstance(v, float) and math.isnan(v)):
            out[i] = fb.missing_bin
        else:
            out[i] = lookup.get(v if isinstance(v, str) else str(v), fb.unseen_bin)
    return out


def apply_bins(data: Dataset, spec: BinSpec, strict: bool = True) -> BinnedMatrix:
    """Bin every feature named in ``spec``.

    With ``strict`` (the default) data columns unknown to the spec are an
    error; otherwise they are ignored.
    """
    if strict:
        unknown = [n for n in data.feature_names if n not in set(spec.names)]
        if unknown:
            raise DataError(f"features not covered by the bin spec: {unknown[:5]}")
    absent = [fb.name for fb in spec.features if fb.name not in data.columns]
    if absent:
        raise DataError(f"data is missing model features: {absent[:5]}")
    codes = np.empty((data.n_rows, len(spec.features)), dtype=np.uint16)
    for j, fb in enumerate(spec.features):
        codes[:, j] = bin_column(fb, data.columns[fb.name])
    return BinnedMatrix(codes, spec)
